"""Node characteristics and the sparse feature functions built on them.

Characteristics are boolean predicates evaluated per node.  Semantic ones
read node attributes (absent attribute means false); syntactic ones are
computed from the tree.  Observation features pair a characteristic with a
transform on node cliques; indicator features fire when a clique's
(transforms, labels) tuple was seen in training data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from rapidfuzz.distance import Levenshtein

from .transforms import EMPTY, ORDINAL, TransformLabeling
from .trees import LABELS, VIRTUAL_ROOT, Ast, Node

STATEMENT_KINDS = ("assignment", "call", "return", "if", "loop", "try", "throw",
                   "declaration", "other")
OPERATORS = ("||", "&&", "|", "^", "&", "==", "!=", "<", ">", "<=", ">=",
             "<<", ">>", "+", "-", "*", "/", "%")
LOGICAL_OPERATORS = ("||", "&&")
MATH_OPERATORS = ("+", "-", "*", "/", "%")
SIMILARITY_THRESHOLD = 0.7

LE_CHARS = tuple(f"LE{i}" for i in range(1, 7))
V_PROPAGATED = tuple(f"V{i}'" for i in range(7, 13))
M_PROPAGATED = tuple(f"M{i}'" for i in range(6, 9))

# attribute-backed characteristics
_VAR_ATTRS = {
    "V3": "instance_of_enclosing_class",
    "V4": "compatible_vars_in_scope",
    "V5": "compatible_param_methods",
    "V6": "compatible_return_methods",
    "V7": "local_unreferenced_before",
    "V8": "local_unassigned_before",
    "V9": "field_unreferenced_elsewhere",
    "V10": "field_unassigned_elsewhere",
    "V11": "same_type_null_guarded",
    "V12": "same_type_normal_guarded",
    "V13": "arg_var_swap_matches_call",
    "V14": "arg_call_swap_matches_call",
}
_METH_ATTRS = {
    "M3": "params_compatible_with_return",
    "M4": "compatible_vars_in_scope",
    "M5": "compatible_return_methods",
    "M6": "same_sig_null_guarded",
    "M7": "same_sig_normal_guarded",
    "M8": "same_sig_try_wrapped",
    "M9": "arg_var_swap_matches_call",
    "M10": "arg_call_swap_matches_call",
    "M12": "overloads",
}
_LE_ATTRS = {
    "LE1": "le_atom_mismatch_elsewhere",
    "LE2": "le_unreferenced_var_guarded_elsewhere",
    "LE3": "le_unreferenced_boolean_in_scope",
}

VARIABLE_CHARS = tuple(f"V{i}" for i in range(1, 17))
METHOD_CHARS = tuple(f"M{i}" for i in range(1, 15))
STATEMENT_CHARS = tuple(
    f"S{i}[{kind}]" for i in range(1, 5) for kind in STATEMENT_KINDS) + ("S5",)

CHARACTERISTICS: dict[str, tuple[str, ...]] = {
    "VariableAccess": VARIABLE_CHARS + LE_CHARS,
    "MethodCall": METHOD_CHARS + V_PROPAGATED + LE_CHARS,
    "BinaryOperator": tuple(f"BO1[{op}]" for op in OPERATORS)
    + ("BO2", "BO3", "BO4") + LE_CHARS,
    "LogicalOperator": tuple(f"BO1[{op}]" for op in LOGICAL_OPERATORS)
    + ("BO2", "BO3") + LE_CHARS,
    "UnaryOperator": LE_CHARS,
    "If": LE_CHARS,
    "TernaryOperator": LE_CHARS,
    VIRTUAL_ROOT: STATEMENT_CHARS + V_PROPAGATED + M_PROPAGATED,
}

DIRECT, INVERSE = "direct", "inverse"


def similar(a: str, b: str, threshold: float = SIMILARITY_THRESHOLD) -> bool:
    """Distinct strings whose normalized Levenshtein similarity reaches ``threshold``."""
    if not a or not b or a == b:
        return False
    return 1.0 - Levenshtein.distance(a, b) / max(len(a), len(b)) >= threshold


def _any_similar(name, pool) -> bool:
    if not isinstance(name, str) or not isinstance(pool, (list, tuple)):
        return False
    return any(isinstance(p, str) and similar(name, p) for p in pool)


@dataclass
class CharacteristicVector:
    """Boolean characteristic values per position."""

    values: dict[int, dict[str, bool]] = field(default_factory=dict)

    def __getitem__(self, position: int) -> dict[str, bool]:
        return self.values.get(position, {})

    def true_ids(self, position: int) -> set[str]:
        return {c for c, v in self[position].items() if v}


def _subtree(node: Node, stop_at_statement: bool = True):
    stack = list(reversed(node.children))
    while stack:
        n = stack.pop()
        yield n
        if stop_at_statement and n.label == VIRTUAL_ROOT:
            continue
        stack.extend(reversed(n.children))


def _has(node: Node, pred) -> bool:
    return pred(node) or any(pred(n) for n in _subtree(node, False))


def _is_null(n: Node) -> bool:
    return n.label == "Literal" and (n.value or "").strip().lower() == "null"


def _is_not(n: Node) -> bool:
    return n.label == "UnaryOperator" and (n.value or "").strip() == "!"


def _is_null_check(n: Node) -> bool:
    return (n.label == "BinaryOperator" and n.value in ("==", "!=")
            and any(_is_null(c) for c in n.children))


def _atoms(root: Node) -> list[Node]:
    if root.label != "LogicalOperator":
        return [root]
    out = []
    for child in root.children:
        out.extend(_atoms(child))
    return out


def _logical_roots(ast: Ast) -> dict[int, int]:
    """Map nodes that carry logical-expression characteristics to the expression root."""
    roots: dict[int, int] = {}
    for node in ast.nodes:
        par = ast.parent(node.position)
        if node.label == "LogicalOperator":
            if par is None or ast.node(par).label != "LogicalOperator":
                roots[node.position] = node.position
        if node.label in ("If", "TernaryOperator") and node.children:
            cond = node.children[0]
            roots[cond.position] = cond.position
            roots[node.position] = cond.position
    return roots


def _logical_chars(root: Node, attrs: dict) -> dict[str, bool]:
    atoms = _atoms(root)
    null_checks = [a for a in atoms if _is_null_check(a)]
    out = {c: bool(attrs.get(a)) for c, a in _LE_ATTRS.items()}
    out["LE4"] = any(_has(a, _is_not) for a in atoms)
    out["LE5"] = any(a.label == "VariableAccess" for a in atoms)
    out["LE6"] = bool(null_checks) and len(null_checks) < len(atoms)
    return out


def _variable_chars(node: Node) -> dict[str, bool]:
    a = node.attrs
    out = {"V1": a.get("type_kind") == "primitive", "V2": a.get("type_kind") == "object"}
    out.update({c: bool(a.get(k)) for c, k in _VAR_ATTRS.items()})
    ident = a.get("identifier", node.value)
    out["V15"] = _any_similar(ident, a.get("scope_variables"))
    out["V16"] = _any_similar(ident, a.get("class_methods"))
    return out


def _method_chars(node: Node) -> dict[str, bool]:
    a = node.attrs
    ident = a.get("identifier", node.value)
    out = {"M1": a.get("return_kind") == "primitive", "M2": a.get("return_kind") == "object"}
    out.update({c: bool(a.get(k)) for c, k in _METH_ATTRS.items()})
    out["M11"] = isinstance(ident, str) and ident.startswith("get")
    out["M13"] = _any_similar(ident, a.get("scope_variables"))
    out["M14"] = _any_similar(ident, a.get("class_methods"))
    return out


def _operator_chars(node: Node) -> dict[str, bool]:
    op = (node.value or "").strip()
    ops = LOGICAL_OPERATORS if node.label == "LogicalOperator" else OPERATORS
    out = {f"BO1[{o}]": op == o for o in ops}
    logical = op in LOGICAL_OPERATORS
    out["BO2"] = logical and any(_has(c, _is_not) for c in node.children)
    out["BO3"] = logical and any(_has(c, _is_null) for c in node.children)
    if node.label == "BinaryOperator":
        out["BO4"] = op in MATH_OPERATORS and any(
            _has(c, lambda n: n.label == "Literal" and (n.value or "").strip() in ("0", "1"))
            for c in node.children)
    return out


def _statement_chars(node: Node) -> dict[str, bool]:
    attrs = dict(node.children[0].attrs) if node.children else {}
    attrs.update(node.attrs)
    out = {}
    for i, key in enumerate(("statement_kind", "prev_statement_kind",
                             "next_statement_kind", "parent_statement_kind"), start=1):
        kind = attrs.get(key)
        for k in STATEMENT_KINDS:
            out[f"S{i}[{k}]"] = kind == k
    out["S5"] = bool(attrs.get("throws_exception"))
    return out


def compute_characteristics(ast: Ast) -> CharacteristicVector:
    """Evaluate every unprimed characteristic defined for each node's label."""
    lroots = _logical_roots(ast)
    values: dict[int, dict[str, bool]] = {}
    for node in ast.nodes:
        label = node.label
        if label not in CHARACTERISTICS:
            continue
        chars: dict[str, bool] = {}
        if label == "VariableAccess":
            chars.update(_variable_chars(node))
        elif label == "MethodCall":
            chars.update(_method_chars(node))
        elif label in ("BinaryOperator", "LogicalOperator"):
            chars.update(_operator_chars(node))
        elif label == VIRTUAL_ROOT:
            chars.update(_statement_chars(node))
        if "LE1" in CHARACTERISTICS[label]:
            root_pos = lroots.get(node.position)
            if root_pos is None:
                chars.update({c: False for c in LE_CHARS})
            else:
                root = ast.node(root_pos)
                attrs = {**node.attrs, **root.attrs}
                chars.update(_logical_chars(root, attrs))
        values[node.position] = {c: chars.get(c, False)
                                 for c in CHARACTERISTICS[label] if not c.endswith("'")}
    return CharacteristicVector(values)


def propagate_characteristics(vec: CharacteristicVector, ast: Ast) -> CharacteristicVector:
    """Add primed characteristics: an OR over the relevant descendants.

    V7..V12 of variable accesses go to the statement's virtual root and to
    every enclosing method call; M6..M8 of method calls go to the virtual
    root.  Propagation does not cross into nested statements.
    """
    out = {pos: dict(chars) for pos, chars in vec.values.items()}
    for node in ast.nodes:
        if node.label not in (VIRTUAL_ROOT, "MethodCall"):
            continue
        below = list(_subtree(node))
        primed = {c: False for c in V_PROPAGATED}
        if node.label == VIRTUAL_ROOT:
            primed.update({c: False for c in M_PROPAGATED})
        for n in below:
            src = vec[n.position]
            if n.label == "VariableAccess":
                for c in V_PROPAGATED:
                    primed[c] = primed[c] or src.get(c[:-1], False)
            elif n.label == "MethodCall" and node.label == VIRTUAL_ROOT:
                for c in M_PROPAGATED:
                    primed[c] = primed[c] or src.get(c[:-1], False)
        out.setdefault(node.position, {}).update(primed)
    return CharacteristicVector(out)


def characteristics(ast: Ast) -> CharacteristicVector:
    return propagate_characteristics(compute_characteristics(ast), ast)


# --------------------------------------------------------------------------
# vocabularies


def build_viable_transform_sets(data: Iterable[TransformLabeling]) -> dict[str, tuple[str, ...]]:
    """Transforms ever observed per node label; EMPTY is always viable."""
    seen: dict[str, set[str]] = {label: {EMPTY} for label in LABELS}
    for lab in data:
        for pos, name in lab.labels.items():
            seen[lab.ast.node(pos).label].add(name)
    return {label: tuple(sorted(ts, key=ORDINAL.__getitem__)) for label, ts in seen.items()}


def _family_triangles(ast: Ast):
    for node in ast.nodes:
        kids = node.children
        for i in range(len(kids) - 1):
            yield node, kids[i], kids[i + 1]


@dataclass
class IndicatorSets:
    nodetran: set = field(default_factory=set)
    edgetran: set = field(default_factory=set)
    triangletran: set = field(default_factory=set)
    triangletran_spe: set = field(default_factory=set)


def build_indicator_vocab(data: Iterable[TransformLabeling]) -> IndicatorSets:
    """Unions over the training data of the observed clique tuples."""
    sets = IndicatorSets()
    for lab in data:
        ast = lab.ast
        for node in ast.nodes:
            t, L = lab[node.position], node.label
            sets.nodetran.add((t, L))
            for child in node.children:
                sets.edgetran.add((t, L, lab[child.position], child.label))
        for p, a, b in _family_triangles(ast):
            key = (lab[p.position], p.label, lab[a.position], a.label,
                   lab[b.position], b.label)
            sets.triangletran.add(key)
            if a.label == b.label and a.value == b.value:
                sets.triangletran_spe.add(key)
    return sets


@dataclass
class FeatureVocabulary:
    viable: dict[str, tuple[str, ...]]
    observation: list[tuple[str, str, str, str]]
    indicators: IndicatorSets
    index: dict[tuple, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            keys = [("obs",) + f for f in self.observation]
            keys += [("node",) + k for k in sorted(self.indicators.nodetran)]
            keys += [("edge",) + k for k in sorted(self.indicators.edgetran)]
            keys += [("tri",) + k for k in sorted(self.indicators.triangletran)]
            keys += [("spe",) + k for k in sorted(self.indicators.triangletran_spe)]
            self.index = {k: i for i, k in enumerate(keys)}

    def __len__(self) -> int:
        return len(self.index)

    @property
    def n_observation(self) -> int:
        return len(self.observation)

    @property
    def n_indicator(self) -> int:
        return len(self.index) - len(self.observation)

    def keys(self) -> list[tuple]:
        out = [None] * len(self.index)
        for k, i in self.index.items():
            out[i] = k
        return out


def build_vocabulary(data: list[TransformLabeling], observation: bool = True,
                     indicator: bool = True) -> FeatureVocabulary:
    viable = build_viable_transform_sets(data)
    obs: list[tuple[str, str, str, str]] = []
    if observation:
        seen_labels = sorted({n.label for lab in data for n in lab.ast.nodes})
        for L in seen_labels:
            for t in viable[L]:
                for c in CHARACTERISTICS.get(L, ()):
                    obs.append((L, t, c, DIRECT))
                    obs.append((L, t, c, INVERSE))
    sets = build_indicator_vocab(data) if indicator else IndicatorSets()
    return FeatureVocabulary(viable, obs, sets)


# --------------------------------------------------------------------------
# activation


def node_features(vocab: FeatureVocabulary, node: Node, t: str,
                  chars: dict[str, bool]) -> list[int]:
    out = []
    L = node.label
    if t in vocab.viable.get(L, ()):
        for c in CHARACTERISTICS.get(L, ()):
            fid = vocab.index.get(("obs", L, t, c, DIRECT if chars.get(c, False) else INVERSE))
            if fid is not None:
                out.append(fid)
    fid = vocab.index.get(("node", t, L))
    if fid is not None:
        out.append(fid)
    return out


def edge_features(vocab: FeatureVocabulary, parent: Node, child: Node,
                  t1: str, t2: str) -> list[int]:
    fid = vocab.index.get(("edge", t1, parent.label, t2, child.label))
    return [] if fid is None else [fid]


def triangle_features(vocab: FeatureVocabulary, parent: Node, left: Node, right: Node,
                      t1: str, t2: str, t3: str) -> list[int]:
    key = (t1, parent.label, t2, left.label, t3, right.label)
    out = []
    fid = vocab.index.get(("tri",) + key)
    if fid is not None:
        out.append(fid)
    if left.label == right.label and left.value == right.value:
        fid = vocab.index.get(("spe",) + key)
        if fid is not None:
            out.append(fid)
    return out


def activate_features(clique, assignment: tuple[str, ...], vec: CharacteristicVector,
                      vocab: FeatureVocabulary, ast: Ast) -> dict[int, float]:
    """Sparse feature values of one clique under one transform assignment."""
    members = clique.members
    if len(assignment) != len(members):
        raise ValueError("assignment arity does not match clique")
    nodes = [ast.node(p) for p in members]
    if len(members) == 1:
        fids = node_features(vocab, nodes[0], assignment[0], vec[members[0]])
    elif len(members) == 2:
        if ast.parent(members[1]) != members[0]:
            return {}
        fids = edge_features(vocab, nodes[0], nodes[1], *assignment)
    else:
        fids = triangle_features(vocab, *nodes, *assignment)
    out: dict[int, float] = {}
    for f in fids:
        out[f] = out.get(f, 0.0) + 1.0
    return out
