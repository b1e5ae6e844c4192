"""Repair-transform labels and their extraction from edit scripts.

Each rule keys on the essential edit operations of a script (the implicit
follow-up edits, such as the ADDs that build a new condition, are ignored)
and attaches one transform name to one node of the before-tree.  Rules that
act on whole statements attach to the statement's ``VirtualRoot``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from .edits import EditOp, EditScript, NodeRef
from .trees import VIRTUAL_ROOT, Ast, ast_from_obj, ast_to_obj, insert_virtual_roots_with_map

log = logging.getLogger(__name__)

EMPTY = "EMPTY"
TRANSFORMS: tuple[str, ...] = (
    EMPTY,
    "Wrap-Meth",
    "Unwrap-Meth",
    "Var-RW-Var",
    "Var-RW-Meth",
    "Meth-RW-Var",
    "Meth-RW-Meth",
    "BinOperator-Rep",
    "Constant-Rep",
    "LogExp-Exp",
    "LogExp-Red",
    "Wrap-IF-N",
    "Wrap-IF-O",
    "Wrap-IFELSE-N",
    "Wrap-IFELSE-O",
    "Unwrap-IF",
    "Wrap-TRY",
)
ORDINAL = {name: i for i, name in enumerate(TRANSFORMS)}
STATEMENT_TRANSFORMS = frozenset(
    {"Wrap-IF-N", "Wrap-IF-O", "Wrap-IFELSE-N", "Wrap-IFELSE-O", "Wrap-TRY"})


class TransformConflictError(ValueError):
    """Two rules attached different transforms to the same node."""

    def __init__(self, position: int, names: tuple[str, str]):
        self.position = position
        self.names = names
        super().__init__(
            f"extraction conflict at position {position}: {names[0]} vs {names[1]}")


@dataclass
class TransformLabeling:
    """A transform for every position of ``ast``; only non-EMPTY ones are stored."""

    ast: Ast
    labels: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for pos, name in self.labels.items():
            pos = int(pos)
            if name not in ORDINAL:
                raise ValueError(f"unknown transform {name!r}")
            if not 1 <= pos <= self.ast.node_count:
                raise ValueError(f"position {pos} outside 1..{self.ast.node_count}")
            if name != EMPTY:
                clean[pos] = name
        self.labels = dict(sorted(clean.items()))

    def __getitem__(self, position: int) -> str:
        return self.labels.get(position, EMPTY)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransformLabeling):
            return NotImplemented
        return self.labels == other.labels and self.ast.node_count == other.ast.node_count

    def __repr__(self) -> str:
        return f"TransformLabeling({self.labels})"

    @property
    def size(self) -> int:
        """Number of non-EMPTY transforms, S(t)."""
        return len(self.labels)

    def ordinals(self) -> tuple[int, ...]:
        return tuple(ORDINAL[self[p]] for p in self.ast.positions())

    def to_obj(self) -> dict:
        return {"ast": ast_to_obj(self.ast),
                "labels": {str(p): n for p, n in self.labels.items()}}

    @classmethod
    def from_obj(cls, obj: Any) -> TransformLabeling:
        if not isinstance(obj, dict) or "ast" not in obj:
            raise ValueError("labeled example needs an 'ast'")
        labels = {int(k): v for k, v in (obj.get("labels") or {}).items()}
        return cls(ast_from_obj(obj["ast"]), labels)


def _is_null_literal(label: str, value: str | None) -> bool:
    return label == "Literal" and value is not None and value.strip().lower() == "null"


def _def_untouched(attrs: dict, new: bool = False) -> bool:
    prefix = "new_" if new else ""
    return not attrs.get(prefix + "def_edited") and not attrs.get(prefix + "def_children_edited")


class _Script:
    """Index over one edit script for rule matching."""

    def __init__(self, before: Ast, ops: list[EditOp]):
        self.before = before
        self.upd: dict[int, EditOp] = {}
        self.dels: set[int] = set()
        self.movs: dict[int, EditOp] = {}
        self.adds: dict[str, EditOp] = {}
        self.touched: set[int] = set()
        placed: dict[NodeRef, list[tuple[int, NodeRef]]] = {}
        for op in ops:
            if op.kind == "UPD":
                self.upd[op.node] = op
            elif op.kind == "DEL":
                self.dels.add(op.node)
            elif op.kind == "MOV":
                self.movs[op.node] = op
            else:
                self.adds[op.node] = op
            if isinstance(op.node, int):
                self.touched.add(op.node)
            if op.kind in ("ADD", "MOV") and op.parent is not None:
                placed.setdefault(op.parent, []).append((op.index, op.node))
        self._placed = {k: sorted(v) for k, v in placed.items()}

    def label(self, ref: NodeRef) -> str:
        return self.adds[ref].label if isinstance(ref, str) else self.before.node(ref).label

    def value(self, ref: NodeRef) -> str | None:
        return self.adds[ref].value if isinstance(ref, str) else self.before.node(ref).value

    def attrs(self, ref: NodeRef) -> dict:
        return self.adds[ref].attrs if isinstance(ref, str) else self.before.node(ref).attrs

    def parent(self, ref: NodeRef) -> NodeRef | None:
        """Parent in the before-tree, or the declared parent of an added node."""
        return self.adds[ref].parent if isinstance(ref, str) else self.before.parent(ref)

    def before_kids(self, pos: int) -> list[int]:
        return [c.position for c in self.before.node(pos).children]

    def after_kids(self, ref: NodeRef) -> list[NodeRef]:
        slots = dict(self._placed.get(ref, []))
        stay = []
        if isinstance(ref, int):
            stay = [c for c in self.before_kids(ref) if c not in self.dels and c not in self.movs]
        out, fill = [], iter(stay)
        for i in range(1, len(slots) + len(stay) + 1):
            nxt = slots[i] if i in slots else next(fill, None)
            if nxt is not None:
                out.append(nxt)
        return out

    def after_child(self, ref: NodeRef, index: int) -> NodeRef | None:
        kids = self.after_kids(ref)
        return kids[index - 1] if len(kids) >= index else None

    def after_subtree(self, ref: NodeRef) -> list[NodeRef]:
        out, stack = [], [ref]
        while stack:
            r = stack.pop()
            out.append(r)
            stack.extend(self.after_kids(r))
        return out

    def before_subtree(self, pos: int) -> list[int]:
        return [n.position for n in self.before.node(pos).walk()]

    def contains_null(self, ref: NodeRef | None) -> bool:
        if ref is None:
            return False
        return any(_is_null_literal(self.label(r), self.value(r)) for r in self.after_subtree(ref))

    def statements(self, component: NodeRef | None, after: bool) -> list[NodeRef]:
        """Statements of a code block (or the single statement standing in for one)."""
        if component is None:
            return []
        if self.label(component) == "Block":
            return self.after_kids(component) if after else self.before_kids(component)
        return [component]

    def stmt_root(self, stmt: NodeRef) -> NodeRef:
        if isinstance(stmt, int) and self.label(stmt) == VIRTUAL_ROOT:
            kids = self.before_kids(stmt)
            return kids[0] if kids else stmt
        return stmt

    def moved(self, stmts: list[NodeRef]) -> list[int]:
        out = []
        for s in stmts:
            if isinstance(s, int) and (s in self.movs or self.stmt_root(s) in self.movs):
                out.append(s)
        return out

    def first_moved(self, stmts: list[int]) -> int:
        # smallest source line; ties and missing lines fall back to pre-order
        def key(s: int):
            line = self.attrs(self.stmt_root(s)).get("line")
            return (line if isinstance(line, (int, float)) else float("inf"), s)
        return min(stmts, key=key)

    def logical_top(self, pos: int) -> int:
        while True:
            par = self.before.parent(pos)
            if par is None or self.before.node(par).label != "LogicalOperator":
                return pos
            pos = par


class _Claims:
    def __init__(self):
        self.items: list[tuple[str, int, str]] = []

    def node(self, pos: int, name: str) -> None:
        self.items.append(("node", pos, name))

    def statement(self, pos: int, name: str) -> None:
        self.items.append(("stmt", pos, name))


def _inner_rules(s: _Script, claims: _Claims) -> None:
    for pos, op in s.upd.items():
        label = s.label(pos)
        attrs = s.attrs(pos)
        defs_ok = _def_untouched(attrs) and _def_untouched(attrs, new=True)
        if label == "VariableAccess" and defs_ok:
            claims.node(pos, "Var-RW-Var")
        elif label == "MethodCall" and defs_ok:
            claims.node(pos, "Meth-RW-Meth")
        elif label in ("BinaryOperator", "LogicalOperator"):
            claims.node(pos, "BinOperator-Rep")
        elif label == "Literal":
            claims.node(pos, "Constant-Rep")

    for n1, mov in s.movs.items():
        n2 = mov.parent
        if isinstance(n2, str):
            added = s.adds[n2]
            if added.parent != s.parent(n1):
                continue
            if added.label == "MethodCall" and _def_untouched(added.attrs):
                claims.node(n1, "Wrap-Meth")
            elif added.label == "TernaryOperator":
                cond = s.after_child(n2, 1)
                name = "Wrap-IFELSE-N" if s.contains_null(cond) else "Wrap-IFELSE-O"
                claims.node(n1, name)
        else:
            n3 = s.parent(n1)
            if n3 is None or n3 not in s.dels or n2 != s.parent(n3):
                continue
            if s.label(n3) == "MethodCall" and _def_untouched(s.attrs(n3)):
                claims.node(n1, "Unwrap-Meth")
            elif s.label(n3) == "TernaryOperator":
                claims.node(n3, "Unwrap-IF")

    added_under: dict[NodeRef, list[EditOp]] = {}
    for op in s.adds.values():
        added_under.setdefault(op.parent, []).append(op)
    for n1 in sorted(s.dels):
        label = s.label(n1)
        par = s.parent(n1)
        if label in ("VariableAccess", "MethodCall"):
            want = "MethodCall" if label == "VariableAccess" else "VariableAccess"
            name = "Var-RW-Meth" if label == "VariableAccess" else "Meth-RW-Var"
            for add in added_under.get(par, []):
                if (add.label == want and _def_untouched(s.attrs(n1))
                        and _def_untouched(add.attrs)):
                    claims.node(n1, name)
                    break
        if (par is not None and s.label(par) == "MethodCall" and par not in s.touched
                and par not in s._placed and _def_untouched(s.attrs(par))):
            claims.node(n1, "Meth-RW-Meth")

    for n1, add in s.adds.items():
        if add.label != "LogicalOperator":
            continue
        kids = s.after_kids(n1)
        kept = [k for k in kids if isinstance(k, int) and k not in s.upd and k not in s.dels
                and (k not in s.movs or s.movs[k].parent == n1)]
        fresh = [k for k in kids if isinstance(k, str)
                 and all(isinstance(r, str) for r in s.after_subtree(k))]
        if not kept or not fresh:
            continue
        par = add.parent
        if isinstance(par, int) and s.label(par) == "LogicalOperator":
            target = s.logical_top(par)
        else:
            target = kept[0]
        claims.node(target, "LogExp-Exp")

    for n in sorted(s.dels):
        if s.label(n) != "LogicalOperator":
            continue
        kids = s.before_kids(n)
        kept = [k for k in kids if k not in s.upd and k not in s.dels]
        gone = [k for k in kids if all(r in s.dels for r in s.before_subtree(k))]
        if kept and gone:
            claims.node(s.logical_top(n), "LogExp-Red")


def _statement_rules(s: _Script, claims: _Claims) -> None:
    for n1, add in s.adds.items():
        if add.label == "If":
            null = s.contains_null(s.after_child(n1, 1))
            then_stmts = s.statements(s.after_child(n1, 2), after=True)
            else_stmts = s.statements(s.after_child(n1, 3), after=True)
            o_then, o_else = s.moved(then_stmts), s.moved(else_stmts)
            suffix = "-N" if null else "-O"
            if not else_stmts:
                if o_then:
                    claims.statement(s.first_moved(o_then), "Wrap-IF" + suffix)
            elif then_stmts:
                if o_then and not o_else:
                    claims.statement(s.first_moved(o_then), "Wrap-IFELSE" + suffix)
                elif o_else and not o_then:
                    claims.statement(s.first_moved(o_else), "Wrap-IFELSE" + suffix)
        elif add.label == "Try":
            o_try = s.moved(s.statements(s.after_child(n1, 1), after=True))
            if o_try:
                claims.statement(s.first_moved(o_try), "Wrap-TRY")

    for n in sorted(s.dels):
        if s.label(n) != "If":
            continue
        kids = s.before_kids(n)
        then_c = kids[1] if len(kids) > 1 else None
        else_c = kids[2] if len(kids) > 2 else None
        if s.moved(s.statements(then_c, after=False)) or s.moved(s.statements(else_c, after=False)):
            claims.node(n, "Unwrap-IF")


def extract_transforms(script: EditScript) -> TransformLabeling:
    """Label the before-tree of ``script`` with the transforms its edits realize.

    The returned labeling is over the before-tree with virtual roots
    inserted.  Raises :class:`TransformConflictError` when two rules put
    different transforms on one node.
    """
    s = _Script(script.before, list(script.ops))
    claims = _Claims()
    _inner_rules(s, claims)
    _statement_rules(s, claims)

    tree, mapping = insert_virtual_roots_with_map(script.before)
    labels: dict[int, str] = {}
    for kind, pos, name in claims.items:
        target = mapping[pos]
        if kind == "stmt":
            if tree.node(target).label != VIRTUAL_ROOT:
                par = tree.parent(mapping[s.stmt_root(pos)])
                if par is None or tree.node(par).label != VIRTUAL_ROOT:
                    log.warning("%s: %s target at position %d has no virtual root; dropped",
                                script.source_id, name, pos)
                    continue
                target = par
        prior = labels.get(target)
        if prior is not None and prior != name:
            raise TransformConflictError(target, (prior, name))
        labels[target] = name
    return TransformLabeling(tree, labels)


@dataclass
class LabelingStats:
    counts: dict[str, int]
    single: int
    multiple: int

    def as_rows(self) -> list[tuple[str, int]]:
        rows = [(name, self.counts.get(name, 0)) for name in TRANSFORMS[1:]]
        return rows + [("Single", self.single), ("Multiple", self.multiple)]


def labeling_stats(labelings: Iterable[TransformLabeling]) -> LabelingStats:
    counts: Counter[str] = Counter()
    single = multiple = 0
    for lab in labelings:
        counts.update(lab.labels.values())
        if lab.size == 1:
            single += 1
        elif lab.size > 1:
            multiple += 1
    return LabelingStats(dict(counts), single, multiple)
