"""Ordered labeled trees with pre-order positions and virtual statement roots.

An :class:`Ast` wraps a tree of :class:`Node` objects and numbers them
1..Q in pre-order.  Trees are ingested from a small JSON document format
(nested or flat, see :func:`parse_ast_document`) that carries per-node
semantic attributes in place of a real type analysis.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Iterator

VIRTUAL_ROOT = "VirtualRoot"

LABELS: tuple[str, ...] = (
    "VariableAccess",
    "MethodCall",
    "ConstructorCall",
    "BinaryOperator",
    "LogicalOperator",
    "UnaryOperator",
    "Literal",
    "If",
    "TernaryOperator",
    "Try",
    "Assignment",
    "LocalVariable",
    "Return",
    "Loop",
    "Throw",
    VIRTUAL_ROOT,
    "Statement",
    "Block",
    "Argument",
    "Unknown",
)

# Documented attribute vocabulary.  Unknown attributes are preserved but no
# component reads them.
KNOWN_ATTRS: frozenset[str] = frozenset({
    "statement_root", "statement_kind", "prev_statement_kind",
    "next_statement_kind", "parent_statement_kind", "throws_exception",
    "line", "identifier", "scope_variables", "class_methods",
    "type_kind", "return_kind", "instance_of_enclosing_class",
    "compatible_vars_in_scope", "compatible_param_methods",
    "compatible_return_methods", "params_compatible_with_return",
    "local_unreferenced_before", "local_unassigned_before",
    "field_unreferenced_elsewhere", "field_unassigned_elsewhere",
    "same_type_null_guarded", "same_type_normal_guarded",
    "same_sig_null_guarded", "same_sig_normal_guarded", "same_sig_try_wrapped",
    "arg_var_swap_matches_call", "arg_call_swap_matches_call", "overloads",
    "le_atom_mismatch_elsewhere", "le_unreferenced_var_guarded_elsewhere",
    "le_unreferenced_boolean_in_scope",
    "def_edited", "def_children_edited", "new_def_edited",
    "new_def_children_edited",
})


class AstParseError(ValueError):
    """Raised when a tree document cannot be turned into an :class:`Ast`."""


@dataclass(eq=False)
class Node:
    label: str
    value: str | None = None
    children: list[Node] = field(default_factory=list)
    attrs: dict[str, Any] = field(default_factory=dict)
    position: int = 0

    @property
    def is_terminal(self) -> bool:
        return not self.children

    def walk(self) -> Iterator[Node]:
        """Yield this node and its descendants in pre-order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


class Ast:
    """A tree of nodes numbered 1..Q in pre-order.

    The constructor takes ownership of ``root``: positions are written into
    the nodes in place.  Use :func:`index_preorder` for a fresh copy.
    """

    def __init__(self, root: Node, source_id: str = ""):
        self.root = root
        self.source_id = source_id
        self.nodes: list[Node] = list(root.walk())
        self._parent: dict[int, int | None] = {}
        for pos, node in enumerate(self.nodes, start=1):
            node.position = pos
        self._parent[1] = None
        for node in self.nodes:
            for child in node.children:
                self._parent[child.position] = node.position

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"Ast(source_id={self.source_id!r}, node_count={self.node_count})"

    def node(self, position: int) -> Node:
        if not 1 <= position <= len(self.nodes):
            raise KeyError(f"no node at position {position}")
        return self.nodes[position - 1]

    def parent(self, position: int) -> int | None:
        return self._parent[position]

    def positions(self) -> range:
        return range(1, len(self.nodes) + 1)

    def labels(self) -> list[str]:
        return [n.label for n in self.nodes]

    def signature(self) -> tuple:
        return tree_signature(self.root)

    def copy(self) -> Ast:
        return Ast(copy.deepcopy(self.root), self.source_id)


def tree_signature(node: Node, with_attrs: bool = False) -> tuple:
    """Hashable shape of a subtree; equal signatures mean isomorphic trees."""
    kids = tuple(tree_signature(c, with_attrs) for c in node.children)
    if with_attrs:
        attrs = json.dumps(node.attrs, sort_keys=True)
        return (node.label, node.value, attrs, kids)
    return (node.label, node.value, kids)


def index_preorder(ast: Ast) -> Ast:
    """Return a copy of ``ast`` with positions 1..Q assigned in pre-order."""
    return ast.copy()


def _check_label(label: Any, where: str) -> str:
    if label not in LABELS:
        raise AstParseError(
            f"unknown label {label!r} at {where}; expected one of: "
            + ", ".join(LABELS))
    return label


def _node_from_obj(obj: Any, where: str) -> Node:
    if not isinstance(obj, dict):
        raise AstParseError(f"node at {where} is not an object")
    if "label" not in obj:
        raise AstParseError(f"node at {where} has no 'label'")
    label = _check_label(obj["label"], where)
    value = obj.get("value")
    if value is not None and not isinstance(value, str):
        value = str(value)
    attrs = obj.get("attrs") or {}
    if not isinstance(attrs, dict):
        raise AstParseError(f"'attrs' at {where} is not an object")
    return Node(label, value, [], dict(attrs))


def _parse_nested(obj: dict, where: str = "root") -> Node:
    node = _node_from_obj(obj, where)
    kids = obj.get("children") or []
    if not isinstance(kids, list):
        raise AstParseError(f"'children' at {where} is not a list")
    node.children = [_parse_nested(c, f"{where}.children[{i}]")
                     for i, c in enumerate(kids)]
    return node


def _parse_flat(doc: dict) -> Node:
    items = doc["nodes"]
    if not isinstance(items, list):
        raise AstParseError("'nodes' is not a list")
    by_id: dict[Any, dict] = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "id" not in item:
            raise AstParseError(f"nodes[{i}] lacks an 'id'")
        if item["id"] in by_id:
            raise AstParseError(f"duplicate node id {item['id']!r}")
        by_id[item["id"]] = item
    root_id = doc.get("root", items[0]["id"] if items else None)
    if root_id not in by_id:
        raise AstParseError(f"root id {root_id!r} does not name a node")

    built: dict[Any, Node] = {}
    on_path: set = set()

    def build(node_id: Any) -> Node:
        if node_id in on_path:
            raise AstParseError(f"cycle: node {node_id!r} is its own ancestor")
        if node_id in built:
            raise AstParseError(f"node {node_id!r} has more than one parent")
        if node_id not in by_id:
            raise AstParseError(f"dangling child reference {node_id!r}")
        item = by_id[node_id]
        node = _node_from_obj(item, f"node {node_id!r}")
        on_path.add(node_id)
        node.children = [build(c) for c in item.get("children") or []]
        on_path.discard(node_id)
        built[node_id] = node
        return node

    root = build(root_id)
    if len(built) != len(by_id):
        orphans = sorted(str(k) for k in by_id if k not in built)
        raise AstParseError(f"nodes unreachable from root: {', '.join(orphans)}")
    return root


def ast_from_obj(doc: Any, source_id: str = "") -> Ast:
    """Build an :class:`Ast` from an already-decoded JSON value."""
    if not isinstance(doc, dict):
        raise AstParseError("tree document must be a JSON object")
    source_id = doc.get("source_id", source_id) or source_id
    if "nodes" in doc:
        root = _parse_flat(doc)
    elif "root" in doc and isinstance(doc["root"], dict):
        root = _parse_nested(doc["root"])
    else:
        root = _parse_nested(doc)
    return Ast(root, source_id)


def parse_ast_document(text: str | bytes, source_id: str = "") -> Ast:
    """Parse a tree document.

    Two layouts are accepted.  The nested one is a node object
    ``{"label", "value", "attrs", "children": [...]}``, optionally wrapped as
    ``{"source_id": ..., "root": {...}}``.  The flat one lists nodes with ids,
    ``{"root": id, "nodes": [{"id", "label", "value", "children": [ids]}]}``,
    and is checked for cycles and shared children.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AstParseError(
            f"malformed document at line {exc.lineno}, column {exc.colno} "
            f"(offset {exc.pos}): {exc.msg}") from exc
    return ast_from_obj(doc, source_id)


def node_to_obj(node: Node) -> dict:
    obj: dict[str, Any] = {"label": node.label, "value": node.value}
    if node.attrs:
        obj["attrs"] = node.attrs
    obj["children"] = [node_to_obj(c) for c in node.children]
    return obj


def ast_to_obj(ast: Ast) -> dict:
    return {"source_id": ast.source_id, "root": node_to_obj(ast.root)}


def serialize_ast(ast: Ast) -> str:
    return json.dumps(ast_to_obj(ast), sort_keys=True)


def insert_virtual_roots_with_map(ast: Ast) -> tuple[Ast, dict[int, int]]:
    """Like :func:`insert_virtual_roots`, also returning old -> new positions."""
    root = copy.deepcopy(ast.root)
    originals = list(root.walk())   # same pre-order as ast.nodes
    parents: dict[int, Node | None] = {id(root): None}
    for node in originals:
        for child in node.children:
            parents[id(child)] = node

    new_root = root
    for node in originals:
        if node.attrs.get("statement_root") is not True:
            continue
        parent = parents[id(node)]
        if parent is not None and parent.label == VIRTUAL_ROOT:
            continue
        vr = Node(VIRTUAL_ROOT, None, [node], {})
        if parent is None:
            new_root = vr
        else:
            idx = next(i for i, c in enumerate(parent.children) if c is node)
            parent.children[idx] = vr
        parents[id(vr)] = parent
        parents[id(node)] = vr

    out = Ast(new_root, ast.source_id)
    mapping = {old: node.position for old, node in enumerate(originals, start=1)}
    return out, mapping


def insert_virtual_roots(ast: Ast) -> Ast:
    """Insert a ``VirtualRoot`` above every node flagged ``statement_root``.

    Nodes already sitting under a virtual root are left alone, so the
    operation is idempotent.
    """
    return insert_virtual_roots_with_map(ast)[0]


def statement_of(ast: Ast, position: int) -> int | None:
    """Position of the nearest enclosing ``VirtualRoot`` (or itself)."""
    pos: int | None = position
    while pos is not None:
        if ast.node(pos).label == VIRTUAL_ROOT:
            return pos
        pos = ast.parent(pos)
    return None
