"""Tree edit scripts: UPD / ADD / DEL / MOV over a before-tree.

Node references are before-tree positions (``int``) or fresh ids (``str``)
introduced by ADD.  Child indices are 1-based and refer to the child list of
the *resulting* tree, so application does not depend on op order: every
surviving node that is not moved keeps its parent and fills the slots left
over by explicitly placed children, in its original relative order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Union

from .trees import (LABELS, Ast, AstParseError, Node, ast_from_obj, ast_to_obj,
                    parse_ast_document, tree_signature)

NodeRef = Union[int, str]

KINDS = ("UPD", "ADD", "DEL", "MOV")
_APPLY_ORDER = {"DEL": 0, "MOV": 1, "UPD": 2, "ADD": 3}


class EditScriptError(ValueError):
    """Malformed edit script document or inapplicable edit operation."""


@dataclass(frozen=True)
class EditOp:
    kind: str
    node: NodeRef
    parent: NodeRef | None = None
    index: int | None = None
    new_value: str | None = None
    label: str | None = None
    value: str | None = None
    attrs: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EditScriptError(f"unknown edit kind {self.kind!r}")
        if self.kind == "UPD":
            if self.new_value is None or self.parent is not None or self.index is not None:
                raise EditScriptError("UPD takes new_value and no parent/index")
        elif self.kind == "DEL":
            if self.parent is not None or self.index is not None:
                raise EditScriptError("DEL takes neither parent nor index")
        elif self.kind == "MOV":
            if self.parent is None or self.index is None:
                raise EditScriptError("MOV needs parent and index")
        elif self.kind == "ADD":
            if self.parent is not None and self.index is None:
                raise EditScriptError("ADD with a parent needs an index")
            if self.label is None:
                raise EditScriptError("ADD needs the label of the new node")
        if self.index is not None and self.index < 1:
            raise EditScriptError(f"index must be >= 1, got {self.index}")

    def to_obj(self) -> dict:
        obj: dict[str, Any] = {"kind": self.kind, "node": self.node}
        if self.parent is not None or self.kind == "ADD":
            obj["parent"] = self.parent
        if self.index is not None:
            obj["index"] = self.index
        if self.kind == "UPD":
            obj["new_value"] = self.new_value
        if self.kind == "ADD":
            obj["label"] = self.label
            obj["value"] = self.value
            if self.attrs:
                obj["attrs"] = self.attrs
        return obj


def UPD(node: int, new_value: str) -> EditOp:
    return EditOp("UPD", node, new_value=new_value)


def ADD(node: str, parent: NodeRef | None, index: int | None, label: str,
        value: str | None = None, attrs: dict | None = None) -> EditOp:
    return EditOp("ADD", node, parent, index, label=label, value=value,
                  attrs=dict(attrs or {}))


def DEL(node: int) -> EditOp:
    return EditOp("DEL", node)


def MOV(node: int, parent: NodeRef, index: int) -> EditOp:
    return EditOp("MOV", node, parent, index)


@dataclass
class EditScript:
    before: Ast
    after: Ast | None
    ops: list[EditOp]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.ops)

    def to_obj(self) -> dict:
        return {
            "source_id": self.source_id,
            "before": ast_to_obj(self.before),
            "after": ast_to_obj(self.after) if self.after is not None else None,
            "ops": [op.to_obj() for op in self.ops],
        }


def normalize_ops(ops: Iterable[EditOp]) -> list[EditOp]:
    """Stable reordering DEL -> MOV -> UPD -> ADD."""
    return sorted(ops, key=lambda op: _APPLY_ORDER[op.kind])


def _op_from_obj(obj: Any, i: int) -> EditOp:
    if not isinstance(obj, dict) or "kind" not in obj or "node" not in obj:
        raise EditScriptError(f"op {i}: needs 'kind' and 'node'")
    kind = obj["kind"]
    if kind not in KINDS:
        raise EditScriptError(f"op {i}: unknown kind {kind!r}")
    if kind == "ADD":
        if obj.get("parent") is not None and "index" not in obj:
            raise EditScriptError(f"op {i}: ADD is missing 'index'")
        if obj.get("label") not in LABELS:
            raise EditScriptError(f"op {i}: ADD label {obj.get('label')!r} is not in the label set")
    try:
        return EditOp(kind, obj["node"], obj.get("parent"), obj.get("index"),
                      obj.get("new_value"), obj.get("label"), obj.get("value"),
                      dict(obj.get("attrs") or {}))
    except EditScriptError as exc:
        raise EditScriptError(f"op {i}: {exc}") from None


def _check_refs(ops: list[EditOp], before: Ast) -> None:
    q = before.node_count
    fresh = {op.node for op in ops if op.kind == "ADD"}
    for i, op in enumerate(ops):
        if op.kind == "ADD":
            if not isinstance(op.node, str):
                raise EditScriptError(f"op {i}: ADD must introduce a fresh string id")
        elif not isinstance(op.node, int) or isinstance(op.node, bool) or not 1 <= op.node <= q:
            raise EditScriptError(f"op {i}: dangling node reference {op.node!r}")
        if op.parent is not None:
            ok = (op.parent in fresh if isinstance(op.parent, str)
                  else isinstance(op.parent, int) and 1 <= op.parent <= q)
            if not ok:
                raise EditScriptError(f"op {i}: dangling parent reference {op.parent!r}")


def parse_edit_script(text: str | bytes, before: Ast, after: Ast | None = None) -> EditScript:
    """Parse the ``ops`` of an edit-script document against given trees."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EditScriptError(
            f"malformed edit script at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    ops_obj = doc.get("ops") if isinstance(doc, dict) else doc
    if not isinstance(ops_obj, list):
        raise EditScriptError("edit script needs an 'ops' list")
    ops = [_op_from_obj(o, i) for i, o in enumerate(ops_obj)]
    _check_refs(ops, before)
    source_id = doc.get("source_id", "") if isinstance(doc, dict) else ""
    return EditScript(before, after, ops, source_id or before.source_id)


def _load_tree(ref: Any, base: Path | None) -> Ast | None:
    if ref is None:
        return None
    if isinstance(ref, str):
        path = Path(ref) if base is None else base / ref
        return parse_ast_document(path.read_text(encoding="utf-8"), str(path))
    return ast_from_obj(ref)


def edit_script_from_obj(doc: dict, base: Path | None = None) -> EditScript:
    """Build a script from a document whose before/after are inline or paths."""
    if not isinstance(doc, dict) or "before" not in doc:
        raise EditScriptError("edit script document needs 'before'")
    try:
        before = _load_tree(doc["before"], base)
        after = _load_tree(doc.get("after"), base)
    except AstParseError as exc:
        raise EditScriptError(f"bad tree in edit script: {exc}") from exc
    script = parse_edit_script(json.dumps({"ops": doc.get("ops", [])}), before, after)
    script.source_id = doc.get("source_id") or before.source_id
    return script


def load_edit_script(path: str | Path) -> EditScript:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EditScriptError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    script = edit_script_from_obj(doc, path.parent)
    script.source_id = script.source_id or str(path)
    return script


def count_root_edit_ops(script: EditScript) -> int:
    """Number of ops whose target's parent already exists in the before-tree.

    UPD and DEL act on existing nodes and always count.  ADD and MOV count
    when their destination parent is a before-tree node; an ADD without a
    parent (new root) is counted as well.
    """
    n = 0
    for op in script.ops:
        if op.kind in ("UPD", "DEL"):
            n += 1
        elif op.parent is None or isinstance(op.parent, int):
            n += 1
    return n


def filter_by_root_ops(scripts: Iterable[EditScript], threshold: int = 10) -> list[EditScript]:
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    return [s for s in scripts if count_root_edit_ops(s) <= threshold]


@dataclass
class ResultTree:
    """Resolved outcome of an edit script, keyed by node reference."""

    root: NodeRef
    children: dict[NodeRef, list[NodeRef]]
    parent: dict[NodeRef, NodeRef | None]
    label: dict[NodeRef, str]
    value: dict[NodeRef, str | None]
    attrs: dict[NodeRef, dict]

    def subtree(self, ref: NodeRef) -> list[NodeRef]:
        out, stack = [], [ref]
        while stack:
            r = stack.pop()
            out.append(r)
            stack.extend(reversed(self.children[r]))
        return out

    def to_node(self, ref: NodeRef | None = None) -> Node:
        ref = self.root if ref is None else ref
        return Node(self.label[ref], self.value[ref],
                    [self.to_node(c) for c in self.children[ref]],
                    dict(self.attrs[ref]))


def resolve_edit_script(before: Ast, ops: list[EditOp]) -> ResultTree:
    """Work out the resulting tree of ``ops`` without building nodes."""
    _check_refs(ops, before)
    deleted: set[int] = set()
    placed: dict[NodeRef, tuple[NodeRef | None, int | None]] = {}
    updates: dict[int, str] = {}
    added: dict[str, EditOp] = {}
    for i, op in enumerate(ops):
        if op.kind == "DEL":
            if op.node in deleted or op.node in placed or op.node in updates:
                raise EditScriptError(f"op {i}: node {op.node} is deleted and also edited")
            deleted.add(op.node)
        elif op.kind == "UPD":
            if op.node in deleted:
                raise EditScriptError(f"op {i}: node {op.node} is deleted and also edited")
            if op.node in updates:
                raise EditScriptError(f"op {i}: conflicting UPD on node {op.node}")
            updates[op.node] = op.new_value
        elif op.kind == "MOV":
            if op.node in deleted or op.node in placed:
                raise EditScriptError(f"op {i}: node {op.node} moved twice or deleted")
            placed[op.node] = (op.parent, op.index)
        else:
            if op.node in added:
                raise EditScriptError(f"op {i}: fresh id {op.node!r} added twice")
            added[op.node] = op
            placed[op.node] = (op.parent, op.index)

    alive: list[NodeRef] = [p for p in before.positions() if p not in deleted]
    alive += list(added)
    alive_set = set(alive)
    parent: dict[NodeRef, NodeRef | None] = {}
    for ref in alive:
        if ref in placed:
            parent[ref] = placed[ref][0]
        else:
            parent[ref] = before.parent(ref)
        par = parent[ref]
        if par is not None and par not in alive_set:
            if isinstance(par, int) and par in deleted:
                raise EditScriptError(
                    f"DEL on non-leaf: node {par} still has child {ref!r}")
            raise EditScriptError(f"node {ref!r} placed under missing parent {par!r}")

    roots = [r for r in alive if parent[r] is None]
    if len(roots) != 1:
        raise EditScriptError(f"edit script yields {len(roots)} roots: {roots}")

    explicit: dict[NodeRef, dict[int, NodeRef]] = {r: {} for r in alive}
    implicit: dict[NodeRef, list[NodeRef]] = {r: [] for r in alive}
    for ref in alive:
        par = parent[ref]
        if par is None:
            continue
        if ref in placed:
            idx = placed[ref][1]
            if idx in explicit[par]:
                raise EditScriptError(
                    f"invalid index: slot {idx} of {par!r} claimed twice")
            explicit[par][idx] = ref
        else:
            implicit[par].append(ref)
    children: dict[NodeRef, list[NodeRef]] = {}
    for ref in alive:
        slots = explicit[ref]
        size = len(slots) + len(implicit[ref])
        bad = [i for i in slots if i > size]
        if bad:
            raise EditScriptError(
                f"invalid index {bad[0]} under {ref!r} with {size} children")
        fill = iter(implicit[ref])
        children[ref] = [slots[i] if i in slots else next(fill) for i in range(1, size + 1)]

    seen: set = set()
    stack = [roots[0]]
    while stack:
        r = stack.pop()
        if r in seen:
            raise EditScriptError(f"cycle through node {r!r}")
        seen.add(r)
        stack.extend(children[r])
    if len(seen) != len(alive):
        raise EditScriptError("edit script moves a subtree under itself")

    label, value, attrs = {}, {}, {}
    for ref in alive:
        if isinstance(ref, str):
            op = added[ref]
            label[ref], value[ref], attrs[ref] = op.label, op.value, op.attrs
        else:
            node = before.node(ref)
            label[ref] = node.label
            value[ref] = updates.get(ref, node.value)
            attrs[ref] = node.attrs
    return ResultTree(roots[0], children, parent, label, value, attrs)


def apply_edit_script(before: Ast, ops: list[EditOp]) -> Ast:
    """Apply ``ops`` to ``before`` and return the resulting tree."""
    return Ast(resolve_edit_script(before, list(ops)).to_node(), before.source_id)


def is_isomorphic(a: Ast, b: Ast) -> bool:
    return tree_signature(a.root) == tree_signature(b.root)


def verify_edit_script(script: EditScript) -> bool:
    """True when applying the ops to ``before`` reproduces ``after``."""
    if script.after is None:
        raise EditScriptError("script has no after-tree to verify against")
    return is_isomorphic(apply_edit_script(script.before, script.ops), script.after)


def _matchable(b: Node, a: Node) -> bool:
    # UPD cannot clear a value, so such pairs are replaced instead
    return b.label == a.label and not (a.value is None and b.value is not None)


def _align(bkids: list[Node], akids: list[Node]) -> list[tuple[int, int]]:
    """Order-preserving alignment of two child lists on equal labels.

    Pairs with equal values score higher so that unchanged siblings are
    preferred over mere label matches.
    """
    n, m = len(bkids), len(akids)
    best = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            opt = max(best[i + 1][j], best[i][j + 1])
            if _matchable(bkids[i], akids[j]):
                gain = 3 if bkids[i].value == akids[j].value else 2
                opt = max(opt, gain + best[i + 1][j + 1])
            best[i][j] = opt
    pairs, i, j = [], 0, 0
    while i < n and j < m:
        if _matchable(bkids[i], akids[j]):
            gain = 3 if bkids[i].value == akids[j].value else 2
            if best[i][j] == gain + best[i + 1][j + 1]:
                pairs.append((i, j))
                i, j = i + 1, j + 1
                continue
        if best[i][j] == best[i + 1][j]:
            i += 1
        else:
            j += 1
    return pairs


def diff_naive(before: Ast, after: Ast) -> EditScript:
    """Top-down, label-aligned differ emitting UPD/ADD/DEL (never MOV)."""
    ops: list[EditOp] = []
    counter = 0

    def add_subtree(node: Node, parent: NodeRef | None, index: int | None) -> None:
        nonlocal counter
        counter += 1
        fid = f"n{counter}"
        ops.append(ADD(fid, parent, index, node.label, node.value, node.attrs))
        for i, child in enumerate(node.children, start=1):
            add_subtree(child, fid, i)

    def del_subtree(node: Node) -> None:
        for child in node.children:
            del_subtree(child)
        ops.append(DEL(node.position))

    def match(b: Node, a: Node) -> None:
        if b.value != a.value:
            ops.append(UPD(b.position, a.value))
        pairs = _align(b.children, a.children)
        bm = {i for i, _ in pairs}
        am = {j for _, j in pairs}
        for i, child in enumerate(b.children):
            if i not in bm:
                del_subtree(child)
        for j, child in enumerate(a.children):
            if j not in am:
                add_subtree(child, b.position, j + 1)
        for i, j in pairs:
            match(b.children[i], a.children[j])

    if _matchable(before.root, after.root):
        match(before.root, after.root)
    else:
        del_subtree(before.root)
        add_subtree(after.root, None, None)
    return EditScript(before, after, normalize_ops(ops), before.source_id)
