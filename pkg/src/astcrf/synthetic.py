"""Synthetic statement trees with planted characteristic => transform rules.

Each example is one statement (under its virtual root) with random
expression structure and random noise attributes.  Exactly one rule is
planted per example by switching on its trigger attribute, so the ground
truth is known by construction.  With ``noise > 0`` trigger attributes are
also switched on spuriously (no transform follows), so characteristics are
informative but not decisive, as with real commits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .transforms import TransformLabeling
from .trees import VIRTUAL_ROOT, Ast, Node, insert_virtual_roots

STATEMENT_KINDS = ("assignment", "call", "return", "if")
NAMES = ("count", "index", "value", "result", "buffer", "size", "total", "name", "item", "node")
METHODS = ("getValue", "compute", "size", "parse", "update", "toString", "length", "apply")
OPS = ("+", "-", "*", "<", ">", "==", "!=")


@dataclass(frozen=True)
class Rule:
    name: str
    label: str  # label of the node carrying the trigger
    attr: str
    transform: str
    on_statement: bool = False  # transform goes to the enclosing virtual root


RULES: tuple[Rule, ...] = (
    Rule("overloaded-call", "MethodCall", "overloads", "Meth-RW-Meth"),
    Rule("compatible-variable", "VariableAccess", "compatible_vars_in_scope", "Var-RW-Var"),
    Rule("mismatched-condition", "LogicalOperator", "le_atom_mismatch_elsewhere", "LogExp-Exp"),
    Rule("throwing-statement", VIRTUAL_ROOT, "throws_exception", "Wrap-TRY", True),
    Rule("null-guarded-call", "MethodCall", "same_sig_null_guarded", "Wrap-IF-N", True),
    Rule("wrapped-call", "MethodCall", "params_compatible_with_return", "Unwrap-Meth"),
)
# the two-node rule: a statement-level call gets Meth-RW-Meth and its leading
# variable argument Var-RW-Var
JOINT_RULE = Rule("swapped-argument", "MethodCall", "arg_call_swap_matches_call", "Meth-RW-Meth")
JOINT_CHILD_TRANSFORM = "Var-RW-Var"


class _Gen:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def noise(self, label: str) -> dict:
        r = self.rng
        attrs: dict = {}
        if label in ("VariableAccess", "MethodCall"):
            attrs["identifier"] = self.pick(NAMES if label == "VariableAccess" else METHODS)
            attrs["scope_variables"] = list(r.choice(NAMES, size=3, replace=False))
        if label == "VariableAccess":
            attrs["type_kind"] = self.pick(("primitive", "object"))
            attrs["local_unreferenced_before"] = bool(r.random() < 0.2)
            attrs["field_unassigned_elsewhere"] = bool(r.random() < 0.2)
        if label == "MethodCall":
            attrs["return_kind"] = self.pick(("primitive", "object"))
            attrs["compatible_return_methods"] = bool(r.random() < 0.3)
        return attrs

    def node(self, label, value=None, children=()):
        return Node(label, value, list(children), self.noise(label))

    def expr(self, depth: int) -> Node:
        r = self.rng.random()
        if depth <= 0 or r < 0.35:
            if self.rng.random() < 0.6:
                return self.node("VariableAccess", self.pick(NAMES))
            return self.node("Literal", self.pick(("0", "1", "2", "null", "\"s\"")))
        if r < 0.7:
            n_args = int(self.rng.integers(0, 3))
            kids = [self.expr(depth - 1) for _ in range(n_args)]
            if self.rng.random() < 0.5:
                kids.insert(0, self.node("VariableAccess", self.pick(NAMES)))
            return self.node("MethodCall", self.pick(METHODS), kids)
        return self.node("BinaryOperator", self.pick(OPS), [self.expr(depth - 1), self.expr(depth - 1)])

    def condition(self) -> Node:
        atoms = []
        for _ in range(2):
            if self.rng.random() < 0.5:
                atoms.append(self.node("BinaryOperator", self.pick(("==", "!=")),
                                       [self.node("VariableAccess", self.pick(NAMES)),
                                        self.node("Literal", "null")]))
            else:
                atoms.append(self.expr(1))
        return self.node("LogicalOperator", self.pick(("&&", "||")), atoms)

    def statement(self) -> Node:
        kind = self.pick(STATEMENT_KINDS)
        if kind == "assignment":
            root = self.node("Assignment", "=", [self.node("VariableAccess", self.pick(NAMES)),
                                                 self.expr(2)])
        elif kind == "call":
            root = self.expr(2)
            if root.label != "MethodCall":
                root = self.node("MethodCall", self.pick(METHODS), [root])
        elif kind == "return":
            root = self.node("Return", None, [self.expr(2)])
        else:
            root = self.node("If", None, [self.condition(), self.node("Block", None, [])])
        root.attrs.update({
            "statement_root": True,
            "statement_kind": kind,
            "prev_statement_kind": self.pick(STATEMENT_KINDS),
            "next_statement_kind": self.pick(STATEMENT_KINDS),
        })
        return root


def _set_trigger(node: Node, rule: Rule) -> None:
    holder = node.children[0] if rule.label == VIRTUAL_ROOT else node
    holder.attrs[rule.attr] = True


def _plant(gen: _Gen, rule: Rule, joint: bool, noise: float) -> TransformLabeling | None:
    ast = insert_virtual_roots(Ast(gen.statement()))
    cands = [n for n in ast.nodes if n.label == rule.label]
    if joint:
        # the statement's own call, with a variable as first argument
        cands = [n for n in cands if ast.parent(n.position) == 1
                 and n.children and n.children[0].label == "VariableAccess"]
    if not cands:
        return None
    target = gen.pick(cands)
    if noise > 0:
        for other in RULES + (JOINT_RULE,):
            for n in ast.nodes:
                if n.label == other.label and n is not target and gen.rng.random() < noise:
                    _set_trigger(n, other)
    _set_trigger(target, rule)
    pos = target.position
    if rule.on_statement:
        while ast.node(pos).label != VIRTUAL_ROOT:
            pos = ast.parent(pos)
    labels = {pos: rule.transform}
    if joint:
        labels[target.children[0].position] = JOINT_CHILD_TRANSFORM
    return TransformLabeling(ast, labels)


def generate(n_per_rule: int, n_joint: int, seed: int = 0,
             noise: float = 0.0) -> list[TransformLabeling]:
    """``n_per_rule`` examples of each single rule plus ``n_joint`` two-node ones, shuffled.

    ``noise`` is the chance that any other node of a rule's label carries
    that rule's trigger without the transform.
    """
    if not 0 <= noise < 1:
        raise ValueError("noise must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    gen = _Gen(rng)
    jobs: list[tuple[Rule, bool]] = [(r, False) for r in RULES for _ in range(n_per_rule)]
    jobs += [(JOINT_RULE, True)] * n_joint
    order = rng.permutation(len(jobs))
    out = []
    for j in order:
        rule, joint = jobs[j]
        lab = None
        while lab is None:
            lab = _plant(gen, rule, joint, noise)
        out.append(lab)
    for i, lab in enumerate(out):
        lab.ast.source_id = f"synthetic-{seed}-{i}"
    return out


def rule_oracle() -> dict[str, Callable]:
    """Transform name per planted rule, for reporting."""
    return {r.name: r.transform for r in RULES + (JOINT_RULE,)}
