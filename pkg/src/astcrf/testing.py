"""Random trees and models for exhaustive-enumeration checks."""

from __future__ import annotations

import numpy as np

from .features import build_vocabulary
from .model import AdmissibleSets, Model, build_admissible_sets
from .transforms import EMPTY, TRANSFORMS, TransformLabeling
from .trees import Ast, Node

RANDOM_LABELS = ("VariableAccess", "MethodCall", "BinaryOperator", "Literal", "LogicalOperator")
_BOOL_ATTRS = ("overloads", "local_unreferenced_before", "same_sig_null_guarded",
               "compatible_vars_in_scope", "arg_var_swap_matches_call")


def random_tree(rng: np.random.Generator, n_nodes: int, labels=RANDOM_LABELS) -> Ast:
    """Random recursive tree: node i hangs under a uniformly chosen earlier node."""
    nodes = []
    for i in range(n_nodes):
        attrs = {a: bool(rng.random() < 0.5) for a in _BOOL_ATTRS}
        attrs["type_kind"] = str(rng.choice(["primitive", "object"]))
        nodes.append(Node(str(rng.choice(labels)), str(rng.choice(["a", "b", "+", "null"])),
                          [], attrs))
        if i:
            nodes[int(rng.integers(i))].children.append(nodes[i])
    return Ast(nodes[0], f"random-{n_nodes}")


def random_labeling(rng: np.random.Generator, ast: Ast, transforms, p_empty=0.5):
    labels = {}
    for pos in ast.positions():
        if rng.random() >= p_empty:
            labels[pos] = str(rng.choice(transforms))
    return TransformLabeling(ast, labels)


def _thin(rng, sets: dict, keep: float) -> dict:
    out = {}
    for key, ts in sets.items():
        kept = {t for t in ts if all(x == EMPTY for x in t) or rng.random() < keep}
        out[key] = frozenset(kept)
    return out


def random_model(rng: np.random.Generator, n_transforms: int = 4, n_train: int = 12,
                 max_nodes: int = 8, keep: float = 0.7, weight_scale: float = 2.0) -> Model:
    """Model whose vocabulary comes from random labelings over ``n_transforms`` names.

    The transform set always contains EMPTY.  Admissible edge and triangle
    sets are randomly thinned so constraints actually bite; node sets are
    left intact.  Weights are uniform on [-weight_scale, weight_scale].
    """
    pool = list(TRANSFORMS[1:])
    chosen = [str(t) for t in rng.choice(pool, size=n_transforms - 1, replace=False)]
    data = [random_labeling(rng, random_tree(rng, int(rng.integers(1, max_nodes + 1))), chosen)
            for _ in range(n_train)]
    vocab = build_vocabulary(data)
    adm = build_admissible_sets(data)
    adm = AdmissibleSets(adm.node, _thin(rng, adm.edge, keep), _thin(rng, adm.triangle, keep))
    weights = rng.uniform(-weight_scale, weight_scale, size=len(vocab))
    return Model(vocab, weights, adm)
