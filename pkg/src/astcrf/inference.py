"""Clique graph, junction tree and exact constrained inference.

The transform graph of an AST connects parent/child and adjacent-sibling
positions.  Its maximal cliques are the triangles (parent, c_i, c_{i+1}),
plus a parent/child edge for single-child families, so a junction tree is
obtained by chaining each family's triangles and hanging every child's
family off the first clique that contains the child.

Sum-product runs batched over many trees at once: every maximal clique is a
dense ``D x D x D`` log-table (D the largest domain in the batch; unused
axes and padded domain slots hold ``-inf``) and messages are passed level by
level through the junction trees of all trees simultaneously.  The k-best
max-product pass is per tree.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .features import activate_features, characteristics
from .model import Model
from .transforms import EMPTY, ORDINAL, TransformLabeling
from .trees import Ast

TIE_TOL = 1e-9
MAX_BRUTE_FORCE = 10 ** 7


class InferenceError(RuntimeError):
    """No admissible assignment exists, or an instance is out of bounds."""


class CliqueKind(str, Enum):
    NODE = "NODE"
    EDGE = "EDGE"
    TRIANGLE = "TRIANGLE"


@dataclass(frozen=True)
class Clique:
    kind: CliqueKind
    members: tuple[int, ...]
    relation: str | None = None  # "PC" or "IS" for edges

    def __repr__(self) -> str:
        rel = f", {self.relation}" if self.relation else ""
        return f"Clique({self.kind.value}, {self.members}{rel})"


def build_clique_graph(ast: Ast) -> list[Clique]:
    """Node cliques, parent-child and sibling edges, and sibling triangles."""
    nodes = [Clique(CliqueKind.NODE, (p,)) for p in ast.positions()]
    edges, triangles = [], []
    for node in ast.nodes:
        kids = [c.position for c in node.children]
        for c in kids:
            edges.append(Clique(CliqueKind.EDGE, (node.position, c), "PC"))
        for a, b in zip(kids, kids[1:]):
            edges.append(Clique(CliqueKind.EDGE, (a, b), "IS"))
            triangles.append(Clique(CliqueKind.TRIANGLE, (node.position, a, b)))
    edges.sort(key=lambda c: c.members)
    return nodes + edges + triangles


@dataclass
class JunctionTree:
    """Maximal cliques with a parent pointer and separator for each non-root."""

    cliques: list[tuple[int, ...]]
    parent: list[int | None]
    separators: list[tuple[int, ...]]

    @property
    def edges(self) -> list[tuple[int, int, tuple[int, ...]]]:
        return [(p, i, self.separators[i]) for i, p in enumerate(self.parent) if p is not None]

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.cliques]
        for i, p in enumerate(self.parent):
            if p is not None:
                out[p].append(i)
        return out

    def depths(self) -> list[int]:
        depth = [0] * len(self.cliques)
        for i, p in enumerate(self.parent):  # parents precede children
            if p is not None:
                depth[i] = depth[p] + 1
        return depth

    def verify(self) -> None:
        """Check tree shape, separators and the running intersection property."""
        for i, p in enumerate(self.parent):
            if p is None:
                if i != 0:
                    raise AssertionError(f"clique {i} is a second root")
                continue
            if not p < i:
                raise AssertionError(f"clique {i} precedes its parent {p}")
            shared = tuple(sorted(set(self.cliques[i]) & set(self.cliques[p])))
            if shared != self.separators[i]:
                raise AssertionError(f"separator of clique {i} is not the intersection")
        holders: dict[int, int] = defaultdict(int)
        links: dict[int, int] = defaultdict(int)
        for c in self.cliques:
            for x in c:
                holders[x] += 1
        for _, _, sep in self.edges:
            for x in sep:
                links[x] += 1
        for x, n in holders.items():
            if n - links[x] != 1:
                raise AssertionError(f"running intersection fails for position {x}")


def build_junction_tree(cliques: Sequence[Clique]) -> JunctionTree:
    positions = sorted(c.members[0] for c in cliques if c.kind == CliqueKind.NODE)
    kids: dict[int, list[int]] = defaultdict(list)
    is_child = set()
    for c in cliques:
        if c.kind == CliqueKind.EDGE and c.relation == "PC":
            kids[c.members[0]].append(c.members[1])
            is_child.add(c.members[1])
    roots = [p for p in positions if p not in is_child]
    if len(roots) != 1:
        raise InferenceError(f"clique graph has {len(roots)} roots")
    root = roots[0]

    members: list[tuple[int, ...]] = []
    parent: list[int | None] = []
    seps: list[tuple[int, ...]] = []
    first: dict[int, int] = {}
    if not kids:
        members, parent, seps = [(root,)], [None], [()]
    for p in positions:
        ch = sorted(kids.get(p, ()))
        if not ch:
            continue
        fam = [(p, ch[0])] if len(ch) == 1 else [(p, a, b) for a, b in zip(ch, ch[1:])]
        for j, cl in enumerate(fam):
            idx = len(members)
            members.append(cl)
            if j > 0:
                parent.append(idx - 1)
                seps.append((p, ch[j]))
            elif p == root:
                parent.append(None)
                seps.append(())
            else:
                parent.append(first[p])
                seps.append((p,))
            for x in cl:
                first.setdefault(x, idx)
    jt = JunctionTree(members, parent, seps)
    jt.verify()
    return jt


def home_clique(jt: JunctionTree, clique: Clique) -> tuple[int, tuple[int, ...]]:
    """First maximal clique holding ``clique`` and the axes its members occupy."""
    want = set(clique.members)
    for i, mc in enumerate(jt.cliques):
        if want <= set(mc):
            return i, tuple(mc.index(m) for m in clique.members)
    raise InferenceError(f"{clique} is in no maximal clique")


# --------------------------------------------------------------------------
# compilation


def node_domains(ast: Ast, model: Model) -> list[tuple[str, ...]]:
    """Admissible transforms per position (index 0 unused)."""
    out: list[tuple[str, ...]] = [()]
    unseen = set()
    for node in ast.nodes:
        dom = model.admissible.node_domain(node.label)
        if dom is None:
            unseen.add(node.label)
            dom = (EMPTY,)
        out.append(dom)
    if unseen:
        warnings.warn(f"labels unseen in training predict EMPTY only: {', '.join(sorted(unseen))}",
                      stacklevel=3)
    return out


def clique_violates(model: Model, ast: Ast, clique: Clique, assignment: Sequence[str]) -> bool:
    adm = model.admissible
    labels = [ast.node(p).label for p in clique.members]
    if clique.kind == CliqueKind.NODE:
        return adm.node_violates(labels[0], assignment[0])
    if clique.kind == CliqueKind.EDGE:
        return clique.relation == "PC" and adm.edge_violates(*labels, *assignment)
    return adm.triangle_violates(*labels, *assignment)


@dataclass
class _Instance:
    ast: Ast
    domains: list[tuple[str, ...]]
    cliques: list[Clique]
    jt: JunctionTree
    row0: int
    homes: list[tuple[int, tuple[int, ...]]]
    local: list[int]  # offset of each clique's local table in its arity block


_AXIS_VIEW = {
    (0,): (slice(None), slice(None), None, None),
    (1,): (slice(None), None, slice(None), None),
    (2,): (slice(None), None, None, slice(None)),
    (0, 1): (slice(None), slice(None), slice(None), None),
    (0, 2): (slice(None), slice(None), None, slice(None)),
    (1, 2): (slice(None), None, slice(None), slice(None)),
    (0, 1, 2): (slice(None), slice(None), slice(None), slice(None)),
}
_SUM_OTHER = {
    (0,): (2, 3), (1,): (1, 3), (2,): (1, 2),
    (0, 1): (3,), (0, 2): (2,), (1, 2): (1,),
}


def _lse(x: np.ndarray, axis) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


class CompiledBatch:
    """Many trees compiled against one model for batched sum-product.

    Feature activations of every clique assignment are stored as a sparse
    (feature id, table cell) list, so potentials for new weights cost one
    ``bincount`` and expected feature counts one more.
    """

    def __init__(self, asts: Sequence[Ast], model: Model,
                 gold: Sequence[TransformLabeling] | None = None):
        self.model = model
        self.n_examples = len(asts)
        doms = [node_domains(a, model) for a in asts]
        self.D = max([1] + [len(d) for ds in doms for d in ds[1:]])
        D = self.D
        arity_size = {1: D, 2: D * D, 3: D * D * D}

        self.instances: list[_Instance] = []
        row_members: list[tuple[int, int, int]] = []
        row_sizes: list[tuple[int, int, int]] = []
        row_example: list[int] = []
        row_depth: list[int] = []
        row_parent: list[int] = []
        row_sep: list[tuple[int, ...]] = []
        counts = {1: 0, 2: 0, 3: 0}
        groups: dict[tuple[int, ...], tuple[list, list]] = defaultdict(lambda: ([], []))
        feats: list[int] = []
        cells: list[list[int]] = []  # per arity block, global cell ids after offsets
        cell_arity: list[int] = []
        mask_cells: list[tuple[int, int]] = []
        gold_cells: list[tuple[int, int, int]] = []  # (arity, cell, example)
        self._cached_chars = []

        for e, ast in enumerate(asts):
            dom = doms[e]
            cliques = build_clique_graph(ast)
            jt = build_junction_tree(cliques)
            row0 = len(row_members)
            depths = jt.depths()
            for i, mc in enumerate(jt.cliques):
                padded = tuple(mc) + (0,) * (3 - len(mc))
                row_members.append(padded)
                row_sizes.append(tuple(len(dom[m]) if m else 1 for m in padded))
                row_example.append(e)
                row_depth.append(depths[i])
                p = jt.parent[i]
                row_parent.append(-1 if p is None else row0 + p)
                row_sep.append(tuple(mc.index(x) for x in jt.separators[i]) if p is not None else ())
            vec = characteristics(ast)
            homes, local = [], []
            gidx = None
            if gold is not None:
                lab = gold[e]
                gidx = {p: dom[p].index(lab[p]) if lab[p] in dom[p] else -1
                        for p in ast.positions()}
            for cl in cliques:
                home, axes = home_clique(jt, cl)
                arity = len(cl.members)
                homes.append((row0 + home, axes))
                off = counts[arity] * arity_size[arity]
                local.append(off)
                groups[axes][0].append(row0 + home)
                groups[axes][1].append(counts[arity])
                counts[arity] += 1
                strides = [D ** (arity - 1 - j) for j in range(arity)]
                ranges = [range(len(dom[m])) for m in cl.members]
                for idx in itertools.product(*ranges):
                    assign = tuple(dom[m][i] for m, i in zip(cl.members, idx))
                    cell = off + sum(i * s for i, s in zip(idx, strides))
                    if clique_violates(model, ast, cl, assign):
                        mask_cells.append((arity, cell))
                        continue
                    for f, v in activate_features(cl, assign, vec, model.vocab, ast).items():
                        for _ in range(int(v)):
                            feats.append(f)
                            cells.append(cell)
                            cell_arity.append(arity)
                if gidx is not None:
                    gi = [gidx[m] for m in cl.members]
                    if min(gi) < 0:
                        raise InferenceError(f"example {e}: gold labeling outside admissible domain")
                    gold_cells.append((arity, off + sum(i * s for i, s in zip(gi, strides)), e))
            self.instances.append(_Instance(ast, dom, cliques, jt, row0, homes, local))

        # flat local layout: [nodes | edges | triangles]
        self.n_local = dict(counts)
        self.block_off = {1: 0, 2: counts[1] * D, 3: counts[1] * D + counts[2] * D * D}
        self.n_flat = self.block_off[3] + counts[3] * D ** 3
        to_flat = lambda a, c: self.block_off[a] + c  # noqa: E731
        self.feats = np.asarray(feats, dtype=np.int64)
        self.cells = np.asarray([to_flat(a, c) for a, c in zip(cell_arity, cells)], dtype=np.int64)
        self.local_mask = np.zeros(self.n_flat)
        for a, c in mask_cells:
            self.local_mask[to_flat(a, c)] = -np.inf
        self.gold_flat = np.asarray([to_flat(a, c) for a, c, _ in gold_cells], dtype=np.int64)
        self.gold_example = np.asarray([e for *_, e in gold_cells], dtype=np.int64)

        M = len(row_members)
        self.M = M
        self.row_example = np.asarray(row_example, dtype=np.int64)
        self.row_members = row_members
        sizes = np.asarray(row_sizes)
        ar = np.arange(D)
        ok = ((ar[None, :, None, None] < sizes[:, 0, None, None, None])
              & (ar[None, None, :, None] < sizes[:, 1, None, None, None])
              & (ar[None, None, None, :] < sizes[:, 2, None, None, None]))
        self.base = np.where(ok, 0.0, -np.inf)
        self.groups = {axes: (np.asarray(r, dtype=np.int64), np.asarray(i, dtype=np.int64))
                       for axes, (r, i) in groups.items()}
        self.roots = np.asarray([inst.row0 for inst in self.instances], dtype=np.int64)

        # message schedule: per depth, senders grouped by separator type
        self.max_depth = max(row_depth) if row_depth else 0
        sched: dict[int, dict[str, tuple[list, list]]] = defaultdict(lambda: defaultdict(lambda: ([], [])))
        for r in range(M):
            if row_parent[r] < 0:
                continue
            sep_s = row_sep[r]
            sep_r = tuple(self.row_members[row_parent[r]].index(self.row_members[r][a]) for a in sep_s)
            if sep_s == (0, 1) and sep_r == (0, 2):
                kind = "chain"
            elif sep_s == (0,) and sep_r in ((1,), (2,)):
                kind = f"link{sep_r[0]}"
            else:
                raise InferenceError(f"unexpected separator layout {sep_s} -> {sep_r}")
            sched[row_depth[r]][kind][0].append(r)
            sched[row_depth[r]][kind][1].append(row_parent[r])
        self.schedule = {d: {k: (np.asarray(s), np.asarray(t)) for k, (s, t) in g.items()}
                         for d, g in sched.items()}

    # ---------------------------------------------------------------- potentials

    def local_potentials(self, weights: np.ndarray) -> np.ndarray:
        pot = np.bincount(self.cells, weights=np.asarray(weights)[self.feats], minlength=self.n_flat)
        return pot + self.local_mask

    def _blocks(self, flat: np.ndarray):
        D = self.D
        b = self.block_off
        return {1: flat[:b[2]].reshape(-1, D),
                2: flat[b[2]:b[3]].reshape(-1, D, D),
                3: flat[b[3]:].reshape(-1, D, D, D)}

    def clique_potentials(self, weights: np.ndarray) -> np.ndarray:
        """Log-potential tables of all maximal cliques, shape (M, D, D, D)."""
        blocks = self._blocks(self.local_potentials(weights))
        pot = self.base.copy()
        for axes, (rows, idx) in self.groups.items():
            pot[rows] += blocks[len(axes)][idx][_AXIS_VIEW[axes]]
        return pot

    # ---------------------------------------------------------------- sum-product

    def sum_product(self, pot: np.ndarray):
        """Calibrated log-beliefs of every maximal clique and logZ per tree."""
        bel = pot.copy()
        up: dict[tuple[int, str], np.ndarray] = {}
        for d in range(self.max_depth, 0, -1):
            for kind, (s, r) in self.schedule.get(d, {}).items():
                if kind == "chain":
                    m = _lse(bel[s], 3)
                    bel[r] += m[:, :, None, :]
                else:
                    m = _lse(bel[s], (2, 3))
                    bel[r] += m[:, None, :, None] if kind == "link1" else m[:, None, None, :]
                up[d, kind] = m
        log_z = _lse(bel[self.roots], (1, 2, 3))
        bad = np.flatnonzero(~np.isfinite(log_z))
        if bad.size:
            raise InferenceError(f"example {int(bad[0])} has no admissible assignment")
        with np.errstate(invalid="ignore"):
            for d in range(1, self.max_depth + 1):
                for kind, (s, r) in self.schedule.get(d, {}).items():
                    m = up[d, kind]
                    if kind == "chain":
                        rest = bel[r] - m[:, :, None, :]
                        rest[np.isnan(rest)] = -np.inf
                        bel[s] += _lse(rest, 2)[:, :, :, None]
                    elif kind == "link1":
                        rest = bel[r] - m[:, None, :, None]
                        rest[np.isnan(rest)] = -np.inf
                        bel[s] += _lse(rest, (1, 3))[:, :, None, None]
                    else:
                        rest = bel[r] - m[:, None, None, :]
                        rest[np.isnan(rest)] = -np.inf
                        bel[s] += _lse(rest, (1, 2))[:, :, None, None]
        return bel, log_z

    def clique_marginals(self, bel: np.ndarray, log_z: np.ndarray) -> np.ndarray:
        return np.exp(bel - log_z[self.row_example][:, None, None, None])

    def local_marginals(self, probs: np.ndarray) -> np.ndarray:
        """Marginals of every clique of the transform graph, in the local layout."""
        D = self.D
        out = {1: np.zeros((self.n_local[1], D)), 2: np.zeros((self.n_local[2], D, D)),
               3: np.zeros((self.n_local[3], D, D, D))}
        for axes, (rows, idx) in self.groups.items():
            sel = probs[rows]
            out[len(axes)][idx] = sel if len(axes) == 3 else sel.sum(axis=_SUM_OTHER[axes])
        return np.concatenate([out[1].ravel(), out[2].ravel(), out[3].ravel()])

    def expected_counts(self, local_probs: np.ndarray) -> np.ndarray:
        return np.bincount(self.feats, weights=local_probs[self.cells],
                           minlength=self.model.n_features)

    def gold_scores(self, local_pot: np.ndarray) -> np.ndarray:
        return np.bincount(self.gold_example, weights=local_pot[self.gold_flat],
                           minlength=self.n_examples)

    def observed_counts(self, example_weights: np.ndarray) -> np.ndarray:
        gold = np.zeros(self.n_flat)
        np.add.at(gold, self.gold_flat, np.asarray(example_weights)[self.gold_example])
        return np.bincount(self.feats, weights=gold[self.cells], minlength=self.model.n_features)


# --------------------------------------------------------------------------
# single-tree queries


def compile_instance(ast: Ast, model: Model) -> CompiledBatch:
    return CompiledBatch([ast], model)


def _as_names(ast: Ast, labeling) -> tuple[str, ...]:
    if isinstance(labeling, TransformLabeling):
        return tuple(labeling[p] for p in ast.positions())
    if isinstance(labeling, Mapping):
        return tuple(labeling.get(p, EMPTY) for p in ast.positions())
    names = tuple(labeling)
    if len(names) != ast.node_count:
        raise ValueError("labeling must cover every position")
    return names


def score_assignment(ast: Ast, labeling, model: Model) -> float:
    """Unnormalized log-score; ``-inf`` if any clique assignment is inadmissible.

    Feature weights are summed with ``math.fsum`` so the value does not
    depend on summation order.
    """
    names = _as_names(ast, labeling)
    vec = characteristics(ast)
    terms = []
    for cl in build_clique_graph(ast):
        assign = tuple(names[m - 1] for m in cl.members)
        if clique_violates(model, ast, cl, assign):
            return -math.inf
        for f, v in activate_features(cl, assign, vec, model.vocab, ast).items():
            terms.append(v * model.weights[f])
    return math.fsum(terms)


def log_partition_and_marginals(ast: Ast, model: Model):
    """``(logZ, {clique: {assignment: probability}})`` over the transform graph."""
    batch = compile_instance(ast, model)
    bel, log_z = batch.sum_product(batch.clique_potentials(model.weights))
    probs = batch.clique_marginals(bel, log_z)
    inst = batch.instances[0]
    out = {}
    for cl, (row, axes) in zip(inst.cliques, inst.homes):
        table = probs[row]
        other = tuple(a for a in range(3) if a not in axes)
        table = table.sum(axis=other) if other else table
        dist = {}
        for idx in itertools.product(*[range(len(inst.domains[m])) for m in cl.members]):
            dist[tuple(inst.domains[m][i] for m, i in zip(cl.members, idx))] = float(table[idx])
        out[cl] = dist
    return float(log_z[0]), out


def _compare(a, b) -> int:
    """Score descending (ties within TIE_TOL), then ordinals by position."""
    sa, sb = a[0], b[0]
    if abs(sa - sb) > TIE_TOL * max(1.0, abs(sa), abs(sb)):
        return -1 if sa > sb else 1
    return (a[1] > b[1]) - (a[1] < b[1])


_rank_key = functools.cmp_to_key(_compare)


def _kbest(batch: CompiledBatch, pot: np.ndarray, k: int) -> list[tuple[float, tuple[int, ...]]]:
    """k best (score, ordinal vector) pairs by k-best max-product on the junction tree."""
    inst = batch.instances[0]
    Q = inst.ast.node_count
    jt = inst.jt
    kids = jt.children()
    order = sorted(range(len(jt.cliques)), key=lambda i: -jt.depths()[i])
    msgs: dict[int, dict[tuple, list]] = {}
    ords = [[ORDINAL[t] for t in d] for d in inst.domains]
    result = []
    for c in order:
        members = jt.cliques[c]
        table = pot[inst.row0 + c]
        sizes = [len(inst.domains[m]) for m in members]
        sep = jt.separators[c]
        out: dict[tuple, list] = defaultdict(list)
        for idx in itertools.product(*[range(s) for s in sizes]):
            cell = tuple(idx) + (0,) * (3 - len(idx))
            s0 = float(table[cell])
            if s0 == -math.inf:
                continue
            vec = [-1] * (Q + 1)
            for m, i in zip(members, idx):
                vec[m] = ords[m][i]
            cur = [(s0, tuple(vec))]
            val = dict(zip(members, idx))
            for ch in kids[c]:
                key = tuple(val[x] for x in jt.separators[ch])
                lst = msgs[ch].get(key)
                if not lst:
                    cur = []
                    break
                cur = sorted(((s1 + s2, tuple(max(x, y) for x, y in zip(v1, v2)))
                              for s1, v1 in cur for s2, v2 in lst), key=_rank_key)[:k]
            if not cur:
                continue
            out[tuple(val[x] for x in sep)].extend(cur)
        for key in out:
            out[key] = sorted(out[key], key=_rank_key)[:k]
        if jt.parent[c] is None:
            result = out.get((), [])
        else:
            msgs[c] = out
    return [(s, v[1:]) for s, v in result]


_NAMES_BY_ORDINAL = {i: n for n, i in ORDINAL.items()}


def top_k(ast: Ast, model: Model, k: int = 3) -> list[tuple[TransformLabeling, float]]:
    """The k most probable admissible labelings with their probabilities."""
    if k < 1:
        raise ValueError("k must be at least 1")
    batch = compile_instance(ast, model)
    pot = batch.clique_potentials(model.weights)
    _, log_z = batch.sum_product(pot)
    ranked = []
    for _, vec in _kbest(batch, pot, k):
        names = tuple(_NAMES_BY_ORDINAL[o] for o in vec)
        ranked.append((score_assignment(ast, names, model), vec, names))
    ranked.sort(key=_rank_key)
    out = []
    for score, _, names in ranked:
        lab = TransformLabeling(ast, {p: t for p, t in enumerate(names, start=1)})
        out.append((lab, math.exp(score - float(log_z[0]))))
    return out


def map_assignment(ast: Ast, model: Model) -> TransformLabeling:
    return top_k(ast, model, 1)[0][0]


# --------------------------------------------------------------------------
# exhaustive oracle


@dataclass
class BruteForceResult:
    log_z: float
    ranked: list[tuple[tuple[str, ...], float, float]]  # (names, score, probability)
    marginals: dict = field(default_factory=dict)


def brute_force_inference(ast: Ast, model: Model, limit: int | None = None,
                          max_assignments: int = MAX_BRUTE_FORCE) -> BruteForceResult:
    """Enumerate every labeling over the model's transform set.

    Admissibility is checked clique by clique with the violation predicates;
    nothing is shared with the junction-tree code beyond feature activation.
    """
    T = model.admissible.transform_set()
    Q = ast.node_count
    n = len(T) ** Q
    if n > max_assignments:
        raise InferenceError(f"{n} assignments exceed the brute-force limit {max_assignments}")
    grid = np.indices((len(T),) * Q, dtype=np.int8).reshape(Q, -1).T
    scores = np.zeros(len(grid))
    valid = np.ones(len(grid), dtype=bool)
    vec = characteristics(ast)
    cliques = build_clique_graph(ast)
    local_index = []
    for cl in cliques:
        ar = len(cl.members)
        table = np.zeros(len(T) ** ar)
        bad = np.zeros(len(T) ** ar, dtype=bool)
        for j, assign in enumerate(itertools.product(T, repeat=ar)):
            if clique_violates(model, ast, cl, assign):
                bad[j] = True
            else:
                feats = activate_features(cl, assign, vec, model.vocab, ast)
                table[j] = math.fsum(v * model.weights[f] for f, v in feats.items())
        cols = grid[:, [m - 1 for m in cl.members]].astype(np.int64)
        idx = np.ravel_multi_index(cols.T, (len(T),) * ar)
        local_index.append(idx)
        scores += table[idx]
        valid &= ~bad[idx]
    if not valid.any():
        raise InferenceError("no admissible assignment")
    s = scores[valid]
    top = s.max()
    log_z = float(top + np.log(np.sum(np.exp(s - top))))
    p = np.zeros(len(grid))
    p[valid] = np.exp(s - log_z)
    marginals = {}
    for cl, idx in zip(cliques, local_index):
        ar = len(cl.members)
        m = np.bincount(idx, weights=p, minlength=len(T) ** ar)
        marginals[cl] = {a: float(m[j]) for j, a in enumerate(itertools.product(T, repeat=ar))}

    rows = np.flatnonzero(valid)
    if limit is not None and limit < len(rows):
        kth = np.partition(-scores[rows], limit - 1)[limit - 1]
        rows = rows[scores[rows] >= -kth - 1e-6]
    ranked = []
    for r in rows:
        names = tuple(T[i] for i in grid[r])
        score = score_assignment(ast, names, model)
        ranked.append((score, tuple(ORDINAL[t] for t in names), names))
    ranked.sort(key=_rank_key)
    if limit is not None:
        ranked = ranked[:limit]
    return BruteForceResult(log_z, [(names, sc, math.exp(sc - log_z)) for sc, _, names in ranked],
                            marginals)
