"""Dataset assembly, splitting, the frequency baseline and exact-match metrics."""

from __future__ import annotations

import itertools
import logging
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.model_selection import KFold

from .edits import EditScript, count_root_edit_ops
from .transforms import (EMPTY, ORDINAL, TRANSFORMS, TransformConflictError,
                         TransformLabeling, extract_transforms)
from .trees import Ast

log = logging.getLogger(__name__)

MULTIPLE = "Multiple"


@dataclass
class PrepareReport:
    kept: int = 0
    over_threshold: list[str] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    no_transform: list[str] = field(default_factory=list)


def prepare_dataset(scripts: Sequence[EditScript], threshold: int = 10,
                    report: PrepareReport | None = None) -> list[TransformLabeling]:
    """Filter by root-operation count, extract labels, drop unusable examples.

    Per-script problems are logged and recorded in ``report``; they never
    abort the run.
    """
    report = report if report is not None else PrepareReport()
    out = []
    for i, script in enumerate(scripts):
        name = script.source_id or f"script {i}"
        n_root = count_root_edit_ops(script)
        if n_root > threshold:
            log.info("%s: %d root edit operations exceed threshold %d", name, n_root, threshold)
            report.over_threshold.append(name)
            continue
        try:
            lab = extract_transforms(script)
        except TransformConflictError as exc:
            log.warning("%s: %s", name, exc)
            report.conflicts.append(f"{name}: {exc}")
            continue
        except ValueError as exc:
            log.warning("%s: extraction failed: %s", name, exc)
            report.failures.append(f"{name}: {exc}")
            continue
        if lab.size == 0:
            log.info("%s: no transform extracted", name)
            report.no_transform.append(name)
            continue
        out.append(lab)
    report.kept = len(out)
    return out


def slice_of(lab: TransformLabeling) -> str:
    """The evaluation slice: the single transform's name, or ``Multiple``."""
    if lab.size == 1:
        return next(iter(lab.labels.values()))
    return MULTIPLE if lab.size > 1 else EMPTY


def split_dataset(data: Sequence[TransformLabeling], per_transform_test: int = 300,
                  multiple_test: int = 1000, seed: int = 0):
    """Seeded test sample of each single-transform slice and of the multiple slice.

    Returns ``(train, test)``; both keep the input order.
    """
    if per_transform_test < 0 or multiple_test < 0:
        raise ValueError("test sizes must be non-negative")
    rng = np.random.default_rng(seed)
    by_slice: dict[str, list[int]] = defaultdict(list)
    for i, lab in enumerate(data):
        by_slice[slice_of(lab)].append(i)
    chosen: set[int] = set()
    for name in list(TRANSFORMS[1:]) + [MULTIPLE]:
        want = multiple_test if name == MULTIPLE else per_transform_test
        pool = by_slice.get(name, [])
        if want == 0 or not pool:
            continue
        if len(pool) < want:
            warnings.warn(f"slice {name}: only {len(pool)} examples for {want} requested",
                          stacklevel=2)
        take = rng.choice(len(pool), size=min(want, len(pool)), replace=False)
        chosen.update(pool[j] for j in take)
    train = [lab for i, lab in enumerate(data) if i not in chosen]
    test = [lab for i, lab in enumerate(data) if i in chosen]
    return train, test


# --------------------------------------------------------------------------
# baseline


@dataclass
class BaselineModel:
    """P(L, T) = N1 / N0: share of label-L nodes that carried transform T."""

    tuples: list[tuple[str, str, float]]

    def __post_init__(self):
        self._p = {(L, T): P for L, T, P in self.tuples}

    def probability(self, label: str, transform: str) -> float:
        return self._p.get((label, transform), 0.0)

    def to_obj(self) -> dict:
        return {"tuples": [list(t) for t in self.tuples]}

    @classmethod
    def from_obj(cls, obj: dict) -> BaselineModel:
        return cls([(L, T, float(P)) for L, T, P in obj["tuples"]])


def build_baseline(data: Sequence[TransformLabeling]) -> BaselineModel:
    n0: Counter = Counter()
    n1: Counter = Counter()
    for lab in data:
        for node in lab.ast.nodes:
            n0[node.label] += 1
            t = lab[node.position]
            if t != EMPTY:
                n1[node.label, t] += 1
    tuples = [(L, T, n1[L, T] / n0[L])
              for L, T in sorted(n1, key=lambda k: (k[0], ORDINAL[k[1]]))]
    return BaselineModel(tuples)


def baseline_rank(ast: Ast, baseline: BaselineModel, k: int = 3,
                  max_nodes: int = 3) -> list[TransformLabeling]:
    """Ranked candidate labelings: all single-node ones first, then pairs, then triples.

    Singles are ordered by P descending with ties broken by pre-order
    position; combinations by the product of their members' P.
    """
    cands = []
    for node in ast.nodes:
        for T in TRANSFORMS[1:]:
            p = baseline.probability(node.label, T)
            if p > 0:
                cands.append((p, node.position, ORDINAL[T], T))
    cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    out: list[TransformLabeling] = []
    for size in range(1, max_nodes + 1):
        if len(out) >= k:
            break
        combos = []
        for combo in itertools.combinations(cands, size):
            positions = [c[1] for c in combo]
            if len(set(positions)) < size:
                continue
            prob = float(np.prod([c[0] for c in combo]))
            key = tuple(sorted((c[1], c[2]) for c in combo))
            combos.append((-prob, key, combo))
        combos.sort(key=lambda c: (c[0], c[1]))
        for _, _, combo in combos[:k - len(out)]:
            out.append(TransformLabeling(ast, {c[1]: c[3] for c in combo}))
    return out[:k]


# --------------------------------------------------------------------------
# metrics


@dataclass
class SliceScore:
    total: int = 0
    correct: dict[int, int] = field(default_factory=dict)

    def accuracy(self, k: int) -> float:
        return self.correct.get(k, 0) / self.total if self.total else 0.0


@dataclass
class EvalReport:
    ks: tuple[int, ...]
    slices: dict[str, SliceScore]
    records: list[dict]

    def _merge(self, names) -> SliceScore:
        out = SliceScore(0, {k: 0 for k in self.ks})
        for n in names:
            s = self.slices.get(n)
            if s is None:
                continue
            out.total += s.total
            for k in self.ks:
                out.correct[k] += s.correct.get(k, 0)
        return out

    @property
    def single(self) -> SliceScore:
        return self._merge([n for n in self.slices if n != MULTIPLE])

    @property
    def multiple(self) -> SliceScore:
        return self._merge([MULTIPLE])

    @property
    def overall(self) -> SliceScore:
        return self._merge(list(self.slices))

    def to_obj(self) -> dict:
        def dump(s: SliceScore):
            return {"total": s.total,
                    "correct": {str(k): s.correct.get(k, 0) for k in self.ks},
                    "accuracy": {str(k): s.accuracy(k) for k in self.ks}}
        return {
            "ks": list(self.ks),
            "slices": {n: dump(s) for n, s in self.slices.items()},
            "single": dump(self.single),
            "multiple": dump(self.multiple),
            "overall": dump(self.overall),
            "records": self.records,
        }

    def format_table(self) -> str:
        head = f"{'slice':<16}{'n':>6}" + "".join(f"{'top-' + str(k):>9}" for k in self.ks)
        lines = [head, "-" * len(head)]

        def row(name, s):
            return f"{name:<16}{s.total:>6}" + "".join(f"{s.accuracy(k):>9.3f}" for k in self.ks)
        order = [t for t in TRANSFORMS[1:] if t in self.slices] + \
            ([MULTIPLE] if MULTIPLE in self.slices else [])
        lines += [row(n, self.slices[n]) for n in order]
        lines.append("-" * len(head))
        lines += [row("single", self.single), row("multiple", self.multiple),
                  row("overall", self.overall)]
        return "\n".join(lines)


Predictor = Callable[[Ast, int], Sequence]


def _labeling(item) -> TransformLabeling:
    return item[0] if isinstance(item, tuple) else item


def evaluate(test: Sequence[TransformLabeling], predictor: Predictor,
             ks: Sequence[int] = (1, 3)) -> EvalReport:
    """Exact-match accuracy at each k: some prediction among the first k equals the truth."""
    ks = tuple(sorted(set(ks)))
    if not ks or ks[0] < 1:
        raise ValueError("ks must be positive")
    kmax = ks[-1]
    slices: dict[str, SliceScore] = {}
    records = []
    for i, truth in enumerate(test):
        preds = [_labeling(p) for p in predictor(truth.ast, kmax)][:kmax]
        hit = next((j + 1 for j, p in enumerate(preds) if p.labels == truth.labels), None)
        name = slice_of(truth)
        s = slices.setdefault(name, SliceScore(0, {k: 0 for k in ks}))
        s.total += 1
        for k in ks:
            if hit is not None and hit <= k:
                s.correct[k] += 1
        records.append({
            "index": i,
            "source_id": truth.ast.source_id,
            "slice": name,
            "truth": {str(p): t for p, t in truth.labels.items()},
            "predictions": [{str(p): t for p, t in pr.labels.items()} for pr in preds],
            "rank": hit,
        })
    return EvalReport(ks, slices, records)


def cross_validate(data: Sequence[TransformLabeling],
                   fit: Callable[[list[TransformLabeling]], Predictor],
                   n_folds: int = 10, seed: int = 0,
                   ks: Sequence[int] = (1, 3)) -> list[EvalReport]:
    """One EvalReport per fold; ``fit(train)`` returns a predictor for the held-out fold.

    Picking hyper-parameters from the fold reports is left to the caller.
    """
    data = list(data)
    if n_folds < 2 or n_folds > len(data):
        raise ValueError(f"n_folds must be in [2, {len(data)}]")
    folds = KFold(n_splits=n_folds, shuffle=True, random_state=seed).split(np.arange(len(data)))
    return [evaluate([data[i] for i in test], fit([data[i] for i in train]), ks)
            for train, test in folds]
