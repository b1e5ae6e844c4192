"""Trained model state: vocabulary, weights, admissibility sets, JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .features import FeatureVocabulary, IndicatorSets, build_indicator_vocab
from .transforms import EMPTY, ORDINAL, TRANSFORMS, TransformLabeling
from .trees import LABELS

FORMAT_VERSION = 1


def _sorted_transforms(ts: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(ts), key=ORDINAL.__getitem__))


@dataclass
class AdmissibleSets:
    """Clique assignments observed in training data, keyed by label tuple.

    A clique assignment violates the constraints when its label tuple has an
    entry and the transform tuple is absent from it.  All-EMPTY tuples are
    always admissible.  Label tuples without an entry are unconstrained,
    except for nodes: an unseen node label only admits EMPTY.
    """

    node: dict[str, frozenset] = field(default_factory=dict)
    edge: dict[tuple, frozenset] = field(default_factory=dict)
    triangle: dict[tuple, frozenset] = field(default_factory=dict)

    def node_domain(self, label: str) -> tuple[str, ...] | None:
        """Admissible transforms for a node label, or None when unseen."""
        ts = self.node.get(label)
        return None if ts is None else _sorted_transforms(ts | {EMPTY})

    def node_violates(self, label: str, t: str) -> bool:
        if t == EMPTY:
            return False
        ts = self.node.get(label)
        return ts is None or t not in ts

    def edge_violates(self, l1: str, l2: str, t1: str, t2: str) -> bool:
        ts = self.edge.get((l1, l2))
        if ts is None or (t1 == EMPTY and t2 == EMPTY):
            return False
        return (t1, t2) not in ts

    def triangle_violates(self, l1, l2, l3, t1, t2, t3) -> bool:
        ts = self.triangle.get((l1, l2, l3))
        if ts is None or (t1 == EMPTY and t2 == EMPTY and t3 == EMPTY):
            return False
        return (t1, t2, t3) not in ts

    def transform_set(self) -> tuple[str, ...]:
        """Every transform that some node label admits (plus EMPTY)."""
        out = {EMPTY}
        for ts in self.node.values():
            out |= ts
        return _sorted_transforms(out)

    @classmethod
    def from_indicators(cls, sets: IndicatorSets) -> AdmissibleSets:
        node: dict[str, set] = {}
        edge: dict[tuple, set] = {}
        tri: dict[tuple, set] = {}
        for t, L in sets.nodetran:
            node.setdefault(L, {EMPTY}).add(t)
        for t1, l1, t2, l2 in sets.edgetran:
            edge.setdefault((l1, l2), {(EMPTY, EMPTY)}).add((t1, t2))
        for t1, l1, t2, l2, t3, l3 in sets.triangletran:
            tri.setdefault((l1, l2, l3), {(EMPTY,) * 3}).add((t1, t2, t3))
        return cls({k: frozenset(v) for k, v in node.items()},
                   {k: frozenset(v) for k, v in edge.items()},
                   {k: frozenset(v) for k, v in tri.items()})

    def to_obj(self) -> dict:
        def tuples(d):
            return [[list(k), sorted(list(t) for t in v)] for k, v in sorted(d.items())]
        return {
            "node": {k: list(_sorted_transforms(v)) for k, v in sorted(self.node.items())},
            "edge": tuples(self.edge),
            "triangle": tuples(self.triangle),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> AdmissibleSets:
        return cls(
            {k: frozenset(v) for k, v in obj.get("node", {}).items()},
            {tuple(k): frozenset(tuple(t) for t in v) for k, v in obj.get("edge", [])},
            {tuple(k): frozenset(tuple(t) for t in v) for k, v in obj.get("triangle", [])},
        )


def build_admissible_sets(data: list[TransformLabeling]) -> AdmissibleSets:
    return AdmissibleSets.from_indicators(build_indicator_vocab(data))


@dataclass
class Model:
    """Everything inference needs: features, weights and constraints."""

    vocab: FeatureVocabulary
    weights: np.ndarray
    admissible: AdmissibleSets
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.vocab),):
            raise ValueError(
                f"weights have shape {self.weights.shape}, vocabulary has {len(self.vocab)} features")

    @property
    def n_features(self) -> int:
        return len(self.vocab)

    def with_weights(self, weights) -> Model:
        return Model(self.vocab, np.asarray(weights, dtype=float), self.admissible, dict(self.hyper))

    def to_obj(self) -> dict:
        ind = self.vocab.indicators
        return {
            "format": FORMAT_VERSION,
            "meta": {k: self.hyper.get(k) for k in ("delta2", "q", "G", "created")},
            "alphabets": {"labels": list(LABELS), "transforms": list(TRANSFORMS)},
            "viable": {k: list(v) for k, v in sorted(self.vocab.viable.items())},
            "admissible": self.admissible.to_obj(),
            "observation_features": [list(f) for f in self.vocab.observation],
            "indicator_features": {
                "nodetran": [list(k) for k in sorted(ind.nodetran)],
                "edgetran": [list(k) for k in sorted(ind.edgetran)],
                "triangletran": [list(k) for k in sorted(ind.triangletran)],
                "triangletran_spe": [list(k) for k in sorted(ind.triangletran_spe)],
            },
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> Model:
        if obj.get("format", FORMAT_VERSION) != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {obj.get('format')!r}")
        ind = obj["indicator_features"]
        sets = IndicatorSets(
            {tuple(k) for k in ind["nodetran"]},
            {tuple(k) for k in ind["edgetran"]},
            {tuple(k) for k in ind["triangletran"]},
            {tuple(k) for k in ind["triangletran_spe"]},
        )
        vocab = FeatureVocabulary(
            {k: tuple(v) for k, v in obj["viable"].items()},
            [tuple(f) for f in obj["observation_features"]],
            sets,
        )
        return cls(vocab, np.array(obj["weights"], dtype=float),
                   AdmissibleSets.from_obj(obj["admissible"]), dict(obj.get("meta", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> Model:
        with open(path, encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))
