"""Penalized maximum likelihood with the distribution-aware prior."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .features import FeatureVocabulary
from .inference import CompiledBatch, InferenceError
from .model import AdmissibleSets, Model
from .transforms import TransformLabeling

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    delta2: float = 500.0
    q: float = 0.5
    G: int = 200
    lbfgs_history: int = 10
    grad_tol: float = 1e-6

    def __post_init__(self):
        if not self.delta2 > 0:
            raise ValueError("delta2 must be positive")
        if not self.q >= 0:
            raise ValueError("q must be non-negative")
        if int(self.G) != self.G or self.G < 0:
            raise ValueError("G must be a non-negative integer")
        if self.lbfgs_history < 1:
            raise ValueError("lbfgs_history must be at least 1")
        if not self.grad_tol >= 0:
            raise ValueError("grad_tol must be non-negative")
        self.G = int(self.G)


@dataclass
class PriorWeights:
    """chi_i = (mean_u N_u / N_{S(t_i)}) ** q for every training example."""

    chi: np.ndarray
    counts: dict[int, int]
    mean_count: float

    @property
    def U(self) -> set[int]:
        return set(self.counts)


def compute_prior_weights(data: Sequence[TransformLabeling], q: float) -> PriorWeights:
    if q < 0:
        raise ValueError("q must be non-negative")
    sizes = [lab.size for lab in data]
    for i, s in enumerate(sizes):
        if s == 0:
            raise ValueError(f"example {i} has no non-EMPTY transform")
    counts = dict(sorted(Counter(sizes).items()))
    if not counts:
        return PriorWeights(np.zeros(0), {}, 0.0)
    mean = sum(counts.values()) / len(counts)
    chi = np.array([(mean / counts[s]) ** q for s in sizes], dtype=float)
    return PriorWeights(chi, counts, mean)


def compile_training_set(data: Sequence[TransformLabeling], vocab: FeatureVocabulary,
                         admissible: AdmissibleSets) -> CompiledBatch:
    """Compile examples and their gold labelings for repeated evaluation."""
    model = Model(vocab, np.zeros(len(vocab)), admissible)
    return CompiledBatch([lab.ast for lab in data], model, gold=list(data))


class Objective:
    """Regularized, chi-weighted log-likelihood and its gradient."""

    def __init__(self, batch: CompiledBatch, chi: np.ndarray, delta2: float):
        self.batch = batch
        self.chi = np.asarray(chi, dtype=float)
        if self.chi.shape != (batch.n_examples,):
            raise ValueError("one prior weight per example is required")
        self.delta2 = float(delta2)
        self.observed = batch.observed_counts(self.chi)
        self.evaluations = 0

    def __call__(self, weights: np.ndarray) -> tuple[float, np.ndarray]:
        self.evaluations += 1
        b = self.batch
        w = np.asarray(weights, dtype=float)
        local = b.local_potentials(w)
        pot = b.clique_potentials(w)
        try:
            bel, log_z = b.sum_product(pot)
        except InferenceError as exc:
            raise TrainingError(str(exc)) from exc
        gold = b.gold_scores(local)
        value = float(self.chi @ gold - self.chi @ log_z - w @ w / (2 * self.delta2))
        probs = b.clique_marginals(bel, log_z) * self.chi[b.row_example][:, None, None, None]
        expected = b.expected_counts(b.local_marginals(probs))
        grad = self.observed - expected - w / self.delta2
        return value, grad


def objective_and_gradient(batch: CompiledBatch, weights, prior: PriorWeights,
                           config: TrainConfig) -> tuple[float, np.ndarray]:
    return Objective(batch, prior.chi, config.delta2)(weights)


class _Budget(Exception):
    pass


@dataclass
class TrainResult:
    model: Model
    log: list[dict] = field(default_factory=list)
    evaluations: int = 0
    converged: bool = False
    objective: float = float("nan")
    grad_norm: float = float("nan")


def train(data: Sequence[TransformLabeling], vocab: FeatureVocabulary,
          admissible: AdmissibleSets, config: TrainConfig | None = None,
          callback: Callable[[dict], None] | None = None) -> TrainResult:
    """Fit weights by L-BFGS ascent on the concave regularized objective.

    Starts from zero weights and stops after ``config.G`` objective and
    gradient evaluations or once the gradient's infinity norm drops below
    ``config.grad_tol``.
    """
    config = config or TrainConfig()
    prior = compute_prior_weights(data, config.q)
    K = len(vocab)
    hyper = {"delta2": config.delta2, "q": config.q, "G": config.G, "created": None}
    w0 = np.zeros(K)
    if config.G == 0 or K == 0:
        return TrainResult(Model(vocab, w0, admissible, hyper))

    obj = Objective(compile_training_set(data, vocab, admissible), prior.chi, config.delta2)
    cache: dict[bytes, tuple[float, np.ndarray]] = {}
    history: list[dict] = []
    best = {"x": w0.copy(), "f": None, "g": None}

    def fun(x):
        if obj.evaluations >= config.G:
            raise _Budget
        f, g = obj(x)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite objective {f} at evaluation {obj.evaluations}")
        cache.clear()
        cache[x.tobytes()] = (f, g)
        if best["f"] is None:  # the starting point
            best.update(f=f, g=g)
        return -f, -g

    def on_iter(xk):
        f, g = cache.get(xk.tobytes()) or obj(xk)
        best.update(x=xk.copy(), f=f, g=g)
        rec = {"iteration": len(history) + 1, "objective": f,
               "grad_norm": float(np.max(np.abs(g))), "evaluations": obj.evaluations}
        history.append(rec)
        log.debug("iteration %(iteration)d objective %(objective).6f grad %(grad_norm).3e", rec)
        if callback is not None:
            callback(rec)

    converged = False
    try:
        res = minimize(fun, w0, jac=True, method="L-BFGS-B", callback=on_iter,
                       options={"maxcor": config.lbfgs_history, "maxfun": config.G,
                                "maxiter": config.G, "gtol": config.grad_tol,
                                "ftol": 0.0})
        converged = bool(res.success)
    except _Budget:
        pass
    # the last accepted iterate; L-BFGS-B reports the same point
    x, f, g = best["x"], best["f"], best["g"]
    gnorm = float(np.max(np.abs(g))) if g is not None else float("nan")
    model = Model(vocab, x, admissible, hyper)
    return TrainResult(model, history, obj.evaluations, converged, float(f), gnorm)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
