"""MCBoost, the bucketing transform, and swap agnostic learning by post-processing."""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .audit import _Frame, _class_matrix, audit, swap_agnostic_regret
from .distributions import DiscreteJoint, Predictor
from .errors import BadDelta, DidNotConverge, VerificationFailed
from .hypotheses import Hypothesis, HypothesisClass, _best_member, lin_grid, weak_agnostic_learn
from .losses import LossSpec, optimal_action

Learner = Callable[[HypothesisClass, Iterable[tuple[str, float, float]]], tuple[Hypothesis, float]]


def _lattice_size(delta: float) -> int:
    m = round(1.0 / delta)
    if m < 1 or abs(1.0 / delta - m) > 1e-9 * m:
        raise BadDelta(f"1/delta must be a positive integer, got 1/{delta!r} = {1.0 / delta!r}")
    return m


@dataclass(frozen=True)
class BoostConfig:
    """Settings for ``mcboost``.

    ``grid_step`` defaults to ``1 / ceil(4 / alpha)``, the coarsest lattice
    with integral size that is no wider than ``alpha / 4``. ``step_rule`` is
    ``"correlation"`` (least-squares step) or ``"fixed"`` (use ``eta``).
    """

    alpha: float
    grid_step: float | None = None
    step_rule: str = "correlation"
    eta: float | None = None
    max_iterations: int | None = None
    learner: Learner = weak_agnostic_learn

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        step = self.grid_step if self.grid_step is not None else 1.0 / math.ceil(4.0 / self.alpha - 1e-9)
        if not 0 < step <= self.alpha + 1e-15:
            raise ValueError(f"grid_step must lie in (0, alpha], got {step!r}")
        _lattice_size(step)
        object.__setattr__(self, "grid_step", float(step))
        if self.step_rule not in ("correlation", "fixed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.step_rule == "fixed" and (self.eta is None or self.eta <= 0):
            raise ValueError("the fixed step rule needs a positive eta")
        cap = self.max_iterations if self.max_iterations is not None else math.ceil(16.0 / self.alpha**2)
        if cap < 1:
            raise ValueError("max_iterations must be positive")
        object.__setattr__(self, "max_iterations", int(cap))

    @property
    def lattice(self) -> int:
        return _lattice_size(self.grid_step)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "grid_step": self.grid_step, "step_rule": self.step_rule,
                "eta": self.eta, "max_iterations": self.max_iterations}


@dataclass(frozen=True)
class BoostStep:
    iteration: int
    v: float
    mass: float
    witness: str
    violation: float
    eta: float
    potential_before: float
    potential_after: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BoostTrace:
    steps: list[BoostStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def potentials(self) -> list[float]:
        if not self.steps:
            return []
        return [self.steps[0].potential_before] + [s.potential_after for s in self.steps]

    def to_jsonl(self, dumps: Callable[[object], str] = json.dumps) -> str:
        return "".join(dumps(s.to_json()) + "\n" for s in self.steps)


def _potential_terms(p_star: np.ndarray, pred: np.ndarray) -> np.ndarray:
    # E[(y - f)^2 | x] = (f - p*)^2 + p*(1 - p*); only the first part moves
    return (pred - p_star) ** 2


def potential(dist: DiscreteJoint, pred: np.ndarray) -> float:
    p = dist.p_star
    return float(np.dot(dist.weights, _potential_terms(p, pred) + p * (1.0 - p)))


def _snap(new: np.ndarray, p_star: np.ndarray, w: np.ndarray, m: int) -> np.ndarray:
    """Round each distinct value to an adjacent lattice point ``j / m``.

    Of the two neighbours, the one closer to the weighted mean of ``p*`` over
    the points holding that value is chosen. This keeps the squared-error
    increase from rounding below ``(1 / m)^2 / 4`` per unit of mass.
    """
    out = np.empty_like(new)
    for u in np.unique(new):
        grp = new == u
        lo = math.floor(u * m + 1e-9)
        hi = min(lo + 1, m) if abs(u * m - lo) > 1e-9 else lo
        if hi == lo:
            out[grp] = lo / m
            continue
        wg = w[grp]
        mu = float(np.dot(wg, p_star[grp]) / wg.sum()) if wg.sum() > 0 else u
        a, b = lo / m, hi / m
        out[grp] = a if abs(mu - a) <= abs(mu - b) else b
    return out


def _violations(cls: HypothesisClass, M: np.ndarray, frame: _Frame, learner: Learner
                ) -> tuple[list[int], np.ndarray]:
    """Best member index and signed correlation for every level set."""
    if learner is weak_agnostic_learn:
        corr = frame.correlations(M)
        picks = [_best_member(cls.names, corr[:, j]) for j in range(corr.shape[1])]
        return [k for k, _ in picks], np.array([c for _, c in picks])
    dist, part = frame.dist, frame.part
    index_of = {m.name: k for k, m in enumerate(cls.members)}
    ks, cs = [], []
    for j in range(len(part)):
        mask = (part.index == j) & (dist.weights > 0)
        rows = [(dist.ids[i], dist.weights[i] / part.masses[j], frame.resid[i]) for i in np.flatnonzero(mask)]
        h, c = learner(cls, rows)
        ks.append(index_of[h.name])
        cs.append(c)
    return ks, np.array(cs, dtype=float)


def mcboost(dist: DiscreteJoint, cls: HypothesisClass, config: BoostConfig) -> tuple[Predictor, BoostTrace]:
    """Run MCBoost from the constant predictor 1/2 until every level set's violation is at most alpha/2.

    Each iteration ranks level sets by mass times violation and applies the
    first update that strictly lowers squared error. Raises ``DidNotConverge``
    (with the partial trace) on hitting the iteration cap, when no update
    helps, or if the final audit misses ``alpha``.
    """
    M = _class_matrix(cls, dist)
    m = config.lattice
    w, p_star = dist.weights, dist.p_star
    pred = np.full(len(dist), 0.5)
    trace = BoostTrace()
    threshold = config.alpha / 2

    def fail(reason: str):
        smce = audit(dist, Predictor.from_array(dist, pred), cls).smce
        raise DidNotConverge(config.max_iterations, smce, trace, reason)

    for it in range(config.max_iterations + 1):
        frame = _Frame.of(dist, pred)
        picks, corr = _violations(cls, M, frame, config.learner)
        if np.all(corr <= threshold):
            break
        if it == config.max_iterations:
            fail("iteration cap")
        part = frame.part
        order = sorted(np.flatnonzero(corr > threshold), key=lambda j: (-part.masses[j] * corr[j], part.values[j]))
        before = potential(dist, pred)
        for j in order:
            mask = part.index == j
            c = M[picks[j]]
            second = float(np.dot(w[mask], c[mask] ** 2) / part.masses[j])
            if config.step_rule == "fixed":
                eta = float(config.eta)
            elif second > 0:
                eta = float(corr[j] / second)
            else:
                continue
            cand = pred.copy()
            cand[mask] = _snap(np.clip(part.values[j] + eta * c[mask], 0.0, 1.0), p_star[mask], w[mask], m)
            delta = float(np.dot(w[mask], _potential_terms(p_star[mask], cand[mask])
                                 - _potential_terms(p_star[mask], pred[mask])))
            if delta < 0:
                pred = cand
                trace.steps.append(BoostStep(it + 1, float(part.values[j]), float(part.masses[j]),
                                             cls.members[picks[j]].name, float(corr[j]), eta,
                                             before, potential(dist, pred)))
                break
        else:
            fail("stalled")

    result = Predictor.from_array(dist, pred)
    final = audit(dist, result, cls).smce
    if final > config.alpha:
        raise DidNotConverge(config.max_iterations, final, trace, "final audit above alpha")
    return result, trace


def bucketize(pred: Predictor, delta: float) -> Predictor:
    """Map each prediction in bucket ``[(j - 1) delta, j delta)`` to ``j delta``.

    The top bucket is closed, so 1 stays at 1, while 0 goes up to ``delta``.
    """
    m = _lattice_size(delta)
    out = {}
    for k, p in pred.values.items():
        x = p * m
        j = round(x) if abs(x - round(x)) <= 1e-9 else math.floor(x)
        out[k] = min(j + 1, m) / m
    return Predictor(out)


@dataclass(frozen=True)
class SwapAgnosticResult:
    hypothesis: Hypothesis
    predictor: Predictor
    trace: BoostTrace
    alpha: float
    regret: float


def swap_agnostic_learn(dist: DiscreteJoint, cls: HypothesisClass, loss: LossSpec, eps: float,
                        budget: float = 1.0, grid_step: float | None = None,
                        max_iterations: int | None = None) -> SwapAgnosticResult:
    """Boost to swap multicalibration, then post-process with ``k_l``.

    The boosting target is ``eps / (2 (W + B + 1))`` for budget ``W`` and the
    loss's niceness bound ``B``. The result is checked against a grid over
    ``Lin(C, W)`` with spacing ``W / 4`` (or ``grid_step``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    alpha = min(eps / (2.0 * (budget + loss.niceness_bound + 1.0)), 1.0)
    pred, trace = mcboost(dist, cls, BoostConfig(alpha, max_iterations=max_iterations))
    actions = {}
    for pid, v in pred.values.items():
        actions[pid] = optimal_action(loss, v)
    h = Hypothesis(f"k_{loss.name}", actions)
    step = grid_step if grid_step is not None else (budget / 4 if budget > 0 else 1.0)
    regret = swap_agnostic_regret(dist, h, loss, lin_grid(cls, budget, step))
    if regret > eps:
        raise VerificationFailed(f"swap regret {regret:.6g} exceeds eps {eps:g}")
    return SwapAgnosticResult(h, pred, trace, alpha, regret)
