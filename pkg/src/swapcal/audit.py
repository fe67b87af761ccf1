"""Exact error metrics and regrets over finite distributions.

All quantities are computed level set by level set. A "level set" is the set
of points sharing one prediction value ``v``; conditional expectations are
formed as weighted sums divided by the level set's mass. Swap notions take
the adversary's maximum inside each level set, non-swap notions outside.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteJoint, Partition, Predictor, partition, _locate
from .errors import EmptyClass
from .hypotheses import Hypothesis, HypothesisClass, LinCombination, competitor_values
from .losses import LossFamily, LossSpec, eval_extended, family as as_family, optimal_action, partial

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class LevelSetAudit:
    v: float
    mass: float
    alpha_v: float
    witness: str
    correlation: float  # signed E[c(x)(y - v) | v] of the witness
    p_star_v: float


@dataclass(frozen=True)
class AuditReport:
    mce: float
    smce: float
    calibration_error: float
    multiaccuracy_error: float
    level_sets: tuple[LevelSetAudit, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mce": self.mce,
            "smce": self.smce,
            "calibration_error": self.calibration_error,
            "multiaccuracy_error": self.multiaccuracy_error,
            "level_sets": [
                {"v": s.v, "mass": s.mass, "alpha_v": s.alpha_v, "witness": s.witness,
                 "correlation": s.correlation, "p_star_v": s.p_star_v}
                for s in self.level_sets
            ],
            "metadata": dict(self.metadata),
        }


def predictor_hash(pred: Predictor) -> str:
    blob = json.dumps(sorted((k, float(v).hex()) for k, v in pred.values.items()))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _support(dist: DiscreteJoint, x: np.ndarray) -> np.ndarray:
    """Zero out columns of zero-weight points so NaN fill-ins cannot leak into sums."""
    return np.where(dist.weights > 0, x, 0.0)


def _values(pred, dist: DiscreteJoint) -> np.ndarray:
    if isinstance(pred, Predictor):
        return pred.array(dist)
    if isinstance(pred, Hypothesis):
        return pred.values(dist)
    return np.asarray(pred, dtype=float)


def _single(c, dist: DiscreteJoint) -> np.ndarray:
    if isinstance(c, (Hypothesis, LinCombination)):
        return c.values(dist)
    return np.asarray(c, dtype=float)


@dataclass(frozen=True, eq=False)
class _Frame:
    """A predictor's level sets together with its residual ``p* - v``."""

    dist: DiscreteJoint
    part: Partition
    v: np.ndarray  # per-point level-set value (0 on zero-weight points)
    resid: np.ndarray

    @classmethod
    def of(cls, dist: DiscreteJoint, values: np.ndarray) -> _Frame:
        part = partition(values, dist.weights)
        v = _support(dist, np.nan_to_num(part.point_values))
        return cls(dist, part, v, _support(dist, dist.p_star - v))

    def correlations(self, M: np.ndarray) -> np.ndarray:
        """``(members, level_sets)`` conditional correlations E[c(x)(y - v) | v]."""
        return self.part.sums(_support(self.dist, M) * self.resid) / self.part.masses


def _class_matrix(cls: HypothesisClass, dist: DiscreteJoint) -> np.ndarray:
    if len(cls) == 0:
        raise EmptyClass("cannot audit against an empty class")
    return _support(dist, cls.matrix(dist))


def _pick_witness(names: Sequence[str], col: np.ndarray) -> int:
    """Largest |correlation|; ties prefer a positive correlation, then the smaller name."""
    mag = np.abs(col)
    top = mag.max()
    cands = np.flatnonzero(mag == top)
    return int(min(cands, key=lambda k: (col[k] < 0, names[k])))


def audit(dist: DiscreteJoint, pred: Predictor, cls: HypothesisClass) -> AuditReport:
    M = _class_matrix(cls, dist)
    frame = _Frame.of(dist, pred.array(dist))
    part = frame.part
    corr = frame.correlations(M)
    names = cls.names

    level_sets = []
    alphas = np.abs(corr).max(axis=0)
    p_star_v = part.means(_support(dist, dist.p_star))
    for j in range(len(part)):
        k = _pick_witness(names, corr[:, j])
        level_sets.append(LevelSetAudit(float(part.values[j]), float(part.masses[j]), float(alphas[j]),
                                        names[k], float(corr[k, j]), float(p_star_v[j])))

    smce = float(np.dot(part.masses, alphas))
    mce = float(np.max(np.abs(corr) @ part.masses))
    calibration = float(np.sum(np.abs(part.sums(frame.resid))))
    global_resid = _support(dist, dist.p_star - np.nan_to_num(pred.array(dist)))
    multiaccuracy = float(np.max(np.abs(M @ (dist.weights * global_resid))))
    meta = {"class": cls.name, "predictor": predictor_hash(pred)}
    return AuditReport(mce, smce, calibration, multiaccuracy, tuple(level_sets), meta)


@dataclass(frozen=True)
class BadSets:
    per_member: Mapping[str, tuple[float, ...]]
    per_member_mass: Mapping[str, float]
    global_set: tuple[float, ...]
    global_mass: float


def bad_intervals(dist: DiscreteJoint, pred: Predictor, cls: HypothesisClass, beta: float) -> BadSets:
    """Level sets where some member's conditional correlation reaches ``beta``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    frame = _Frame.of(dist, pred.array(dist))
    corr = np.abs(frame.correlations(_class_matrix(cls, dist)))
    hit = corr >= beta - ZERO_TOL
    vals, masses = frame.part.values, frame.part.masses
    per = {n: tuple(float(v) for v in vals[hit[k]]) for k, n in enumerate(cls.names)}
    per_mass = {n: float(masses[hit[k]].sum()) for k, n in enumerate(cls.names)}
    any_hit = hit.any(axis=0)
    return BadSets(per, per_mass, tuple(float(v) for v in vals[any_hit]), float(masses[any_hit].sum()))


# --- regrets ---------------------------------------------------------------

def _expected_losses(loss: LossSpec, dist: DiscreteJoint, actions: np.ndarray) -> np.ndarray:
    """Per-point ``l(p*(x), a(x))`` for a 1-D or 2-D array of actions (unweighted)."""
    return _support(dist, eval_extended(loss, dist.p_star, _support(dist, actions)))


def _level_actions(loss: LossSpec, part: Partition) -> np.ndarray:
    return np.array([optimal_action(loss, float(np.clip(v, 0.0, 1.0))) for v in part.values])


def swap_agnostic_regret(dist: DiscreteJoint, h, loss: LossSpec, competitors) -> float:
    """``E[l(y, h(x))] - E_v[min_c E[l(y, c(x)) | h(x) = v]]``; negative when ``h`` wins."""
    hv = _values(h, dist)
    C = competitor_values(competitors, dist)
    part = partition(hv, dist.weights)
    own = float(_expected_losses(loss, dist, hv) @ dist.weights)
    best = part.sums(_expected_losses(loss, dist, C)).min(axis=0)
    return own - float(best.sum())


def omniprediction_regret(dist: DiscreteJoint, pred: Predictor, loss: LossSpec, competitors) -> float:
    """``E[l(y, k(p(x)))] - min_c E[l(y, c(x))]``."""
    C = competitor_values(competitors, dist)
    frame = _Frame.of(dist, pred.array(dist))
    own = float(_level_sums_of_action(loss, frame, _level_actions(loss, frame.part)).sum())
    best = float((_expected_losses(loss, dist, C) @ dist.weights).min())
    return own - best


def _level_sums_of_action(loss: LossSpec, frame: _Frame, actions: np.ndarray) -> np.ndarray:
    """Per-level-set ``sum_{x in v} w(x) l(p*(x), k(v))``."""
    idx = frame.part.index
    per_point = np.where(idx >= 0, actions[np.maximum(idx, 0)], 0.0)
    return frame.part.sums(_support(frame.dist, eval_extended(loss, frame.dist.p_star, per_point)))


def swap_omni_regret(dist: DiscreteJoint, pred: Predictor, losses: LossFamily | Sequence[LossSpec] | LossSpec,
                     competitors) -> float:
    """``E_v[max_l (E[l(y, k_l(v)) | v] - min_c E[l(y, c(x)) | v])]``."""
    fam = as_family(losses)
    C = competitor_values(competitors, dist)
    frame = _Frame.of(dist, pred.array(dist))
    per_loss = []
    for loss in fam:
        own = _level_sums_of_action(loss, frame, _level_actions(loss, frame.part))
        best = frame.part.sums(_expected_losses(loss, dist, C)).min(axis=0)
        per_loss.append(own - best)
    return float(np.max(per_loss, axis=0).sum())


def _oi_terms(loss: LossSpec, frame: _Frame, C: np.ndarray) -> np.ndarray:
    """Per-point ``u(y*) - u(y~)`` in expectation, for each competitor row of ``C`` (unweighted)."""
    dist = frame.dist
    idx = frame.part.index
    actions = _level_actions(loss, frame.part)
    k = np.where(idx >= 0, actions[np.maximum(idx, 0)], 0.0)
    p, q = dist.p_star, frame.v
    C = _support(dist, C)
    own = eval_extended(loss, p, k) - eval_extended(loss, q, k)
    comp = eval_extended(loss, p, C) - eval_extended(loss, q, C)
    return _support(dist, own - comp)


def loss_oi_violations(dist: DiscreteJoint, pred: Predictor, loss: LossSpec, competitors) -> np.ndarray:
    """Loss-OI violation of every competitor, as an array."""
    frame = _Frame.of(dist, pred.array(dist))
    return np.abs(_oi_terms(loss, frame, competitor_values(competitors, dist)) @ dist.weights)


def loss_oi_violation(dist: DiscreteJoint, pred: Predictor, loss: LossSpec, c) -> float:
    """``|E[u(x, p(x), y*)] - E[u(x, p(x), y~)]|`` with ``u = l(y, k(v)) - l(y, c(x))``."""
    return float(loss_oi_violations(dist, pred, loss, _single(c, dist)[None, :])[0])


def swap_loss_oi_violation(dist: DiscreteJoint, pred: Predictor, losses: LossFamily | Sequence[LossSpec] | LossSpec,
                           competitors) -> float:
    """``E_v[max_{l, c} |E[u_{l,c}(y*) - u_{l,c}(y~) | v]|]``."""
    fam = as_family(losses)
    C = competitor_values(competitors, dist)
    frame = _Frame.of(dist, pred.array(dist))
    worst = np.zeros(len(frame.part))
    for loss in fam:
        worst = np.maximum(worst, np.abs(frame.part.sums(_oi_terms(loss, frame, C))).max(axis=0))
    return float(worst.sum())


def swap_loss_oi_by_correlation(dist: DiscreteJoint, pred: Predictor, assignment: Mapping[float, tuple[LossSpec, object]]
                                ) -> float:
    """Swap loss-OI for a fixed per-level-set assignment, via residual correlations.

    ``assignment`` maps each level-set value to ``(loss, c)``. Each term is
    ``|E[(y* - y~)(dl(k(v)) - dl(c(x))) | v]|``, summed with level-set masses.
    """
    frame = _Frame.of(dist, pred.array(dist))
    total = 0.0
    for j, v in enumerate(frame.part.values):
        loss, c = _assigned(assignment, float(v))
        cv = _support(dist, _single(c, dist))
        k = optimal_action(loss, float(np.clip(v, 0.0, 1.0)))
        mask = frame.part.index == j
        diff = partial(loss, np.full(len(dist), k)) - partial(loss, cv)
        total += abs(float(np.sum((dist.weights * frame.resid * _support(dist, diff))[mask])))
    return total


def swap_loss_oi_by_losses(dist: DiscreteJoint, pred: Predictor, assignment: Mapping[float, tuple[LossSpec, object]]
                           ) -> float:
    """The same quantity as ``swap_loss_oi_by_correlation``, from loss differences."""
    frame = _Frame.of(dist, pred.array(dist))
    total = 0.0
    for j, v in enumerate(frame.part.values):
        loss, c = _assigned(assignment, float(v))
        terms = _oi_terms(loss, frame, _single(c, dist)[None, :])[0]
        total += abs(float(np.sum((dist.weights * terms)[frame.part.index == j])))
    return total


def _assigned(assignment: Mapping[float, tuple[LossSpec, object]], v: float):
    for key, val in assignment.items():
        if abs(float(key) - v) <= 2.0**-32:
            return val
    raise KeyError(f"no assignment for level set {v!r}")


# --- conditional structure -------------------------------------------------

@dataclass(frozen=True)
class ConditionalMeans:
    """Conditional means of ``h`` on one level set, overall and by label.

    ``mu_by_label[y]`` is None (and ``y`` is listed in ``degenerate``) when
    ``Pr[y | v] = 0``.
    """

    v: float
    mu: float
    mu_by_label: Mapping[int, float | None]
    label_prob: Mapping[int, float]
    degenerate: tuple[int, ...]


def conditional_means(dist: DiscreteJoint, pred: Predictor, h, v: float) -> ConditionalMeans:
    frame = _Frame.of(dist, pred.array(dist))
    j = _locate(frame.part, v)
    mask = (frame.part.index == j) & (dist.weights > 0)
    w = dist.weights[mask]
    hv = _single(h, dist)[mask]
    p = dist.p_star[mask]
    mass = w.sum()
    mu = float(np.dot(w, hv) / mass)
    by_label: dict[int, float | None] = {}
    probs: dict[int, float] = {}
    degenerate = []
    for y, py in ((0, 1.0 - p), (1, p)):
        m = float(np.dot(w, py))
        probs[y] = m / mass
        if m <= 0:
            by_label[y] = None
            degenerate.append(y)
        else:
            by_label[y] = float(np.dot(w * py, hv) / m)
    return ConditionalMeans(float(frame.part.values[j]), mu, by_label, probs, tuple(degenerate))


def squared_error(dist: DiscreteJoint, values) -> float:
    """``E[(y - f(x))^2]`` for a per-point array ``f``."""
    f = _support(dist, np.asarray(values, dtype=float))
    p = dist.p_star
    return float(np.dot(dist.weights, p * (1.0 - f) ** 2 + (1.0 - p) * f**2))


def improvement_witness(dist: DiscreteJoint, pred: Predictor, cls: HypothesisClass,
                        report: AuditReport | None = None) -> np.ndarray:
    """``h'(x) = v + corr(v) c_v(x)`` on each level set, from the audit's witnesses.

    On a bounded class this lowers squared error by at least ``E_v[alpha(v)^2]``.
    """
    report = report or audit(dist, pred, cls)
    frame = _Frame.of(dist, pred.array(dist))
    out = frame.v.copy()
    for j, ls in enumerate(report.level_sets):
        mask = frame.part.index == j
        out[mask] += ls.correlation * _support(dist, cls[ls.witness].values(dist))[mask]
    return out
