"""Finite joint distributions over points and binary labels, and predictors.

Everything here is exact: a distribution is a list of support points with
probability weights and Bayes-optimal label means ``p_star``. Level sets of a
predictor are formed by grouping equal prediction values, where "equal" means
equal after snapping to a fine dyadic grid so that float noise cannot split a
level set.
"""

from __future__ import annotations

import json
import math
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import BadLabel, EmptyInput, EmptyLevelSet, MissingPoint, ParseError

WEIGHT_TOL = 1e-12
DEFAULT_SNAP = 2.0**-32


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Exact joint distribution of ``(x, y)`` with finite support.

    ``p_star[i]`` is ``Pr[y = 1 | x = ids[i]]``. ``features`` optionally maps a
    point id to a real vector (used by the hypercube instances).
    """

    ids: tuple[str, ...]
    weights: np.ndarray
    p_star: np.ndarray
    features: Mapping[str, tuple[float, ...]] | None = None
    _pos: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        w = _frozen(self.weights)
        p = _frozen(self.p_star)
        if not ids:
            raise EmptyInput("distribution has no points")
        if len(set(ids)) != len(ids):
            raise ValueError("point ids must be unique")
        if w.shape != (len(ids),) or p.shape != (len(ids),):
            raise ValueError("weights and p_star must have one entry per point")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("every p_star must lie in [0, 1]")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "p_star", p)
        object.__setattr__(self, "_pos", {pid: k for k, pid in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, point_id: str) -> int:
        try:
            return self._pos[point_id]
        except KeyError:
            raise MissingPoint(point_id) from None

    def align(self, table: Mapping[str, float], what: str = "table") -> np.ndarray:
        """Return ``table`` as an array ordered like ``ids``.

        Only points with positive weight are required to be present; absent
        zero-weight points are filled with NaN.
        """
        out = np.empty(len(self.ids))
        for k, pid in enumerate(self.ids):
            if pid in table:
                out[k] = float(table[pid])
            elif self.weights[k] > 0:
                raise MissingPoint(f"{what} has no value for support point {pid!r}")
            else:
                out[k] = np.nan
        return out

    def expect(self, values) -> float:
        """E_D[g] for a per-point array ``g``."""
        values = np.asarray(values, dtype=float)
        mask = self.weights > 0
        return float(np.dot(self.weights[mask], values[mask]))

    def to_json(self) -> dict:
        points = []
        for k, pid in enumerate(self.ids):
            rec = {"id": pid, "weight": float(self.weights[k]), "p_star": float(self.p_star[k])}
            if self.features is not None and pid in self.features:
                rec["features"] = [float(f) for f in self.features[pid]]
            points.append(rec)
        return {"points": points}

    @classmethod
    def from_json(cls, doc: Mapping) -> DiscreteJoint:
        try:
            points = doc["points"]
            ids = [str(p["id"]) for p in points]
            weights = [float(p["weight"]) for p in points]
            p_star = [float(p["p_star"]) for p in points]
            feats = {str(p["id"]): tuple(float(f) for f in p["features"]) for p in points if "features" in p}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed distribution document: {exc}") from exc
        try:
            return cls(tuple(ids), weights, p_star, feats or None)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc


@dataclass(frozen=True)
class Predictor:
    """A finite-image map from point ids to predictions in [0, 1]."""

    values: Mapping[str, float]

    def __post_init__(self):
        vals = {str(k): float(v) for k, v in self.values.items()}
        for k, v in vals.items():
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"prediction for {k!r} is {v!r}, outside [0, 1]")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, point_id: str) -> float:
        return self.values[point_id]

    @property
    def image_size(self) -> int:
        return len(set(self.values.values()))

    def array(self, dist: DiscreteJoint) -> np.ndarray:
        return dist.align(self.values, "predictor")

    def to_json(self) -> dict:
        return {"values": dict(self.values)}

    @classmethod
    def from_json(cls, doc: Mapping) -> Predictor:
        try:
            return cls({str(k): float(v) for k, v in doc["values"].items()})
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ParseError(f"malformed predictor document: {exc}") from exc

    @classmethod
    def from_array(cls, dist: DiscreteJoint, values) -> Predictor:
        return cls(dict(zip(dist.ids, (float(v) for v in values))))


@dataclass(frozen=True)
class PredictionMarginal:
    entries: tuple[tuple[float, float], ...]

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class LevelSetView:
    v: float
    conditional_weights: Mapping[str, float]
    mass: float


@dataclass(frozen=True, eq=False)
class Partition:
    """Level sets of a real-valued table over a distribution.

    ``values`` are ascending level-set representatives, ``masses`` their
    probabilities, and ``index[i]`` the level set of point ``i`` (``-1`` for
    zero-weight points whose value is outside the image).
    """

    values: np.ndarray
    masses: np.ndarray
    index: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    @property
    def point_values(self) -> np.ndarray:
        """Each point's value replaced by its level-set representative."""
        out = np.full(len(self.index), np.nan)
        ok = self.index >= 0
        out[ok] = self.values[self.index[ok]]
        return out

    def sums(self, x) -> np.ndarray:
        """Per-level-set sums of ``weight * x`` (not normalized).

        ``x`` may be 1-D over points or 2-D ``(rows, points)``.
        """
        return np.asarray(x, dtype=float) @ self.indicator()

    def means(self, x) -> np.ndarray:
        """Conditional expectations E[x | level set] for each level set."""
        return self.sums(x) / self.masses

    def indicator(self) -> np.ndarray:
        """``(points, level_sets)`` matrix holding point weights on a one-hot layout."""
        ind = getattr(self, "_ind", None)
        if ind is None:
            ind = np.zeros((len(self.index), len(self.values)))
            ok = np.flatnonzero(self.index >= 0)
            ind[ok, self.index[ok]] = self.weights[ok]
            object.__setattr__(self, "_ind", ind)
        return ind


def partition(values, weights, snap: float = DEFAULT_SNAP) -> Partition:
    """Group points by value after snapping to ``snap``.

    The representative of a group is the smallest raw value in it, so values
    that already coincide exactly (the normal case) are reported unchanged.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    support = weights > 0
    if not np.all(np.isfinite(values[support])):
        raise ValueError("non-finite value on a support point")
    keys = np.where(np.isfinite(values), np.round(np.nan_to_num(values) / snap), np.inf)
    uniq, inv = np.unique(keys[support], return_inverse=True)
    masses = np.bincount(inv, weights=weights[support], minlength=len(uniq))
    reps = np.full(len(uniq), np.inf)
    np.minimum.at(reps, inv, values[support])

    index = np.full(len(values), -1, dtype=np.intp)
    index[support] = inv
    # zero-weight points join an existing level set when their key matches one
    rest = np.flatnonzero(~support)
    if len(rest):
        pos = np.searchsorted(uniq, keys[rest])
        pos_c = np.minimum(pos, len(uniq) - 1)
        hit = uniq[pos_c] == keys[rest]
        index[rest[hit]] = pos_c[hit]
    reps.setflags(write=False)
    masses.setflags(write=False)
    index.setflags(write=False)
    return Partition(reps, masses, index, weights)


def _partition_pred(pred: Predictor, dist: DiscreteJoint) -> Partition:
    return partition(pred.array(dist), dist.weights)


def image(pred: Predictor, dist: DiscreteJoint) -> list[float]:
    """Ascending distinct prediction values that carry positive mass."""
    return [float(v) for v in _partition_pred(pred, dist).values]


def prediction_marginal(pred: Predictor, dist: DiscreteJoint) -> PredictionMarginal:
    part = _partition_pred(pred, dist)
    return PredictionMarginal(tuple((float(v), float(m)) for v, m in zip(part.values, part.masses)))


def _locate(part: Partition, v: float, snap: float = DEFAULT_SNAP) -> int:
    hits = np.flatnonzero(np.round(part.values / snap) == np.round(float(v) / snap))
    if len(hits) == 0:
        raise EmptyLevelSet(f"prediction value {v!r} has zero mass")
    return int(hits[0])


def level_set(pred: Predictor, dist: DiscreteJoint, v: float) -> LevelSetView:
    part = _partition_pred(pred, dist)
    j = _locate(part, v)
    members = np.flatnonzero((part.index == j) & (dist.weights > 0))
    mass = float(part.masses[j])
    cond = {dist.ids[i]: float(dist.weights[i] / mass) for i in members}
    return LevelSetView(float(part.values[j]), cond, mass)


def conditional_label_mean(pred: Predictor, dist: DiscreteJoint, v: float) -> float:
    """E[y | p(x) = v]."""
    part = _partition_pred(pred, dist)
    j = _locate(part, v)
    return float(np.clip(part.means(dist.p_star)[j], 0.0, 1.0))


def _canonical_id(features) -> tuple[str, tuple[float, ...] | None]:
    if isinstance(features, str):
        return features, None
    if isinstance(features, Sequence) or isinstance(features, np.ndarray):
        vec = tuple(float(f) for f in features)
        return json.dumps(list(vec)), vec
    if isinstance(features, (int, float)):
        vec = (float(features),)
        return json.dumps(list(vec)), vec
    if isinstance(features, Hashable):
        return repr(features), None
    raise TypeError(f"cannot use {type(features).__name__} as point features")


def from_samples(records: Iterable[tuple[object, int]]) -> DiscreteJoint:
    """Empirical distribution of labelled samples.

    Identical feature rows are merged into one point whose weight is its
    frequency and whose ``p_star`` is its empirical label mean. Point order
    follows first appearance.
    """
    counts: dict[str, int] = {}
    positives: dict[str, int] = {}
    feats: dict[str, tuple[float, ...]] = {}
    total = 0
    for features, label in records:
        if label not in (0, 1) or isinstance(label, str):
            raise BadLabel(f"label {label!r} is not 0 or 1")
        pid, vec = _canonical_id(features)
        counts[pid] = counts.get(pid, 0) + 1
        positives[pid] = positives.get(pid, 0) + int(label)
        if vec is not None:
            feats[pid] = vec
        total += 1
    if total == 0:
        raise EmptyInput("no samples")
    ids = tuple(counts)
    weights = np.array([counts[i] for i in ids], dtype=float) / total
    # renormalize exactly so the sum is 1 to within rounding of one division
    weights = weights / math.fsum(weights)
    p_star = np.array([positives[i] / counts[i] for i in ids])
    return DiscreteJoint(ids, weights, p_star, feats or None)
