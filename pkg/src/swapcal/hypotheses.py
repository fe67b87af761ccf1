"""Tabular hypothesis classes, their sparse linear spans, and the exact weak learner."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteJoint
from .errors import EmptyClass, EmptyCompetitors, GridTooLarge, ParseError, UnknownMember
from .losses import LossFamily, LossSpec, family as as_family, partial

BOUND_TOL = 1e-12
DEFAULT_GRID_CAP = 10**7
_KEY_DIGITS = 12


@dataclass(frozen=True)
class Hypothesis:
    name: str
    table: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "table", {str(k): float(v) for k, v in self.table.items()})

    def __call__(self, point_id: str) -> float:
        return self.table[point_id]

    @property
    def sup_norm(self) -> float:
        return max((abs(v) for v in self.table.values()), default=0.0)

    def values(self, dist: DiscreteJoint) -> np.ndarray:
        return dist.align(self.table, f"hypothesis {self.name!r}")

    def negated(self, name: str | None = None) -> Hypothesis:
        return Hypothesis(name or _negated_name(self.name), {k: -v for k, v in self.table.items()})

    @classmethod
    def constant(cls, name: str, value: float, ids: Iterable[str]) -> Hypothesis:
        return cls(name, {i: float(value) for i in ids})

    @classmethod
    def from_array(cls, name: str, dist: DiscreteJoint, values) -> Hypothesis:
        return cls(name, dict(zip(dist.ids, (float(v) for v in values))))


def _negated_name(name: str) -> str:
    if name.startswith("-"):
        return name[1:]
    return "-" + name


def _key(values: np.ndarray) -> tuple:
    return tuple(np.round(values, _KEY_DIGITS) + 0.0)


@dataclass(frozen=True)
class HypothesisClass:
    members: tuple[Hypothesis, ...]
    bounded: bool = True
    name: str = "C"

    def __post_init__(self):
        members = tuple(self.members)
        names = [m.name for m in members]
        if len(set(names)) != len(names):
            raise ValueError("hypothesis names must be unique within a class")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.members]

    def __getitem__(self, name: str) -> Hypothesis:
        for m in self.members:
            if m.name == name:
                return m
        raise UnknownMember(name)

    def ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for m in self.members:
            seen.update(dict.fromkeys(m.table))
        return list(seen)

    def matrix(self, dist: DiscreteJoint) -> np.ndarray:
        """``(members, points)`` array of hypothesis values."""
        if not self.members:
            return np.zeros((0, len(dist)))
        return np.vstack([m.values(dist) for m in self.members])

    def _table_matrix(self, ids: Sequence[str]) -> np.ndarray:
        return np.array([[m.table.get(i, np.nan) for i in ids] for m in self.members], dtype=float)

    def closure(self) -> HypothesisClass:
        """The class completed with constants 0, 1, -1 and all negations."""
        ids = self.ids()
        members = list(self.members)
        keys = {_key(np.array([m.table[i] for i in ids])) for m in members}
        names = {m.name for m in members}

        def add(h: Hypothesis):
            k = _key(np.array([h.table[i] for i in ids]))
            if k in keys:
                return
            name = h.name
            while name in names:
                name = name + "'"
            members.append(Hypothesis(name, h.table))
            keys.add(k)
            names.add(name)

        for value, label in ((0.0, "0"), (1.0, "1"), (-1.0, "-1")):
            add(Hypothesis.constant(label, value, ids))
        for m in list(members):
            add(m.negated())
        return HypothesisClass(tuple(members), self.bounded, self.name)

    def representatives(self) -> list[Hypothesis]:
        """One member from each {c, -c} pair, skipping the zero function.

        ``Lin(C, W)`` is the same set whether spanned by the whole
        negation-closed class or by these representatives.
        """
        ids = self.ids()
        seen: set[tuple] = set()
        reps = []
        for m in self.members:
            vec = np.array([m.table[i] for i in ids])
            k, nk = _key(vec), _key(-vec)
            if np.all(np.round(vec, _KEY_DIGITS) == 0) or k in seen or nk in seen:
                continue
            seen.add(k)
            reps.append(m)
        return reps

    def to_json(self) -> dict:
        return {"members": [{"name": m.name, "table": dict(m.table)} for m in self.members],
                "bounded": self.bounded}

    @classmethod
    def from_json(cls, doc: Mapping, name: str = "C") -> HypothesisClass:
        try:
            members = tuple(Hypothesis(str(m["name"]), {str(k): float(v) for k, v in m["table"].items()})
                            for m in doc["members"])
            bounded = bool(doc.get("bounded", True))
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ParseError(f"malformed class document: {exc}") from exc
        try:
            return cls(members, bounded, doc.get("name", name))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc


@dataclass(frozen=True)
class ClassIssue:
    kind: str  # "missing_constant" | "missing_negation" | "bound" | "missing_point"
    member: str
    detail: str = ""


def validate_class(cls: HypothesisClass, dist: DiscreteJoint | None = None) -> list[ClassIssue]:
    """List every way ``cls`` breaks the standing assumptions; empty means valid."""
    ids = list(dist.ids) if dist is not None else cls.ids()
    issues: list[ClassIssue] = []
    rows = []
    for m in cls.members:
        missing = [i for i in ids if i not in m.table]
        if missing:
            issues.append(ClassIssue("missing_point", m.name, f"no value at {missing[0]!r}"))
        rows.append(np.array([m.table.get(i, np.nan) for i in ids]))
    # compare functions only where every member is defined
    M = np.array(rows).reshape(len(rows), len(ids))
    M = M[:, ~np.isnan(M).any(axis=0)]
    keys = {_key(r) for r in M}
    for value, label in ((0.0, "0"), (1.0, "1")):
        if _key(np.full(M.shape[1], value)) not in keys:
            issues.append(ClassIssue("missing_constant", label))
    for m, r in zip(cls.members, M):
        if _key(-r) not in keys:
            issues.append(ClassIssue("missing_negation", m.name, f"no member equals -{m.name}"))
    if cls.bounded:
        for m, r in zip(cls.members, rows):
            sup = float(np.max(np.abs(r[~np.isnan(r)]), initial=0.0))
            if sup > 1 + BOUND_TOL:
                issues.append(ClassIssue("bound", m.name, f"sup norm {sup:g} > 1"))
    return issues


@dataclass(frozen=True)
class LinCombination:
    """``sum_c w_c c(x)`` with ``sum |w_c| <= budget``."""

    weights: Mapping[str, float]
    budget: float
    basis: HypothesisClass | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        w = {str(k): float(v) for k, v in self.weights.items()}
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if math.fsum(abs(v) for v in w.values()) > self.budget + BOUND_TOL:
            raise ValueError(f"weights {w} exceed budget {self.budget}")
        object.__setattr__(self, "weights", w)

    def values(self, dist: DiscreteJoint, cls: HypothesisClass | None = None) -> np.ndarray:
        cls = cls or self.basis
        if cls is None:
            raise ValueError("a basis class is needed to evaluate a linear combination")
        out = np.zeros(len(dist))
        for name, w in self.weights.items():
            if w:
                out += w * cls[name].values(dist)
        return out


def eval_lin(lin: LinCombination, cls: HypothesisClass, x: str) -> float:
    total = 0.0
    for name, w in lin.weights.items():
        member = cls[name]
        if x not in member.table:
            raise UnknownMember(f"{name!r} has no value at {x!r}")
        total += w * member.table[x]
    return total


@dataclass(frozen=True, eq=False)
class LinGrid:
    """Every combination of ``names`` with coefficients on an l1-ball lattice.

    ``coefficients`` has one row per combination; rows are ordered
    deterministically with the zero vector first.
    """

    names: tuple[str, ...]
    coefficients: np.ndarray
    budget: float
    step: float
    basis: HypothesisClass

    def __len__(self) -> int:
        return len(self.coefficients)

    def __getitem__(self, k: int) -> LinCombination:
        row = self.coefficients[k]
        return LinCombination({n: float(w) for n, w in zip(self.names, row) if w != 0}, self.budget, self.basis)

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def values(self, dist: DiscreteJoint) -> np.ndarray:
        if not self.names:
            return np.zeros((len(self), len(dist)))
        basis = np.vstack([self.basis[n].values(dist) for n in self.names])
        return self.coefficients @ basis

    def find(self, weights: Mapping[str, float], tol: float = 1e-12) -> int:
        """Row index of the combination with these weights, or -1."""
        target = np.array([weights.get(n, 0.0) for n in self.names])
        hits = np.flatnonzero(np.all(np.abs(self.coefficients - target) <= tol, axis=1))
        return int(hits[0]) if len(hits) else -1


def _ball_size(dim: int, radius: int) -> int:
    return sum(math.comb(dim, k) * 2**k * math.comb(radius, k) for k in range(min(dim, radius) + 1))


def lin_grid(cls: HypothesisClass, W: float, step: float, cap: int = DEFAULT_GRID_CAP) -> LinGrid:
    """Finite proxy for ``Lin(C, W)``: the l1 ball of radius W on a lattice of spacing ``step``.

    Coordinates are one representative per {c, -c} pair (the zero function is
    dropped), which spans the same set as the full class. The single-member
    vertices ``+-W`` are always included.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if W < 0:
        raise ValueError("budget must be nonnegative")
    reps = cls.representatives()
    dim = len(reps)
    radius = int(math.floor(W / step + 1e-9))
    size = _ball_size(dim, radius)
    on_lattice = abs(radius * step - W) <= 1e-9 * max(W, 1.0)
    if size + (0 if on_lattice else 2 * dim) > cap:
        raise GridTooLarge(f"grid over {dim} coordinates with radius {radius} has {size} points (cap {cap})")

    rows = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    for _ in range(dim):
        parts, uses = [], []
        for v in sorted(range(-radius, radius + 1), key=lambda a: (abs(a), -a)):
            ok = used + abs(v) <= radius
            if not ok.any():
                continue
            parts.append(np.hstack([rows[ok], np.full((int(ok.sum()), 1), v, dtype=np.int64)]))
            uses.append(used[ok] + abs(v))
        rows = np.vstack(parts)
        used = np.concatenate(uses)
    order = np.lexsort(tuple(np.abs(rows).T[::-1]) + (used,))
    coeffs = rows[order].astype(float) * step
    if not on_lattice and dim:
        verts = np.vstack([np.eye(dim) * W, -np.eye(dim) * W])
        coeffs = np.vstack([coeffs, verts])
    coeffs.setflags(write=False)
    return LinGrid(tuple(m.name for m in reps), coeffs, float(W), float(step), cls)


def competitor_values(competitors, dist: DiscreteJoint) -> np.ndarray:
    """Stack a competitor set into a ``(competitors, points)`` array.

    Accepts a ``HypothesisClass``, a ``LinGrid``, a sequence of ``Hypothesis``
    or ``LinCombination`` (with a basis), or a ready-made 2-D array.
    """
    if isinstance(competitors, np.ndarray):
        out = np.atleast_2d(np.asarray(competitors, dtype=float))
    elif isinstance(competitors, (HypothesisClass, LinGrid)):
        out = competitors.matrix(dist) if isinstance(competitors, HypothesisClass) else competitors.values(dist)
    elif isinstance(competitors, (Hypothesis, LinCombination)):
        out = competitor_values([competitors], dist)
    else:
        rows = []
        for c in competitors:
            rows.append(c.values(dist))
        out = np.vstack(rows) if rows else np.zeros((0, len(dist)))
    if out.shape[0] == 0:
        raise EmptyCompetitors("competitor set is empty")
    return out


def compose_partial_class(losses: LossFamily | Sequence[LossSpec] | LossSpec, cls: HypothesisClass) -> HypothesisClass:
    """The class ``{x -> dl(c(x)) : l in L, c in C}``, deduplicated and closure-completed."""
    fam = as_family(losses)
    ids = cls.ids()
    members: list[Hypothesis] = []
    keys: set[tuple] = set()
    for loss in fam:
        for c in cls.members:
            vals = partial(loss, np.array([c.table[i] for i in ids]))
            k = _key(np.atleast_1d(vals))
            if k in keys:
                continue
            keys.add(k)
            members.append(Hypothesis(f"d{loss.name}({c.name})", dict(zip(ids, np.atleast_1d(vals).tolist()))))
    bounded = all(abs(v) <= 1 + BOUND_TOL for m in members for v in m.table.values())
    return HypothesisClass(tuple(members), bounded, f"dL({cls.name})").closure()


def _best_member(names: Sequence[str], scores: np.ndarray) -> tuple[int, float]:
    """Index of the largest score, ties going to the lexicographically smallest name."""
    top = float(np.max(scores))
    cands = [k for k in range(len(names)) if scores[k] == top]
    k = min(cands, key=lambda j: names[j])
    return k, top


def weak_agnostic_learn(cls: HypothesisClass, weighted_residuals: Iterable[tuple[str, float, float]]
                        ) -> tuple[Hypothesis, float]:
    """Exhaustive weak agnostic learner: the member maximizing ``E[c(x) z]``.

    ``weighted_residuals`` holds ``(point_id, weight, z)`` triples with
    nonnegative weights summing to one and ``z`` in [-1, 1].
    """
    if not cls.members:
        raise EmptyClass("cannot learn over an empty class")
    data = list(weighted_residuals)
    ids = [d[0] for d in data]
    w = np.array([d[1] for d in data], dtype=float)
    z = np.array([d[2] for d in data], dtype=float)
    if np.any(w < 0) or (len(w) and abs(math.fsum(w) - 1.0) > 1e-9):
        raise ValueError("weights must be nonnegative and sum to one")
    if np.any(np.abs(z) > 1 + 1e-12):
        raise ValueError("residuals must lie in [-1, 1]")
    M = np.array([[m.table.get(i, np.nan) for i in ids] for m in cls.members], dtype=float)
    if np.isnan(M).any():
        raise UnknownMember("a class member is undefined at a residual point")
    k, score = _best_member(cls.names, M @ (w * z))
    return cls.members[k], score
