"""The two counterexample instances and a report checking every separation constant."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .audit import (audit, loss_oi_violations, omniprediction_regret, swap_agnostic_regret,
                    swap_omni_regret)
from .distributions import DiscreteJoint, Predictor
from .hypotheses import Hypothesis, HypothesisClass, compose_partial_class, lin_grid
from .losses import LossFamily, builtin

CHECK_TOL = 1e-9


def _cube_id(point: tuple[int, ...]) -> str:
    return "(" + ",".join(f"{x:+d}" for x in point) + ")"


def _cube(dim: int) -> list[tuple[int, ...]]:
    # first coordinate varies fastest, matching the row order of the table
    return [tuple(reversed(p)) for p in itertools.product((-1, 1), repeat=dim)]


def _coordinate_class(points: list[tuple[int, ...]], dim: int) -> HypothesisClass:
    ids = [_cube_id(p) for p in points]
    members = [Hypothesis.constant("1", 1.0, ids)]
    members += [Hypothesis(f"x{i + 1}", {pid: float(p[i]) for pid, p in zip(ids, points)}) for i in range(dim)]
    return HypothesisClass(tuple(members), True, "C").closure()


def build_parity_instance() -> tuple[DiscreteJoint, Predictor, HypothesisClass]:
    """Uniform cube ``{-1, 1}^3`` with ``p* = (1 + x1 x2 x3) / 2`` and the constant predictor 1/2."""
    points = _cube(3)
    ids = tuple(_cube_id(p) for p in points)
    p_star = [(1 + p[0] * p[1] * p[2]) / 2 for p in points]
    dist = DiscreteJoint(ids, np.full(8, 1 / 8), p_star, {i: tuple(map(float, p)) for i, p in zip(ids, points)})
    return dist, Predictor({i: 0.5 for i in ids}), _coordinate_class(points, 3)


def build_glm_instance() -> tuple[DiscreteJoint, Predictor, HypothesisClass]:
    """Uniform square ``{-1, 1}^2`` with ``p* = (4 + 3 x2 - x1 x2) / 8`` and ``p = (4 + 3 x2) / 8``."""
    points = _cube(2)
    ids = tuple(_cube_id(p) for p in points)
    p_star = [(4 + 3 * x2 - x1 * x2) / 8 for x1, x2 in points]
    pred = {i: (4 + 3 * x2) / 8 for i, (_, x2) in zip(ids, points)}
    dist = DiscreteJoint(ids, np.full(4, 1 / 4), p_star, {i: tuple(map(float, p)) for i, p in zip(ids, points)})
    return dist, Predictor(pred), _coordinate_class(points, 2)


def glm_probe_family(T: float = 10.0) -> LossFamily:
    return LossFamily((builtin("glm", g="square", T=T), builtin("glm", g="softplus", T=T)))


@dataclass(frozen=True)
class SeparationCheck:
    name: str
    relation: str  # "==", "<=", ">="
    bound: float
    value: float
    tol: float = CHECK_TOL
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.relation == "==":
            return abs(self.value - self.bound) <= self.tol
        if self.relation == "<=":
            return self.value <= self.bound + self.tol
        return self.value >= self.bound - self.tol

    def to_json(self) -> dict:
        return {"name": self.name, "relation": self.relation, "bound": self.bound, "value": self.value,
                "tol": self.tol, "passed": self.passed, "note": self.note}


@dataclass(frozen=True)
class SeparationReport:
    checks: tuple[SeparationCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> SeparationCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks]}

    def table(self) -> str:
        rows = [("check", "value", "", "bound", "ok")]
        for c in self.checks:
            rows.append((c.name, f"{c.value:.12g}", c.relation, f"{c.bound:.12g}", "yes" if c.passed else "NO"))
        widths = [max(len(r[k]) for r in rows) for k in range(5)]
        lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(lines)


def _same_functions(a: HypothesisClass, b: HypothesisClass, dist: DiscreteJoint) -> bool:
    key = lambda M: {tuple(np.round(r, 12) + 0.0) for r in M}
    return key(a.matrix(dist)) == key(b.matrix(dist))


def _parity_checks() -> list[SeparationCheck]:
    dist, pred, cls = build_parity_instance()
    l4 = builtin("p_power", p=4)
    report = audit(dist, pred, cls)
    grid = lin_grid(cls, 1.0, 1 / 3)
    oi = loss_oi_violations(dist, pred, l4, grid)
    k = int(np.argmax(oi))
    fine = loss_oi_violations(dist, pred, l4, lin_grid(cls, 1.0, 1 / 24)).max()
    witness = ", ".join(f"{n}={w:+.4g}" for n, w in grid[k].weights.items())
    fam = LossFamily((builtin("half_squared"), l4))
    return [
        SeparationCheck("parity.smce", "==", 0.0, report.smce, 0.0),
        SeparationCheck("parity.swap_omni_regret", "<=", 0.0, swap_omni_regret(dist, pred, fam, grid)),
        SeparationCheck("parity.l4_loss_oi", ">=", 4 / 9, float(oi[k]), note=f"witness {witness}"),
        SeparationCheck("parity.l4_loss_oi_refined", "<=", 4 / 9, float(fine), note="grid step 1/24"),
    ]


def _glm_checks() -> list[SeparationCheck]:
    dist, pred, cls = build_glm_instance()
    sq = builtin("squared")
    report = audit(dist, pred, cls)
    grid2 = lin_grid(cls, 2.0, 1 / 8)
    oi = max(float(loss_oi_violations(dist, pred, loss, grid2).max()) for loss in glm_probe_family())
    return [
        SeparationCheck("glm.calibration_error", "==", 0.0, report.calibration_error, 1e-12),
        SeparationCheck("glm.multiaccuracy_error", "==", 0.0, report.multiaccuracy_error, 1e-12),
        SeparationCheck("glm.mce", ">=", 1 / 8, report.mce, 1e-12),
        SeparationCheck("glm.omni_regret_squared", "<=", 0.0, omniprediction_regret(dist, pred, sq, lin_grid(cls, 1.0, 1 / 8))),
        SeparationCheck("glm.loss_oi_glm", "<=", 0.0, oi, note="max over probe GLM losses and Lin(C, 2) grid"),
        SeparationCheck("glm.swap_regret_squared", ">=", 1 / 64, swap_agnostic_regret(dist, pred, sq, grid2), 1e-12),
    ]


def _collapse_checks() -> list[SeparationCheck]:
    checks = []
    for label, build in (("parity", build_parity_instance), ("glm", build_glm_instance)):
        dist, _, cls = build()
        same = _same_functions(compose_partial_class(glm_probe_family(), cls), cls, dist)
        checks.append(SeparationCheck(f"{label}.glm_partial_class_equals_C", "==", 1.0, float(same), 0.0))
    return checks


def verify_separations() -> SeparationReport:
    return SeparationReport(tuple(_parity_checks() + _glm_checks() + _collapse_checks()))
