"""Seeded random instances for property tests and the CLI."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteJoint, Predictor
from .hypotheses import Hypothesis, HypothesisClass

MAX_POINTS = 16
MAX_BASE_MEMBERS = 6


@dataclass(frozen=True)
class RandomInstance:
    seed: int
    dist: DiscreteJoint
    pred: Predictor
    cls: HypothesisClass


def _point_id(p) -> str:
    return "(" + ",".join(f"{x:+d}" for x in p) + ")"


def random_instance(seed: int, max_points: int = MAX_POINTS, max_members: int = MAX_BASE_MEMBERS,
                    pred_lattice: int = 8) -> RandomInstance:
    """A small hypercube instance drawn from ``seed``.

    Points are a random subset of ``{-1, 1}^d`` (at most ``max_points``), the
    class starts from at most ``max_members`` bounded functions (coordinates,
    products of coordinates and random tables on a 1/4 lattice) and is then
    closure-completed. Predictions sit on a lattice of size ``pred_lattice`` so
    that level sets usually hold several points.
    """
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 5))
    cube = [tuple(reversed(p)) for p in itertools.product((-1, 1), repeat=dim)]
    n = int(rng.integers(3, min(max_points, len(cube)) + 1))
    points = [cube[k] for k in sorted(rng.choice(len(cube), size=n, replace=False))]
    ids = tuple(_point_id(p) for p in points)
    X = np.array(points, dtype=float)

    raw = rng.uniform(0.2, 1.0, size=n)
    weights = raw / raw.sum()
    p_star = np.round(rng.uniform(0, 1, size=n) * 16) / 16

    members: list[Hypothesis] = []
    n_members = int(rng.integers(1, max_members + 1))
    for k in range(n_members):
        kind = rng.integers(3)
        if kind == 0:
            i = int(rng.integers(dim))
            vals = X[:, i]
        elif kind == 1:
            i, j = rng.choice(dim, size=2, replace=False)
            vals = X[:, i] * X[:, j]
        else:
            vals = rng.integers(-4, 5, size=n) / 4
        members.append(Hypothesis(f"h{k}", dict(zip(ids, vals.tolist()))))
    cls = HypothesisClass(tuple(members), True, "C").closure()

    noise = rng.uniform(-0.25, 0.25, size=n)
    pred_vals = np.clip(np.round((p_star + noise) * pred_lattice) / pred_lattice, 0, 1)
    dist = DiscreteJoint(ids, weights, p_star, {i: tuple(p) for i, p in zip(ids, X.tolist())})
    return RandomInstance(seed, dist, Predictor(dict(zip(ids, pred_vals.tolist()))), cls)
