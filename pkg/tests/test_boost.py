import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swapcal.audit import audit, swap_agnostic_regret
from swapcal.boost import BoostConfig, bucketize, mcboost, potential, swap_agnostic_learn
from swapcal.distributions import DiscreteJoint, Predictor
from swapcal.errors import BadDelta, DidNotConverge
from swapcal.hypotheses import Hypothesis, HypothesisClass, lin_grid
from swapcal.instances import random_instance
from swapcal.losses import builtin, optimal_action


@pytest.fixture
def two_point():
    dist = DiscreteJoint(("a", "b"), [0.5, 0.5], [0.9, 0.1])
    cls = HypothesisClass((Hypothesis("s", {"a": 1.0, "b": -1.0}),)).closure()
    return dist, cls


def test_config_defaults():
    cfg = BoostConfig(0.05)
    assert cfg.grid_step == 1 / 80 and cfg.lattice == 80
    assert cfg.max_iterations == math.ceil(16 / 0.05**2)
    assert BoostConfig(0.03).grid_step <= 0.03 / 4


def test_config_validation():
    with pytest.raises(ValueError):
        BoostConfig(0.0)
    with pytest.raises(ValueError):
        BoostConfig(0.1, grid_step=0.2)
    with pytest.raises(BadDelta):
        BoostConfig(0.1, grid_step=0.03)
    with pytest.raises(ValueError):
        BoostConfig(0.1, step_rule="fixed")


def test_two_point_converges(two_point):
    dist, cls = two_point
    for alpha, step in ((0.05, 0.0125), (0.01, None)):
        pred, trace = mcboost(dist, cls, BoostConfig(alpha, grid_step=step))
        first = trace.steps[0]
        assert (first.v, first.witness) == (0.5, "s")
        assert first.violation == pytest.approx(0.4, abs=1e-15)
        assert audit(dist, pred, cls).smce <= alpha
    with pytest.raises(ValueError):
        BoostConfig(0.01, grid_step=0.0125)  # a lattice step coarser than alpha is rejected


def test_constant_half_needs_no_iterations():
    dist = DiscreteJoint(("a", "b", "c"), [0.2, 0.3, 0.5], [0.5, 0.5, 0.5])
    cls = HypothesisClass((Hypothesis("h", {"a": 1.0, "b": -0.5, "c": 0.25}),)).closure()
    pred, trace = mcboost(dist, cls, BoostConfig(0.05))
    assert len(trace) == 0 and set(pred.values.values()) == {0.5}


def test_single_exact_step_is_enough(two_point):
    # the least-squares step lands exactly on p*, so one iteration suffices
    dist, cls = two_point
    pred, trace = mcboost(dist, cls, BoostConfig(0.001, grid_step=0.00025, max_iterations=1))
    assert len(trace) == 1 and pred.values == {"a": 0.9, "b": 0.1}


def test_iteration_cap(two_point):
    dist, cls = two_point
    cfg = BoostConfig(0.001, grid_step=0.00025, step_rule="fixed", eta=0.01, max_iterations=1)
    with pytest.raises(DidNotConverge) as info:
        mcboost(dist, cls, cfg)
    err = info.value
    assert err.max_iterations == 1 and len(err.trace) == 1 and err.final_smce > 0.001


def test_stall_is_reported(two_point):
    dist, cls = two_point

    def useless(c, rows):
        return c["0"], 0.4

    with pytest.raises(DidNotConverge) as info:
        mcboost(dist, cls, BoostConfig(0.05, learner=useless))
    assert info.value.reason == "stalled"


def test_custom_learner_matches_builtin(two_point):
    from swapcal.hypotheses import weak_agnostic_learn

    dist, cls = two_point
    a, _ = mcboost(dist, cls, BoostConfig(0.05))
    b, _ = mcboost(dist, cls, BoostConfig(0.05, learner=lambda c, rows: weak_agnostic_learn(c, rows)))
    assert a == b


def test_trace_jsonl(two_point):
    import json

    dist, cls = two_point
    _, trace = mcboost(dist, cls, BoostConfig(0.05))
    lines = trace.to_jsonl().splitlines()
    assert len(lines) == len(trace) and json.loads(lines[0])["witness"] == "s"


@given(st.integers(0, 99), st.sampled_from([0.05, 0.1, 0.2]))
def test_boost_output_and_potential(seed, alpha):
    ri = random_instance(seed)
    cfg = BoostConfig(alpha)
    pred, trace = mcboost(ri.dist, ri.cls, cfg)
    assert audit(ri.dist, pred, ri.cls).smce <= alpha
    assert all(round(v * cfg.lattice) == v * cfg.lattice or v == 0.5 for v in pred.values.values())
    for step in trace.steps:
        assert step.potential_after < step.potential_before
        # least-squares step on a bounded class, less at most delta^2/4 of rounding per unit mass
        assert step.potential_before - step.potential_after >= step.mass * (step.violation**2 - cfg.grid_step**2 / 4) - 1e-12
    if trace.steps:
        assert trace.steps[-1].potential_after == pytest.approx(potential(ri.dist, pred.array(ri.dist)), abs=1e-15)


def test_bucketize_examples():
    pred = Predictor({"a": 0.3, "b": 1.0, "c": 0.0, "d": 0.25, "e": 0.75})
    out = bucketize(pred, 0.25).values
    assert out == {"a": 0.5, "b": 1.0, "c": 0.25, "d": 0.5, "e": 1.0}
    with pytest.raises(BadDelta):
        bucketize(pred, 0.3)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30), st.sampled_from([1 / 4, 1 / 8, 1 / 16, 1 / 10, 1.0]))
def test_bucketize_properties(values, delta):
    pred = Predictor({f"x{i}": v for i, v in enumerate(values)})
    out = bucketize(pred, delta).values
    m = round(1 / delta)
    for k, v in pred.values.items():
        assert 0 <= out[k] - v <= delta
        assert out[k] in {j / m for j in range(1, m + 1)}


def test_swap_agnostic_learn_two_point(two_point):
    dist, cls = two_point
    res = swap_agnostic_learn(dist, cls, builtin("half_squared"), 0.05)
    assert res.regret <= 0.05
    assert res.alpha == pytest.approx(0.05 / (2 * (1 + 0.5 + 1)))


def test_swap_agnostic_learn_glm_logistic(glm):
    dist, _, cls = glm
    loss = builtin("logistic", T=10.0)
    res = swap_agnostic_learn(dist, cls, loss, 0.5, budget=2.0, grid_step=1 / 8)
    assert swap_agnostic_regret(dist, res.hypothesis, loss, lin_grid(cls, 2.0, 1 / 8)) <= 0.5


def test_swap_agnostic_learn_constant_p_star():
    dist = DiscreteJoint(("a", "b", "c"), [0.25, 0.25, 0.5], [0.3, 0.3, 0.3])
    cls = HypothesisClass((Hypothesis("h", {"a": 1.0, "b": -1.0, "c": 0.5}),)).closure()
    for loss in (builtin("half_squared"), builtin("logistic")):
        res = swap_agnostic_learn(dist, cls, loss, 0.1)
        actions = set(res.hypothesis.table.values())
        assert len(actions) == 1
        assert actions.pop() == pytest.approx(optimal_action(loss, 0.3), abs=1e-6)
        assert res.regret <= 1e-9
