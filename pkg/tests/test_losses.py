import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swapcal.errors import BadGLM, ParseError, UnknownLoss
from swapcal.losses import (LossFamily, LossSpec, builtin, check_nice, eval_extended, from_descriptor, glm_loss,
                            optimal_action, parse_loss, partial, project)

ALL = [builtin("squared"), builtin("half_squared"), builtin("p_power", p=4), builtin("p_power", p=6),
       builtin("logistic", T=10.0), builtin("glm", g="square"), builtin("glm", g="softplus")]
NICE_CONVEX = [builtin("half_squared"), builtin("logistic", T=10.0)]


def test_eval_extended_examples():
    sq = builtin("squared")
    assert eval_extended(sq, 0.5, 0.0) == 0.5
    assert eval_extended(sq, 1.0, 0.25) == 0.5625
    assert eval_extended(builtin("logistic"), 0.5, 0.0) == pytest.approx(math.log(2), abs=1e-15)


def test_partial_examples():
    assert partial(builtin("half_squared"), 0.5) == 0.0
    assert partial(builtin("squared"), 0.0) == 1.0
    for g in ("square", "softplus"):
        loss = builtin("glm", g=g)
        t = np.linspace(-10, 10, 41)
        assert np.array_equal(partial(loss, t), -t)


def test_project_examples():
    sq = builtin("squared")
    assert project(sq, 1.7) == 1.0
    assert project(sq, 0.3) == 0.3
    assert project(sq, -2.0) == 0.0
    assert project(sq, project(sq, 5.0)) == project(sq, 5.0)


def test_optimal_action_examples():
    assert optimal_action(builtin("half_squared"), 0.3) == pytest.approx(0.3, abs=1e-9)
    assert optimal_action(builtin("logistic"), 0.5) == pytest.approx(0.0, abs=1e-9)
    assert optimal_action(builtin("logistic"), 0.75) == pytest.approx(math.log(3), abs=1e-9)


def test_optimal_action_endpoints():
    for p in (2, 4, 6):
        loss = builtin("p_power", p=p)
        assert optimal_action(loss, 0.0) == 0.0
        assert optimal_action(loss, 1.0) == 1.0
    assert optimal_action(builtin("logistic", T=3.0), 1.0) == 3.0
    assert optimal_action(builtin("logistic", T=3.0), 0.0) == -3.0


def test_optimal_action_without_derivatives():
    # same loss as squared, minus derivative hints, exercises the bounded-search path
    loss = LossSpec("sq_plain", lambda t: t**2, lambda t: (1 - t) ** 2, (0.0, 1.0), 1.0)
    for p in np.linspace(0, 1, 11):
        assert optimal_action(loss, p) == pytest.approx(p, abs=1e-6)


def test_optimal_action_nonconvex_smallest_tie():
    # l(p, t) = (t^2 - 1/4)^2 has two minimizers, +-1/2, for every p
    f = lambda t: (np.asarray(t) ** 2 - 0.25) ** 2
    loss = LossSpec("double_well", f, f, (-1.0, 1.0), 1.0, convex=False)
    assert optimal_action(loss, 0.4) == pytest.approx(-0.5, abs=1e-6)


def test_optimal_action_rejects_bad_p():
    with pytest.raises(ValueError):
        optimal_action(builtin("squared"), 1.5)


def test_check_nice_examples():
    assert check_nice(builtin("half_squared"), 0.5) == []
    report = check_nice(builtin("squared"), 0.9)
    bounded = [r for r in report if r.condition == "bounded_difference"]
    assert bounded and bounded[0].worst == pytest.approx(1.0)
    five = LossSpec("five_t", lambda t: 5 * np.asarray(t), lambda t: 5 * np.asarray(t), (0.0, 1.0), 0.0)
    assert "lipschitz" in [r.condition for r in check_nice(five, 100.0)]


def test_check_nice_truncated_logistic_projection_gap():
    # at p in {0, 1} the untruncated loss keeps falling past +-T, by about e^-T
    report = check_nice(builtin("logistic", T=10.0), 10.0)
    assert [r.condition for r in report] == ["optimality"]
    assert report[0].worst == pytest.approx(math.log1p(math.exp(-10)), rel=1e-3)


def test_check_nice_rejects_bad_step():
    with pytest.raises(ValueError):
        check_nice(builtin("squared"), 1.0, grid_step=0)


def test_builtin_intervals_and_bounds():
    l4 = builtin("p_power", p=4)
    assert l4.interval == (0.0, 1.0)
    assert eval_extended(l4, 1.0, 0.5) == 0.0625
    hs = builtin("half_squared")
    assert hs.interval == (0.0, 1.0) and hs.niceness_bound == 0.5
    assert builtin("logistic", T=4.0).interval == (-4.0, 4.0)
    assert builtin("glm", g="softplus").interval == (-10.0, 10.0)


def test_builtin_errors():
    with pytest.raises(UnknownLoss):
        builtin("hinge")
    with pytest.raises(UnknownLoss):
        builtin("glm", g="cube")
    with pytest.raises(ValueError):
        builtin("p_power", p=3)


def test_glm_image_check():
    with pytest.raises(BadGLM):
        glm_loss(lambda t: 0.5 * t, lambda t: np.full_like(np.asarray(t, dtype=float), 0.5))
    with pytest.raises(BadGLM):
        glm_loss(lambda t: -np.cos(t), np.sin)  # g' not monotone
    glm_loss(lambda t: 0.5 * t**2, lambda t: t)


def test_glm_softplus_matches_logistic():
    a, b = builtin("glm", g="softplus"), builtin("logistic")
    t = np.linspace(-10, 10, 101)
    for p in (0.0, 0.3, 1.0):
        assert np.allclose(eval_extended(a, p, t), eval_extended(b, p, t), atol=1e-12)


def test_descriptors():
    l4 = from_descriptor({"name": "p_power", "params": {"p": 4}, "interval": [0, 1]})
    assert l4.name == "l4"
    assert from_descriptor(l4.descriptor()).name == "l4"
    lg = from_descriptor({"name": "logistic", "interval": [-5, 5]})
    assert lg.interval == (-5.0, 5.0)
    with pytest.raises(ParseError):
        from_descriptor({"name": "squared", "interval": [0, 2]})
    with pytest.raises(ParseError):
        from_descriptor({"name": "logistic", "interval": [-1, 5]})
    with pytest.raises(ParseError):
        from_descriptor([])


def test_parse_loss():
    assert parse_loss("squared").name == "squared"
    assert parse_loss("p_power:p=4").name == "l4"
    assert parse_loss("logistic:T=3").interval == (-3.0, 3.0)
    assert parse_loss("glm:g=square,T=2").interval == (-2.0, 2.0)
    assert parse_loss('{"name": "half_squared"}').name == "half_squared"
    with pytest.raises(ParseError):
        parse_loss("p_power:4")
    with pytest.raises(ParseError):
        parse_loss("{bad json")


def test_family():
    fam = LossFamily((builtin("half_squared"), builtin("logistic", T=7.0)))
    assert fam.niceness_bound == 7.0
    with pytest.raises(ValueError):
        LossFamily(())


probs = st.floats(0.0, 1.0)


@given(st.sampled_from(ALL), probs, probs, st.floats(0.0, 1.0))
def test_lipschitz_in_p(loss, p, q, s):
    lo, hi = loss.interval
    t = lo + s * (hi - lo)
    gap = abs(eval_extended(loss, p, t) - eval_extended(loss, q, t))
    assert gap <= loss.niceness_bound * abs(p - q) + 1e-9


@given(st.sampled_from(ALL), probs, probs, st.floats(-20, 20))
def test_partial_difference_identity(loss, p, q, t):
    lhs = eval_extended(loss, p, t) - eval_extended(loss, q, t)
    scale = max(1.0, abs(eval_extended(loss, p, t)), abs(eval_extended(loss, q, t)))
    assert abs(lhs - (p - q) * partial(loss, t)) <= 1e-12 * scale


@given(st.sampled_from(ALL), probs)
def test_optimal_action_minimizes(loss, p):
    lo, hi = loss.interval
    k = optimal_action(loss, p)
    assert lo <= k <= hi
    grid = np.linspace(lo, hi, 2001)
    assert eval_extended(loss, p, k) <= np.min(eval_extended(loss, p, grid)) + 1e-7


@given(st.sampled_from([builtin("glm", g="square"), builtin("glm", g="softplus")]),
       st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_glm_partial_is_negation(loss, values):
    c = np.array(values)
    assert np.array_equal(partial(loss, c), -c)
