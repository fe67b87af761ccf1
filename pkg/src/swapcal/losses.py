"""Losses over binary outcomes and their optimal post-processing.

A loss is given by its two outcome branches ``l(0, t)`` and ``l(1, t)``. It is
extended linearly to fractional outcomes, ``l(p, t) = p l(1, t) + (1 - p) l(0, t)``,
which is the expected loss when ``y ~ Ber(p)``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .errors import BadGLM, ParseError, UnknownLoss

ACTION_TOL = 1e-9
VALUE_TOL = 1e-12
NICE_TOL = 1e-6
DEFAULT_T = 10.0

Branch = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class LossSpec:
    """A loss ``l(y, t)`` with action interval ``I = [lo, hi]`` and niceness bound ``B``.

    ``deriv0``/``deriv1`` are optional derivatives of the two branches; when
    present (and the loss is convex) the optimal action is found by bisection
    on the derivative. ``partial_fn`` overrides ``l(1, t) - l(0, t)`` when a
    closed form is known.
    """

    name: str
    eval0: Branch
    eval1: Branch
    interval: tuple[float, float]
    niceness_bound: float
    convex: bool = True
    deriv0: Branch | None = None
    deriv1: Branch | None = None
    partial_fn: Branch | None = None
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = (float(x) for x in self.interval)
        if not lo <= hi:
            raise ValueError(f"empty action interval [{lo}, {hi}]")
        if self.niceness_bound < 0:
            raise ValueError("niceness bound must be nonnegative")
        object.__setattr__(self, "interval", (lo, hi))

    def __repr__(self) -> str:
        return f"LossSpec({self.name!r}, I={list(self.interval)}, B={self.niceness_bound})"

    def descriptor(self) -> dict:
        return {"name": self.params.get("kind", self.name), "params": {k: v for k, v in self.params.items() if k != "kind"},
                "interval": list(self.interval)}


@dataclass(frozen=True)
class LossFamily:
    losses: tuple[LossSpec, ...]

    def __post_init__(self):
        losses = tuple(self.losses)
        if not losses:
            raise ValueError("a loss family needs at least one loss")
        object.__setattr__(self, "losses", losses)

    @property
    def niceness_bound(self) -> float:
        return max(l.niceness_bound for l in self.losses)

    def __iter__(self):
        return iter(self.losses)

    def __len__(self) -> int:
        return len(self.losses)


def eval_extended(loss: LossSpec, p, t):
    """Expected loss of action ``t`` when ``y ~ Ber(p)``; broadcasts."""
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    out = p * loss.eval1(t) + (1.0 - p) * loss.eval0(t)
    return float(out) if out.ndim == 0 else out


def partial(loss: LossSpec, t):
    """Discrete derivative ``l(1, t) - l(0, t)``."""
    t = np.asarray(t, dtype=float)
    out = loss.partial_fn(t) if loss.partial_fn is not None else loss.eval1(t) - loss.eval0(t)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def project(loss: LossSpec, t):
    lo, hi = loss.interval
    out = np.clip(np.asarray(t, dtype=float), lo, hi)
    return float(out) if out.ndim == 0 else out


def _bisect_derivative(loss: LossSpec, p: float) -> float:
    lo, hi = loss.interval

    def slope(t: float) -> float:
        return float(p * loss.deriv1(np.float64(t)) + (1.0 - p) * loss.deriv0(np.float64(t)))

    if slope(lo) >= 0:
        return lo
    if slope(hi) < 0:
        return hi
    # smallest t with slope(t) >= 0, i.e. the leftmost minimizer
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if slope(mid) >= 0:
            b = mid
        else:
            a = mid
    return b


def _refine(loss: LossSpec, p: float, a: float, b: float) -> float:
    res = minimize_scalar(lambda t: eval_extended(loss, p, t), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    return float(res.x)


def _best_of(loss: LossSpec, p: float, candidates) -> float:
    cands = sorted(set(float(c) for c in candidates))
    vals = [eval_extended(loss, p, c) for c in cands]
    best = min(vals)
    for c, v in zip(cands, vals):
        if v <= best + VALUE_TOL:
            return c
    return cands[0]


def _optimal_action(loss: LossSpec, p: float) -> float:
    lo, hi = loss.interval
    if lo == hi:
        return lo
    if loss.convex and loss.deriv0 is not None and loss.deriv1 is not None:
        return _bisect_derivative(loss, p)
    if loss.convex:
        t = _refine(loss, p, lo, hi)
        return _best_of(loss, p, [lo, t, hi])
    grid = np.linspace(lo, hi, 20001)
    vals = eval_extended(loss, p, grid)
    k = int(np.argmin(vals))
    t = _refine(loss, p, grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)])
    return _best_of(loss, p, [grid[k], t])


@lru_cache(maxsize=65536)
def _cached_action(loss: LossSpec, p: float) -> float:
    return _optimal_action(loss, p)


def optimal_action(loss: LossSpec, p: float) -> float:
    """``k_l(p)``: an action in ``I`` minimizing ``l(p, .)``, smallest on ties."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p!r} is not a probability")
    return _cached_action(loss, p)


def optimal_actions(loss: LossSpec, ps) -> np.ndarray:
    return np.array([optimal_action(loss, p) for p in np.asarray(ps, dtype=float).ravel()]).reshape(np.shape(ps))


@dataclass(frozen=True)
class NicenessViolation:
    condition: str  # "bounded_difference" | "lipschitz" | "optimality"
    worst: float
    detail: str


def check_nice(loss: LossSpec, B: float, grid_step: float = 1e-3) -> list[NicenessViolation]:
    """Check the three niceness conditions on a grid; an empty list means nice.

    Bounded difference and Lipschitzness are checked on ``I``; optimality of
    projection is checked for actions on a grid extending past both ends of
    ``I`` and for outcome probabilities in steps of 0.05.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    lo, hi = loss.interval
    n = max(int(math.ceil((hi - lo) / grid_step)), 1)
    t = np.linspace(lo, hi, n + 1)
    report: list[NicenessViolation] = []

    d = np.abs(partial(loss, t))
    k = int(np.argmax(d))
    if d[k] > B + NICE_TOL:
        report.append(NicenessViolation("bounded_difference", float(d[k]),
                                        f"|dl({t[k]:.6g})| = {d[k]:.6g} > B = {B:g}"))

    if n >= 1 and hi > lo:
        worst, where = 0.0, ""
        for y, branch in ((0, loss.eval0), (1, loss.eval1)):
            v = np.asarray(branch(t), dtype=float)
            slope = np.abs(np.diff(v)) / np.diff(t)
            j = int(np.argmax(slope))
            if slope[j] > worst:
                worst, where = float(slope[j]), f"l({y}, .) on [{t[j]:.6g}, {t[j + 1]:.6g}]"
        if worst > 1 + NICE_TOL:
            report.append(NicenessViolation("lipschitz", worst, f"slope {worst:.6g} > 1 for {where}"))

    width = max(hi - lo, 1.0)
    ts = np.linspace(lo - width, hi + width, 3 * n + 1)
    ps = np.linspace(0.0, 1.0, 21)
    gap = eval_extended(loss, ps[:, None], np.clip(ts, lo, hi)[None, :]) - eval_extended(loss, ps[:, None], ts[None, :])
    i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
    if gap[i, j] > NICE_TOL:
        report.append(NicenessViolation("optimality", float(gap[i, j]),
                                        f"projecting t={ts[j]:.6g} raises l({ps[i]:.2f}, .) by {gap[i, j]:.3g}"))
    return report


# --- built-in losses -------------------------------------------------------

def _power(p: int) -> LossSpec:
    return LossSpec(
        name="squared" if p == 2 else f"l{p}",
        eval0=lambda t: t**p,
        eval1=lambda t: (1.0 - t) ** p,
        deriv0=lambda t: p * t ** (p - 1),
        deriv1=lambda t: -p * (1.0 - t) ** (p - 1),
        # k(0) = 0 and k(1) = 1 for every even power
        interval=(0.0, 1.0),
        niceness_bound=1.0,
        params={"kind": "squared"} if p == 2 else {"kind": "p_power", "p": p},
    )


def _half_squared() -> LossSpec:
    return LossSpec(
        name="half_squared",
        eval0=lambda t: 0.5 * t**2,
        eval1=lambda t: 0.5 * (1.0 - t) ** 2,
        deriv0=lambda t: t,
        deriv1=lambda t: t - 1.0,
        partial_fn=lambda t: 0.5 - t,
        interval=(0.0, 1.0),
        niceness_bound=0.5,
        params={"kind": "half_squared"},
    )


def _softplus(t):
    return np.logaddexp(0.0, t)


def _logistic(T: float) -> LossSpec:
    return LossSpec(
        name="logistic",
        eval0=_softplus,
        eval1=lambda t: _softplus(-t),
        deriv0=expit,
        deriv1=lambda t: -expit(-t),
        interval=(-T, T),
        niceness_bound=T,
        params={"kind": "logistic", "T": T},
    )


GLM_LINKS: dict[str, tuple[Branch, Branch]] = {
    "square": (lambda t: 0.5 * t**2, lambda t: t),
    "softplus": (_softplus, expit),
}


def glm_loss(g: Branch, dg: Branch, T: float = DEFAULT_T, name: str = "glm", probe: float = 50.0,
             params: Mapping[str, object] | None = None) -> LossSpec:
    """Matching loss ``l_g(y, t) = g(t) - y t`` of a convex link ``g``.

    ``dg`` is the derivative of ``g``. The closure of its image must contain
    [0, 1]; this is probed on ``[-probe, probe]``.
    """
    grid = np.linspace(-probe, probe, 200001)
    slopes = np.asarray(dg(grid), dtype=float)
    if not np.all(np.isfinite(slopes)):
        raise BadGLM(f"{name}: derivative is not finite on the probe grid")
    if np.any(np.diff(slopes) < -1e-9):
        raise BadGLM(f"{name}: derivative is decreasing somewhere, so g is not convex")
    if slopes.min() > NICE_TOL or slopes.max() < 1.0 - NICE_TOL:
        raise BadGLM(f"{name}: image of g' is about [{slopes.min():.3g}, {slopes.max():.3g}], "
                     f"which does not cover [0, 1]")
    return LossSpec(
        name=name,
        eval0=g,
        eval1=lambda t: g(t) - t,
        deriv0=dg,
        deriv1=lambda t: dg(t) - 1.0,
        partial_fn=lambda t: -np.asarray(t, dtype=float),
        interval=(-T, T),
        niceness_bound=T,
        params=dict(params or {}),
    )


def builtin(name: str, **params) -> LossSpec:
    """Construct one of the built-in losses.

    ``squared``, ``half_squared``, ``p_power`` (``p`` even), ``logistic``
    (``T``) and ``glm`` (``g`` naming a link in ``GLM_LINKS``, ``T``).
    """
    if name == "squared":
        return _power(2)
    if name == "half_squared":
        return _half_squared()
    if name == "p_power":
        p = params.get("p")
        if not isinstance(p, (int, np.integer)) or isinstance(p, bool) or p < 2 or p % 2:
            raise ValueError(f"p_power needs an even integer p >= 2, got {p!r}")
        return _power(int(p))
    if name == "logistic":
        return _logistic(float(params.get("T", DEFAULT_T)))
    if name == "glm":
        link = params.get("g", "softplus")
        if link not in GLM_LINKS:
            raise UnknownLoss(f"unknown GLM link {link!r}; known: {sorted(GLM_LINKS)}")
        T = float(params.get("T", DEFAULT_T))
        g, dg = GLM_LINKS[link]
        return glm_loss(g, dg, T=T, name=f"glm_{link}", params={"kind": "glm", "g": link, "T": T})
    raise UnknownLoss(f"unknown loss {name!r}")


def from_descriptor(doc: Mapping) -> LossSpec:
    """Build a loss from ``{"name": ..., "params": {...}, "interval": [lo, hi]}``."""
    try:
        name = doc["name"]
        params = dict(doc.get("params", {}))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed loss descriptor: {exc}") from exc
    if name in ("logistic", "glm") and "interval" in doc:
        lo, hi = doc["interval"]
        if lo != -hi:
            raise ParseError(f"{name} takes a symmetric interval [-T, T], got {doc['interval']}")
        params.setdefault("T", float(hi))
    spec = builtin(name, **params)
    if "interval" in doc and name not in ("logistic", "glm"):
        if tuple(float(x) for x in doc["interval"]) != spec.interval:
            raise ParseError(f"{name} has interval {list(spec.interval)}, not {doc['interval']}")
    return spec


def parse_loss(text: str) -> LossSpec:
    """Parse a command-line loss: JSON descriptor or ``name[:key=value,...]``."""
    text = text.strip()
    if text.startswith("{"):
        import json

        try:
            return from_descriptor(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad loss JSON: {exc}") from exc
    name, _, rest = text.partition(":")
    params: dict[str, object] = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ParseError(f"bad loss parameter {item!r}")
        try:
            params[key] = int(val)
        except ValueError:
            try:
                params[key] = float(val)
            except ValueError:
                params[key] = val
    return builtin(name, **params)


def family(losses: Sequence[LossSpec] | LossSpec) -> LossFamily:
    if isinstance(losses, LossSpec):
        return LossFamily((losses,))
    if isinstance(losses, LossFamily):
        return losses
    return LossFamily(tuple(losses))
