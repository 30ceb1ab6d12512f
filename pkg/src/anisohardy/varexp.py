"""Variable exponents p(.), the modular and the Luxemburg-Nakano quasi-norm."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import sampling
from .errors import BracketFailure

FAMILIES = ("constant", "log_perturbed", "piecewise_test")
MAX_DOUBLINGS = 120
REL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ExponentFunction:
    """A parametric exponent with exact extremes.

    ``log_perturbed`` evaluates p(x) = min(1, p_inf + amplitude/ln(e + rho(x)))
    with rho the step quasi-norm of ``dilation``. ``piecewise_test`` is a list
    of half-open boxes ``(lo, hi, value)`` over a ``default`` value; it is
    meant for oracle tests and is not log-Holder continuous.
    """

    family: str
    params: dict = field(default_factory=dict)
    dilation: object = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown exponent family {self.family!r}")
        if self.family == "log_perturbed":
            if self.dilation is None:
                raise ValueError("log_perturbed exponent needs a dilation")
            pinf, amp = self.params["p_inf"], self.params["amplitude"]
            if not 0.0 < pinf <= 1.0:
                raise ValueError("p_inf must lie in (0, 1]")
            if pinf + amp <= 0.0:
                raise ValueError("p_inf + amplitude must be positive")
        if not 0.0 < self.p_minus <= self.p_plus:
            raise ValueError("exponent extremes must satisfy 0 < p_minus <= p_plus")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        if self.family == "constant":
            return np.full(shape, float(self.params["p0"]))
        if self.family == "log_perturbed":
            rho = self.dilation.rho(x)
            val = self.params["p_inf"] + self.params["amplitude"] / np.log(math.e + rho)
            return np.minimum(1.0, val)
        out = np.full(shape, float(self.params.get("default", 1.0)))
        for lo, hi, value in self.params["pieces"]:
            inside = np.all((x >= np.asarray(lo)) & (x < np.asarray(hi)), axis=-1)
            out[inside] = value
        return out

    @property
    def _extreme_values(self) -> list[float]:
        if self.family == "constant":
            return [float(self.params["p0"])]
        if self.family == "log_perturbed":
            pinf, amp = self.params["p_inf"], self.params["amplitude"]
            return [min(1.0, pinf), min(1.0, pinf + amp)]
        vals = [float(v) for _, _, v in self.params["pieces"]]
        return vals + [float(self.params.get("default", 1.0))]

    @property
    def p_minus(self) -> float:
        return min(self._extreme_values)

    @property
    def p_plus(self) -> float:
        return max(self._extreme_values)

    @property
    def p_underline(self) -> float:
        return min(self.p_minus, 1.0)

    @property
    def log_holder_constants(self) -> dict | None:
        if self.family == "constant":
            return {"C_log": 0.0, "C_inf": 0.0, "p_inf": float(self.params["p0"])}
        if self.family == "log_perturbed":
            return {"C_log": None, "C_inf": abs(self.params["amplitude"]),
                    "p_inf": min(1.0, self.params["p_inf"])}
        return None


def constant(p0: float) -> ExponentFunction:
    return ExponentFunction("constant", {"p0": float(p0)})


def log_perturbed(p_inf: float, amplitude: float, dilation) -> ExponentFunction:
    return ExponentFunction("log_perturbed", {"p_inf": float(p_inf), "amplitude": float(amplitude)},
                            dilation)


def piecewise_test(pieces, default: float = 1.0) -> ExponentFunction:
    pieces = tuple((tuple(np.atleast_1d(lo)), tuple(np.atleast_1d(hi)), float(v))
                   for lo, hi, v in pieces)
    return ExponentFunction("piecewise_test", {"pieces": pieces, "default": float(default)})


def from_spec(spec: dict, dilation=None) -> ExponentFunction:
    """Build from the JSON form {"family": ..., "p0"/"p_inf"/"amplitude"/"pieces": ...}."""
    fam = spec.get("family")
    if fam == "constant":
        return constant(spec["p0"])
    if fam == "log_perturbed":
        return log_perturbed(spec["p_inf"], spec["amplitude"], dilation)
    if fam == "piecewise_test":
        return piecewise_test([(p["lo"], p["hi"], p["value"]) for p in spec["pieces"]],
                              spec.get("default", 1.0))
    raise ValueError(f"unknown exponent family {fam!r}")


class _Profile:
    """Modular of f/lambda as sum_v lambda^-v S_v, grouped by exponent value."""

    def __init__(self, p_vals, absf, weights):
        nz = (absf > 0) & (weights > 0)
        pv, af, w = p_vals[nz], absf[nz], weights[nz]
        self.empty = pv.size == 0
        if self.empty:
            return
        self.log_scale = float(np.log(af.max()))
        uniq, inv = np.unique(pv, return_inverse=True)
        # log S_v with S_v = sum w |f|^v
        terms = np.log(w) + pv * np.log(af)
        logS = np.full(uniq.size, -np.inf)
        for i in range(uniq.size):
            logS[i] = logsumexp(terms[inv == i])
        self.exponents = uniq
        self.logS = logS

    def log_modular(self, t: float) -> float:
        """log of the modular of f / e^t."""
        return float(logsumexp(self.logS - self.exponents * t))


def _profile(p: ExponentFunction, f: sampling.SampledFunction, weights=None) -> _Profile:
    absf = np.abs(f.values).reshape(-1)
    w = np.full(absf.shape, f.weight) if weights is None else (
        f.weight * np.asarray(weights, dtype=float).reshape(-1))
    nz = (absf > 0) & (w > 0)
    p_vals = np.ones_like(absf)
    if np.any(nz):
        p_vals[nz] = p(f.nodes().reshape(-1, f.dimension)[nz])
    return _Profile(p_vals, absf, w)


def modular(p: ExponentFunction, f: sampling.SampledFunction, weights=None) -> float:
    """Quadrature of int |f(x)|^p(x) dx; ``weights`` rescales node measures (e.g. cell coverage)."""
    prof = _profile(p, f, weights)
    return 0.0 if prof.empty else math.exp(prof.log_modular(0.0))


def luxemburg_norm(p: ExponentFunction, f: sampling.SampledFunction, weights=None) -> float:
    """inf{lam > 0 : modular(f/lam) <= 1}.

    The modular of f/lam is continuous and strictly decreasing in lam, so the
    infimum is the root of log modular(f/e^t) = 0, bracketed by doubling and
    refined with Brent's method. The bracket search starts from lam = max|f|.
    """
    return _solve(_profile(p, f, weights))


def luxemburg_norm_at(p_vals, values, cell_weight: float) -> float:
    """Luxemburg norm from exponent values already evaluated at the nodes.

    Lets callers that measure many functions on one grid evaluate p(.) once.
    """
    absf = np.abs(np.asarray(values)).reshape(-1)
    pv = np.asarray(p_vals, dtype=float).reshape(-1)
    return _solve(_Profile(pv, absf, np.full(absf.shape, float(cell_weight))))


def _solve(prof: _Profile) -> float:
    if prof.empty:
        return 0.0
    g = prof.log_modular
    step = math.log(2.0)
    lo = hi = t0 = prof.log_scale
    g0 = g(t0)
    if g0 > 0:
        for _ in range(MAX_DOUBLINGS):
            hi += step
            if g(hi) <= 0:
                break
        else:
            raise BracketFailure("modular stays above 1 up to scaling 2^120 of max|f|")
        lo = hi - step
    elif g0 < 0:
        for _ in range(MAX_DOUBLINGS):
            lo -= step
            if g(lo) >= 0:
                break
        else:
            raise BracketFailure("modular stays below 1 down to scaling 2^-120 of max|f|")
        hi = lo + step
    else:
        return math.exp(t0)
    t = brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(t)


def reference_grid(d, ball, resolution: int | None = None, pad: float = 1.05
                   ) -> sampling.SampledFunction:
    """Cube grid covering Delta, framed onto the physical ball x0 + B_k0."""
    x0, k0 = ball
    L = pad * float(np.max(d.half_widths))
    return sampling.make_grid(d.n, L, resolution, frame=d.power(int(k0)),
                              offset=np.asarray(x0, dtype=float).reshape(d.n))


def indicator_norm(p: ExponentFunction, d, ball, *, grid=None, resolution=None,
                   supersample: int = 8) -> float:
    """||1_{x0 + B_k0}|| in L^p(.).

    With ``grid`` the indicator is rasterized 0/1 on that grid; otherwise a
    reference grid over the ball is used with cell-coverage weights.
    """
    if grid is not None:
        mask = sampling.ball_mask(d, grid, ball)
        return luxemburg_norm(p, grid.with_values(mask.astype(float)))
    g = reference_grid(d, ball, resolution)
    cov = sampling.ball_coverage(d, g, ball, supersample)
    return luxemburg_norm(p, g.with_values(np.ones_like(cov)), weights=cov)


def indicator_norm_series(p: ExponentFunction, d, k0: int, depth: int = 400) -> float:
    """||1_{B_k0}|| for a ball centred at the origin, from the shell decomposition.

    B_k0 is the disjoint union of the shells B_{j+1} \\ B_j (j < k0) of volume
    b^j (b - 1), on which rho = b^j and hence p is constant.
    """
    js = np.arange(k0 - depth, k0)
    vol_log = js * math.log(d.b) + math.log(d.b - 1.0)
    pts_rho = d.b ** js.astype(float)
    if p.family == "constant":
        pv = np.full(js.shape, p.params["p0"])
    elif p.family == "log_perturbed":
        pv = np.minimum(1.0, p.params["p_inf"] + p.params["amplitude"] / np.log(math.e + pts_rho))
    else:
        raise ValueError("series form needs a rho-radial exponent")
    g = lambda t: float(logsumexp(vol_log - pv * t))  # noqa: E731
    lo, hi = -200.0, 200.0
    return math.exp(brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps))


def log_holder_check(p: ExponentFunction, d, x, y) -> dict:
    """Smallest constants making both log-Holder bounds hold on the sample.

    ``x`` and ``y`` are paired point arrays (N, n) with N >= 1000.
    """
    x = np.asarray(x, dtype=float).reshape(-1, d.n)
    y = np.asarray(y, dtype=float).reshape(-1, d.n)
    if x.shape[0] < 1000 or x.shape != y.shape:
        raise ValueError("need at least 1000 paired samples")
    px, py = p(x), p(y)
    rxy = d.rho(x - y)
    keep = rxy > 0
    c_log = float(np.max(np.abs(px - py)[keep] * np.log(math.e + 1.0 / rxy[keep]), initial=0.0))
    consts = p.log_holder_constants
    p_inf = consts["p_inf"] if consts else float(np.median(px))
    c_inf = float(np.max(np.abs(px - p_inf) * np.log(math.e + d.rho(x)), initial=0.0))
    return {
        "family": p.family,
        "conforming": p.family != "piecewise_test",
        "C_log_empirical": c_log,
        "C_inf_empirical": c_inf,
        "p_inf": p_inf,
        "pairs": int(keep.sum()),
    }
