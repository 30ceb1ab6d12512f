"""Anisotropic (p(.), r, s)-atoms and finite atomic decompositions."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import sampling, varexp
from .errors import DegenerateSeed, GramIllConditioned, GridMismatch

MOMENT_TOL = 1e-8
SIZE_TOL = 1e-6
GRAM_COND_MAX = 1e12
MAX_ATOMS = 64


def multi_indices(n: int, s: int) -> list[tuple[int, ...]]:
    """All gamma in Z_+^n with |gamma| <= s, by degree then lexicographically."""
    out = []
    for deg in range(s + 1):
        for g in itertools.product(range(deg + 1), repeat=n):
            if sum(g) == deg:
                out.append(g)
    return sorted(out, key=lambda g: (sum(g), tuple(-c for c in g)))


def _monomials(z: np.ndarray, gammas) -> np.ndarray:
    """Columns z^gamma for points z (N, n)."""
    return np.stack([np.prod(z ** np.asarray(g), axis=1) for g in gammas], axis=1)


def min_moment_order(p, d, lambda_minus: float | None = None) -> int:
    """Smallest admissible moment order max(0, floor((1/p_- - 1) ln b / ln lambda_-))."""
    lm = d.lambda_minus if lambda_minus is None else lambda_minus
    val = (1.0 / p.p_minus - 1.0) * math.log(d.b) / math.log(lm)
    # guard against 1/p_- landing one ulp below an integer product
    return max(0, math.floor(val + 1e-12))


def lr_norm(f: sampling.SampledFunction, r: float) -> float:
    if math.isinf(r):
        return float(np.max(np.abs(f.values)))
    return float((f.weight * np.sum(np.abs(f.values) ** r)) ** (1.0 / r))


def l1_norm(f: sampling.SampledFunction) -> float:
    return float(f.weight * np.sum(np.abs(f.values)))


def moment_residuals(f: sampling.SampledFunction, s: int) -> dict:
    """|int f(x) x^gamma dx| for all |gamma| <= s (physical, uncentred monomials)."""
    x = f.nodes().reshape(-1, f.dimension)
    v = f.values.reshape(-1)
    gam = multi_indices(f.dimension, s)
    mono = _monomials(x, gam)
    return {g: float(abs(f.weight * (v @ mono[:, i]))) for i, g in enumerate(gam)}


@dataclass(frozen=True, eq=False)
class Atom:
    ball: tuple
    r_exp: float
    s_order: int
    samples: sampling.SampledFunction
    lr_norm: float
    l1_norm: float
    indicator_norm: float
    size_bound: float
    moment_residuals: dict = field(repr=False)
    reference_grid: bool = True

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.ball[0], dtype=float)

    @property
    def k0(self) -> int:
        return int(self.ball[1])


def _indicator(p, d, ball, grid, reference: bool) -> float:
    if reference:
        return varexp.indicator_norm(p, d, ball, resolution=grid.resolution)
    return varexp.indicator_norm(p, d, ball, grid=grid)


def make_atom(d, p, ball, r_exp: float = 2.0, s: int | None = None, seed: int = 0, *,
              grid: sampling.SampledFunction | None = None, resolution: int | None = None,
              bump_power: int = 4) -> Atom:
    """Build a generic atom on ``x0 + B_k0`` meeting the size bound with equality.

    A seeded polynomial of degree s+2 times the bump (1 - q)^bump_power (q the
    normalized ellipsoid form in ball coordinates) has its moments up to order
    s removed by orthogonal projection onto bump * polynomials of degree <= s,
    in the bump-weighted grid inner product. Monomials use ball coordinates
    y = A^-k0 (x - x0) scaled by the radius of Delta.

    Without ``grid`` the atom lives on a reference grid over Delta framed onto
    the ball, so dilations and Fourier sums stay exact.
    """
    x0 = np.asarray(ball[0], dtype=float).reshape(d.n)
    k0 = int(ball[1])
    ball = (tuple(float(c) for c in x0), k0)
    if s is None:
        s = min_moment_order(p, d)
    if s < min_moment_order(p, d):
        raise ValueError(f"moment order {s} below the admissible minimum {min_moment_order(p, d)}")
    reference = grid is None
    if reference:
        grid = varexp.reference_grid(d, ball, resolution)
    x = grid.nodes().reshape(-1, d.n)
    y = (x - x0) @ d.power(-k0).T
    q = np.einsum("ni,ij,nj->n", y, d.ellipsoid_form, y) / d.ellipsoid_scale
    inside = q < 1.0
    if inside.sum() < 4 * len(multi_indices(d.n, s)):
        raise GramIllConditioned("too few grid nodes inside the ball for the moment order")
    R0 = float(np.max(d.half_widths))
    z = y[inside] / R0
    psi = (1.0 - q[inside]) ** bump_power
    rng = np.random.default_rng(seed)
    full = multi_indices(d.n, s + 2)
    poly = _monomials(z, full) @ rng.standard_normal(len(full))
    low = multi_indices(d.n, s)
    Z = _monomials(z, low)
    w = grid.weight
    G = (Z * psi[:, None]).T @ Z * w
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > GRAM_COND_MAX:
        raise GramIllConditioned(f"monomial Gram condition {cond:.3g} exceeds {GRAM_COND_MAX:g}")
    pre = psi * poly
    g = pre.copy()
    for _ in range(3):
        mom = Z.T @ g * w
        g = g - psi * (Z @ np.linalg.solve(G, mom))
    if np.linalg.norm(g) < 1e-6 * np.linalg.norm(pre):
        raise DegenerateSeed(f"seed {seed} lost its mass in projection")
    vals = np.zeros(x.shape[0])
    vals[inside] = g
    f = grid.with_values(vals.reshape(grid.values.shape))
    f = sampling.SampledFunction(f.values, f.half_width, f.frame, f.offset, ball)
    ind = _indicator(p, d, ball, grid, reference)
    bound = _size_bound(d, k0, r_exp, ind)
    f = f.with_values(f.values * (bound / lr_norm(f, r_exp)))
    return Atom(ball, float(r_exp), int(s), f, lr_norm(f, r_exp), l1_norm(f), ind, bound,
                moment_residuals(f, s), reference)


def _size_bound(d, k0: int, r: float, ind: float) -> float:
    vol = d.b ** k0
    return (1.0 if math.isinf(r) else vol ** (1.0 / r)) / ind


def validate_atom(atom: Atom, d, p) -> dict:
    """Re-check support, size and moment conditions from the samples alone."""
    f = atom.samples
    reference = atom.reference_grid
    x = f.nodes().reshape(-1, d.n)
    outside = ~d.in_ball(x - atom.x0, atom.k0)
    vmax = float(np.max(np.abs(f.values)))
    support_ok = bool(np.all(np.abs(f.values.reshape(-1)[outside]) <= 1e-12 * vmax))
    grid = f if not reference else varexp.reference_grid(d, atom.ball, f.resolution)
    ind = _indicator(p, d, atom.ball, grid, reference)
    bound = _size_bound(d, atom.k0, atom.r_exp, ind)
    lr = lr_norm(f, atom.r_exp)
    l1 = l1_norm(f)
    res = moment_residuals(f, atom.s_order)
    worst = max(res.values())
    return {
        "support": support_ok,
        "size": lr <= bound * (1.0 + SIZE_TOL),
        "size_ratio": lr / bound,
        "moments": worst <= MOMENT_TOL * l1,
        "moment_ratio": worst / l1,
        "valid": support_ok and lr <= bound * (1.0 + SIZE_TOL) and worst <= MOMENT_TOL * l1,
    }


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    coefficients: np.ndarray
    atoms: tuple

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.ndim != 1 or c.size == 0 or c.size != len(self.atoms):
            raise ValueError("need one coefficient per atom and at least one atom")
        if c.size > MAX_ATOMS:
            raise ValueError(f"at most {MAX_ATOMS} atoms supported")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @property
    def balls(self) -> list:
        return [a.ball for a in self.atoms]

    def scaled(self, t) -> "AtomicDecomposition":
        return AtomicDecomposition(self.coefficients * t, self.atoms)


def random_decomposition(d, p, count: int, seed: int, *, k_range=(-2, 2), coef_range=(1e-3, 1e3),
                         spread: float = 2.0, r_exp: float = 2.0, s: int | None = None,
                         resolution: int | None = None) -> AtomicDecomposition:
    """Seeded decomposition: log-uniform coefficient magnitudes with random signs."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(coef_range[0]), np.log(coef_range[1])
    coefs = np.exp(rng.uniform(lo, hi, count)) * rng.choice([-1.0, 1.0], count)
    atoms = []
    for i in range(count):
        k0 = int(rng.integers(k_range[0], k_range[1] + 1))
        x0 = rng.uniform(-spread, spread, d.n)
        atoms.append(make_atom(d, p, (x0, k0), r_exp, s, seed=int(rng.integers(2 ** 31)),
                               resolution=resolution))
    return AtomicDecomposition(coefs, atoms)


def _ball_extent(d, ball) -> np.ndarray:
    """Half-widths of the bounding box of x0 + B_k0."""
    Qi = np.linalg.inv(d.form(int(ball[1])))
    return np.sqrt(np.diag(Qi))


def norm_grid(d, balls, *, min_nodes_across: int = 12, max_resolution: int | None = None
              ) -> sampling.SampledFunction:
    """Cartesian grid covering all balls, fine enough for the smallest one."""
    ext = np.max([np.abs(np.asarray(b[0], dtype=float)) + _ball_extent(d, b) for b in balls])
    L = 1.05 * float(ext)
    smallest = min(float(np.min(_ball_extent(d, b))) for b in balls)
    h = 2.0 * smallest / min_nodes_across
    cap = max_resolution or {1: 1 << 16, 2: 1024, 3: 96}[d.n]
    m = int(min(cap, max(16, math.ceil(2 * L / h))))
    return sampling.make_grid(d.n, L, m)


def _window_mask(d, grid, nodes, ball) -> np.ndarray:
    """Flat membership mask of x0 + B_k0, evaluated only inside its bounding box."""
    x0 = np.asarray(ball[0], dtype=float)
    if not grid.is_cartesian() or np.any(grid.offset):
        return d.in_ball(nodes - x0, int(ball[1])).reshape(-1)
    ext = _ball_extent(d, ball)
    h, m = grid.spacing, grid.resolution
    lo = np.clip(np.floor((x0 - ext + grid.half_width) / h - 0.5).astype(int), 0, m)
    hi = np.clip(np.ceil((x0 + ext + grid.half_width) / h - 0.5).astype(int) + 1, 0, m)
    win = tuple(slice(a, b) for a, b in zip(lo, hi))
    mask = np.zeros(nodes.shape[:-1], dtype=bool)
    mask[win] = d.in_ball(nodes[win] - x0, int(ball[1]))
    return mask.reshape(-1)


def atomic_norm_from_balls(p, d, coefficients, balls, grid=None) -> float:
    """|| { sum_i [ |c_i| 1_{B_i} / ||1_{B_i}|| ]^p_ }^{1/p_} || in L^p(.), p_ = min(p_-, 1)."""
    c = np.abs(np.asarray(coefficients))
    if not np.any(c > 0):
        return 0.0
    if grid is None:
        grid = norm_grid(d, balls)
    pu = p.p_underline
    nodes = grid.nodes()
    masks = [_window_mask(d, grid, nodes, b) for b in balls]
    nodes = nodes.reshape(-1, d.n)
    for b, mask in zip(balls, masks):
        if not np.any(mask):
            raise ValueError(f"ball {b} contains no node of the norm grid")
    # nodes outside every ball carry zero in all the norms below
    union = np.logical_or.reduce(masks)
    p_vals = p(nodes[union])
    acc = np.zeros(p_vals.shape)
    for ci, mask in zip(c, masks):
        if ci == 0:
            continue
        m = mask[union]
        ind = varexp.luxemburg_norm_at(p_vals, m.astype(float), grid.weight)
        acc[m] += (ci / ind) ** pu
    return varexp.luxemburg_norm_at(p_vals, acc ** (1.0 / pu), grid.weight)


def atomic_norm_expression(p, d, decomp: AtomicDecomposition, grid=None) -> float:
    """Size of a given decomposition (an upper bound for the atomic quasi-norm)."""
    return atomic_norm_from_balls(p, d, decomp.coefficients, decomp.balls, grid)


def coefficient_sum_check(p, d, decomp: AtomicDecomposition, grid=None) -> tuple:
    """(sum |lambda_i|, atomic norm expression, sum <= expression (1 + 1e-4))."""
    total = float(np.sum(np.abs(decomp.coefficients)))
    expr = atomic_norm_expression(p, d, decomp, grid)
    return total, expr, total <= expr * (1.0 + 1e-4)


def synthesize(decomp: AtomicDecomposition) -> sampling.SampledFunction:
    """Pointwise finite sum sum_i lambda_i a_i on the atoms' common grid."""
    first = decomp.atoms[0].samples
    acc = np.zeros(first.values.shape, dtype=np.result_type(decomp.coefficients, float))
    for lam, a in zip(decomp.coefficients, decomp.atoms):
        g = a.samples
        if (g.values.shape != first.values.shape or g.half_width != first.half_width
                or not np.array_equal(g.frame, first.frame)
                or not np.array_equal(g.offset, first.offset)):
            raise GridMismatch("atoms do not share a grid")
        acc = acc + lam * g.values
    return sampling.SampledFunction(acc, first.half_width, first.frame, first.offset)


def subadditivity_gap(values, t: float) -> float:
    """sum |a_i|^t - (sum |a_i|)^t, nonnegative for t in (0, 1]."""
    a = np.abs(np.asarray(values, dtype=complex))
    return float(np.sum(a ** t) - np.sum(a) ** t)


def write_atom(atom: Atom, csv_path, json_path) -> None:
    """CSV of node/value plus a JSON sidecar with ball, r, s and residuals."""
    sampling.write_csv(atom.samples, csv_path)
    meta = {
        "x0": list(atom.ball[0]),
        "k0": atom.k0,
        "r": "inf" if math.isinf(atom.r_exp) else atom.r_exp,
        "s": atom.s_order,
        "lr_norm": atom.lr_norm,
        "l1_norm": atom.l1_norm,
        "indicator_norm": atom.indicator_norm,
        "size_bound": atom.size_bound,
        "moment_residuals": {",".join(map(str, g)): v for g, v in atom.moment_residuals.items()},
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
