"""Dilation geometry of an expansive matrix.

A real n x n matrix A (n <= 3) with all eigenvalues of modulus > 1 generates
a family of nested ellipsoids B_i = A^i Delta with |B_i| = b^i, b = |det A|.
This module builds the unit-volume ellipsoid Delta, the expansion factor r
with Delta in r*Delta in A*Delta, and the step homogeneous quasi-norm

    rho(x) = b^i   when x in B_{i+1} \\ B_i,      rho(0) = 0.

Quasi-norm values are handled through the integer shell index i so that the
homogeneity rho(A^k x) = b^k rho(x) is exact index arithmetic.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh
from scipy.special import gamma

from .errors import ConstructionFailed, EmptyRegime, NotExpansive, SingularMatrix

EXPANSIVE_TOL = 1e-12
SINGULAR_TOL = 1e-12
MAX_INDEX_STEPS = 200
DEFAULT_DEPTH = 60
MAX_DEPTH = 960
DEFAULT_SLACK = 1e-3

# shell index reported for the origin
ORIGIN_INDEX = np.iinfo(np.int64).min


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def _char_poly_roots(A: np.ndarray) -> list[complex]:
    n = A.shape[0]
    if n == 1:
        return [complex(A[0, 0])]
    tr = float(np.trace(A))
    det = float(np.linalg.det(A))
    if n == 2:
        disc = tr * tr - 4.0 * det
        if disc >= 0.0:
            sq = math.sqrt(disc)
            # stable quadratic formula
            q = -0.5 * (-tr + math.copysign(sq, -tr)) if tr != 0.0 else 0.5 * sq
            if q == 0.0:
                return [complex(0.5 * sq), complex(-0.5 * sq)]
            return [complex(q), complex(det / q)]
        sq = math.sqrt(-disc)
        return [complex(tr / 2, sq / 2), complex(tr / 2, -sq / 2)]
    if n == 3:
        c2 = (
            A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
            + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]
        )
        B, C, D = -tr, float(c2), -det
        p = C - B * B / 3.0
        q = 2.0 * B ** 3 / 27.0 - B * C / 3.0 + D
        root = cmath.sqrt(q * q / 4.0 + p ** 3 / 27.0)
        u = (-q / 2.0 + root) ** (1.0 / 3.0)
        if abs(u) < 1e-300:
            u = (-q / 2.0 - root) ** (1.0 / 3.0)
        omega = complex(-0.5, math.sqrt(3.0) / 2.0)
        roots = []
        for k in range(3):
            uk = u * omega ** k
            t = 0.0 if abs(uk) < 1e-300 else uk - p / (3.0 * uk)
            roots.append(t - B / 3.0)

        def poly(z):
            return ((z + B) * z + C) * z + D

        def dpoly(z):
            return (3.0 * z + 2.0 * B) * z + C

        polished = []
        for z in roots:
            for _ in range(3):
                dz = dpoly(z)
                if abs(dz) < 1e-14:
                    break
                step = poly(z) / dz
                if not np.isfinite(step):
                    break
                z = z - step
            polished.append(z)
        return polished
    raise ValueError(f"dimension {n} not supported (n must be 1, 2 or 3)")


def _det(A: np.ndarray) -> float:
    """Cofactor determinant; exact for small integer matrices, unlike LU."""
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0])
    if n == 2:
        return float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if n == 3:
        return float(A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
                     - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
                     + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))
    return float(np.linalg.det(A))


def spectrum(A) -> tuple[np.ndarray, float]:
    """Eigenvalue moduli (sorted ascending) and b = |det A|.

    Raises SingularMatrix for |det A| < 1e-12 and NotExpansive when the
    smallest modulus is <= 1 + 1e-12.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    b = abs(_det(A))
    if b < SINGULAR_TOL:
        raise SingularMatrix(f"|det A| = {b:.3g} < {SINGULAR_TOL}")
    moduli = np.sort(np.array([abs(z) for z in _char_poly_roots(A)]))
    if moduli[0] <= 1.0 + EXPANSIVE_TOL:
        raise NotExpansive(f"min eigenvalue modulus {moduli[0]:.12g} <= 1")
    return moduli, b


def construct_ellipsoid(A, moduli, *, lambda_minus=None, depth=DEFAULT_DEPTH):
    """Ellipsoid Delta = {x : x^T P x < c} of unit volume and its factor r.

    P is the truncated series sum_j rho0^{2j} (A^-j)^T A^-j with
    rho0 = (1 + lambda_minus)/2. The truncation depth doubles until r > 1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if lambda_minus is None:
        lambda_minus = (1.0 - DEFAULT_SLACK) * float(np.min(moduli))
    rho0 = 0.5 * (1.0 + lambda_minus)
    Ainv = np.linalg.inv(A)
    J = depth
    while J <= MAX_DEPTH:
        P = np.zeros((n, n))
        M = np.eye(n)
        for j in range(J + 1):
            P += rho0 ** (2 * j) * (M.T @ M)
            M = Ainv @ M
        P = 0.5 * (P + P.T)
        P /= np.max(np.abs(P))
        mu_max = float(eigh(Ainv.T @ P @ Ainv, P, eigvals_only=True)[-1])
        r = 1.0 / math.sqrt(mu_max)
        if r > 1.0 + 1e-6:
            c = (math.sqrt(np.linalg.det(P)) / unit_ball_volume(n)) ** (2.0 / n)
            return P, c, r
        J *= 2
    raise ConstructionFailed(f"no expansion factor r > 1 (last r = {r:.9g})")


@dataclass(frozen=True, eq=False)
class DilationStructure:
    """An expansive matrix with its derived geometry.

    Build with :func:`make_dilation`. Instances are immutable; the only
    internal state is a cache of the quadratic forms of A^{-j}.
    """

    matrix: np.ndarray
    b: float
    moduli: np.ndarray
    lambda_minus: float
    lambda_plus: float
    ellipsoid_form: np.ndarray
    ellipsoid_scale: float
    expansion_factor: float
    _forms: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def eig_min(self) -> float:
        return float(self.moduli[0])

    @property
    def eig_max(self) -> float:
        return float(self.moduli[-1])

    @property
    def tau(self) -> int:
        return math.ceil(math.log(2.0) / math.log(self.expansion_factor) - 1e-12)

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @cached_property
    def adjoint(self) -> "DilationStructure":
        return make_dilation(
            self.matrix.T,
            lambda_minus=self.lambda_minus,
            lambda_plus=self.lambda_plus,
        )

    @cached_property
    def mu_max(self) -> float:
        P = self.ellipsoid_form
        Ai = self.inverse
        return float(eigh(Ai.T @ P @ Ai, P, eigvals_only=True)[-1])

    @cached_property
    def half_widths(self) -> np.ndarray:
        """Half-widths of the axis-aligned bounding box of Delta."""
        return np.sqrt(self.ellipsoid_scale * np.diag(np.linalg.inv(self.ellipsoid_form)))

    def power(self, k: int) -> np.ndarray:
        """A^k for integer k (negative k uses the inverse)."""
        if k >= 0:
            return np.linalg.matrix_power(self.matrix, k)
        return np.linalg.matrix_power(self.inverse, -k)

    def form(self, j: int) -> np.ndarray:
        """Q_j with x in B_j  <=>  x^T Q_j x < 1."""
        Q = self._forms.get(j)
        if Q is None:
            M = self.power(-j)
            Q = M.T @ self.ellipsoid_form @ M / self.ellipsoid_scale
            Q = 0.5 * (Q + Q.T)
            self._forms[j] = Q
        return Q

    def ball_quadratic(self, x, j):
        """x^T Q_j x for points x (..., n) and integer(s) j broadcastable to x[..., 0]."""
        x = np.asarray(x, dtype=float)
        j = np.broadcast_to(np.asarray(j, dtype=np.int64), x.shape[:-1])
        out = np.empty(x.shape[:-1])
        for jj in np.unique(j):
            sel = j == jj
            xs = x[sel]
            out[sel] = np.einsum("...i,ij,...j->...", xs, self.form(int(jj)), xs)
        return out

    def in_ball(self, x, j):
        """Membership in the open ellipsoid B_j (strict inequality)."""
        return self.ball_quadratic(x, j) < 1.0

    def step_index(self, x) -> np.ndarray:
        """Shell index i with x in B_{i+1} \\ B_i (ORIGIN_INDEX at the origin)."""
        return _step_index(self, x)

    def rho(self, x) -> np.ndarray:
        """Step homogeneous quasi-norm; scalar input gives a 0-d array."""
        idx = self.step_index(x)
        out = np.zeros(idx.shape)
        nz = idx != ORIGIN_INDEX
        out[nz] = self.b ** idx[nz].astype(float)
        return out


def make_dilation(A, *, lambda_minus=None, lambda_plus=None, slack=DEFAULT_SLACK,
                  depth=DEFAULT_DEPTH) -> DilationStructure:
    A = np.atleast_2d(np.asarray(A, dtype=float)).copy()
    n = A.shape[0]
    if n not in (1, 2, 3) or A.shape != (n, n):
        raise ValueError(f"expected a square matrix of size 1..3, got shape {A.shape}")
    moduli, b = spectrum(A)
    lm = (1.0 - slack) * moduli[0] if lambda_minus is None else float(lambda_minus)
    lp = (1.0 + slack) * moduli[-1] if lambda_plus is None else float(lambda_plus)
    if not 1.0 < lm <= moduli[0] * (1 + 1e-12):
        raise ValueError(f"lambda_minus={lm} must lie in (1, min|eig|]")
    if lp < moduli[-1] * (1 - 1e-12):
        raise ValueError(f"lambda_plus={lp} must be >= max|eig|")
    P, c, r = construct_ellipsoid(A, moduli, lambda_minus=lm, depth=depth)
    A.setflags(write=False)
    P.setflags(write=False)
    return DilationStructure(
        matrix=A, b=b, moduli=moduli, lambda_minus=lm, lambda_plus=lp,
        ellipsoid_form=P, ellipsoid_scale=c, expansion_factor=r,
    )


def _step_index(d: DilationStructure, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != d.n:
        x = x.reshape(*x.shape, 1) if d.n == 1 else x
    if x.shape[-1] != d.n:
        raise ValueError(f"points must have trailing dimension {d.n}")
    shape = x.shape[:-1]
    pts = x.reshape(-1, d.n)
    norms = np.linalg.norm(pts, axis=1)
    result = np.full(pts.shape[0], ORIGIN_INDEX, dtype=np.int64)
    nz = norms > 0
    if not np.any(nz):
        return result.reshape(shape)
    if not np.all(np.isfinite(pts[nz])):
        raise ValueError("points must be finite")
    p = pts[nz]
    scale = unit_ball_volume(d.n) ** (-1.0 / d.n)
    seed = np.ceil(d.n * np.log(norms[nz] / scale) / math.log(d.b)).astype(np.int64)

    member = d.in_ball(p, seed)
    hi = np.where(member, seed, 0)
    lo = np.where(member, 0, seed)
    # expand the bracket by doubling: lo not a member, hi a member
    step = np.ones_like(seed)
    todo_hi = ~member
    todo_lo = member.copy()
    while np.any(todo_hi) or np.any(todo_lo):
        if np.any(np.abs(np.where(todo_hi, lo, hi) - seed) > MAX_INDEX_STEPS):
            raise ValueError("shell index search exceeded the step cap")
        cand = np.where(todo_hi, lo + step, hi - step)
        act = todo_hi | todo_lo
        m = np.zeros_like(member)
        m[act] = d.in_ball(p[act], cand[act])
        # upward search: found a member -> done
        up_done = todo_hi & m
        hi = np.where(up_done, cand, hi)
        lo = np.where(todo_hi & ~m, cand, lo)
        # downward search: found a non-member -> done
        down_done = todo_lo & ~m
        lo = np.where(down_done, cand, lo)
        hi = np.where(todo_lo & m, cand, hi)
        todo_hi &= ~up_done
        todo_lo &= ~down_done
        step = step * 2
    while True:
        gap = hi - lo > 1
        if not np.any(gap):
            break
        mid = (lo + hi) // 2
        m = np.zeros_like(member)
        m[gap] = d.in_ball(p[gap], mid[gap])
        hi = np.where(gap & m, mid, hi)
        lo = np.where(gap & ~m, mid, lo)
    result[nz] = hi - 1
    return result.reshape(shape)


def step_quasi_norm(d: DilationStructure, x):
    """rho(x) for one point or an array of points (..., n)."""
    return d.rho(x)


def comparability_band(d: DilationStructure, samples) -> dict:
    """Empirical constants of the two-sided bound between |x| and rho(x).

    For each regime ("large": rho > 1, "small": rho <= 1) returns the min and
    max over the samples of |x|/rho^{e_minus} and |x|/rho^{e_plus} with
    e_pm = ln(lambda_pm)/ln(b), plus the regime's lower constant C_low and
    upper constant C_high as they enter the bound.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, d.n)
    norms = np.linalg.norm(samples, axis=1)
    if np.any(norms == 0):
        raise ValueError("samples must exclude the origin")
    idx = d.step_index(samples)
    logrho = idx * math.log(d.b)
    e_minus = math.log(d.lambda_minus) / math.log(d.b)
    e_plus = math.log(d.lambda_plus) / math.log(d.b)
    out = {}
    for regime, sel in (("large", idx > 0), ("small", idx <= 0)):
        if not np.any(sel):
            raise EmptyRegime(f"no samples with rho {'> 1' if regime == 'large' else '<= 1'}")
        r_minus = norms[sel] / np.exp(e_minus * logrho[sel])
        r_plus = norms[sel] / np.exp(e_plus * logrho[sel])
        stats = {
            "minus_min": float(r_minus.min()), "minus_max": float(r_minus.max()),
            "plus_min": float(r_plus.min()), "plus_max": float(r_plus.max()),
            "count": int(sel.sum()),
        }
        if regime == "large":
            stats["C_low"] = 1.0 / stats["minus_min"]
            stats["C_high"] = stats["plus_max"]
        else:
            stats["C_low"] = 1.0 / stats["plus_min"]
            stats["C_high"] = stats["minus_max"]
        out[regime] = stats
    return out


def sample_shell(d: DilationStructure, k: int, count: int, rng) -> np.ndarray:
    """Uniform random points in B_{k+1} \\ B_k (rejection from B_{k+1})."""
    out = []
    need = count
    L = d.power(k + 1)
    while need > 0:
        y = sample_ball(d, 2 * need + 16, rng)
        x = y @ L.T
        keep = x[~d.in_ball(x, k)]
        out.append(keep[:need])
        need -= len(out[-1])
    return np.concatenate(out)


def sample_ball(d: DilationStructure, count: int, rng) -> np.ndarray:
    """Uniform random points in Delta = B_0."""
    n = d.n
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = rng.random(count) ** (1.0 / n)
    Lc = np.linalg.cholesky(d.ellipsoid_form / d.ellipsoid_scale)
    # x^T (L L^T) x = |L^T x|^2 < 1  <=>  x = L^{-T} u with |u| < 1
    return np.linalg.solve(Lc.T, (g * rad[:, None]).T).T
