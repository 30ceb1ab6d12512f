"""Grid-sampled functions, midpoint quadrature and direct Fourier sums.

A :class:`SampledFunction` stores values on the midpoint nodes

    u_i = -L + (i + 1/2) h,   h = 2L/m,   i = 0..m-1   (per axis)

of the box [-L, L]^n. An affine frame (matrix M, offset o) places node u at the
physical point x = o + M u, so each node carries quadrature weight
h^n |det M|. Dilations x -> A^k x act on the frame only, which keeps moments
and Fourier sums exact at the discrete level.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from .errors import AliasingRisk, GridMismatch, SupportOverflow

NYQUIST_SAFETY = 0.5
DEFAULT_RESOLUTION = {1: 512, 2: 192, 3: 48}
_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class SampledFunction:
    values: np.ndarray
    half_width: float
    frame: np.ndarray | None = None
    offset: np.ndarray | None = None
    support_hint: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        n = v.ndim
        if n not in (1, 2, 3) or len(set(v.shape)) != 1:
            raise ValueError(f"values must be a cube array of dimension 1..3, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        M = np.eye(n) if self.frame is None else np.asarray(self.frame, dtype=float)
        o = np.zeros(n) if self.offset is None else np.asarray(self.offset, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "frame", M)
        object.__setattr__(self, "offset", o)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def weight(self) -> float:
        return self.spacing ** self.dimension * abs(float(np.linalg.det(self.frame)))

    @property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + (np.arange(self.resolution) + 0.5) * h

    def grid_coords(self) -> np.ndarray:
        """Grid coordinates u of all nodes, shape (m,)*n + (n,)."""
        ax = self.axis
        mesh = np.meshgrid(*([ax] * self.dimension), indexing="ij")
        return np.stack(mesh, axis=-1)

    def nodes(self) -> np.ndarray:
        """Physical node positions, shape (m,)*n + (n,)."""
        return self.grid_coords() @ self.frame.T + self.offset

    def is_cartesian(self) -> bool:
        return np.array_equal(self.frame, np.eye(self.dimension))

    def with_values(self, values) -> "SampledFunction":
        return replace(self, values=np.asarray(values))


def make_grid(dimension: int, half_width: float, resolution: int | None = None,
              frame=None, offset=None) -> SampledFunction:
    """Zero function on a fresh grid."""
    m = DEFAULT_RESOLUTION[dimension] if resolution is None else int(resolution)
    return SampledFunction(np.zeros((m,) * dimension), float(half_width), frame, offset)


def from_callable(fn, dimension: int, half_width: float, resolution: int | None = None,
                  frame=None, offset=None) -> SampledFunction:
    """Sample ``fn`` (vectorized over (..., n) points) on a fresh grid."""
    g = make_grid(dimension, half_width, resolution, frame, offset)
    return g.with_values(np.asarray(fn(g.nodes())))


def integrate(f: SampledFunction, weight=None):
    """Midpoint rule h^n |det M| sum w(x) f(x)."""
    vals = f.values
    if weight is not None:
        vals = vals * weight(f.nodes())
    return f.weight * np.sum(vals)


def _nyquist_guard(f: SampledFunction, eta: np.ndarray) -> None:
    limit = NYQUIST_SAFETY / (2.0 * f.spacing)
    worst = float(np.max(np.abs(eta))) if eta.size else 0.0
    if worst > limit:
        warnings.warn(
            f"frequency component {worst:.4g} exceeds the aliasing guard {limit:.4g}",
            AliasingRisk, stacklevel=3,
        )


def dft_at(f: SampledFunction, xi, *, values=None) -> np.ndarray:
    """Quadrature of f(x) exp(-2 pi i x.xi) at one or many frequencies.

    ``xi`` has shape (n,) or (K, n); the result is complex with shape () or
    (K,). The sum is evaluated axis by axis in grid coordinates.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1 and f.dimension > 1 or xi.ndim == 0
    xi = np.atleast_2d(xi.reshape(-1, f.dimension))
    vals = f.values if values is None else values
    eta = xi @ f.frame  # (M^T xi) per row
    _nyquist_guard(f, eta)
    ax = f.axis
    out = np.empty(xi.shape[0], dtype=complex)
    for start in range(0, xi.shape[0], _CHUNK):
        e = eta[start:start + _CHUNK]
        E = [np.exp(-2j * np.pi * np.outer(ax, e[:, a])) for a in range(f.dimension)]
        if f.dimension == 1:
            s = vals @ E[0]
        elif f.dimension == 2:
            T = vals.T @ E[0]  # (m_y, K)
            s = np.sum(T * E[1], axis=0)
        else:
            T = np.einsum("ijl,ik->jlk", vals, E[0])
            T = np.einsum("jlk,jk->lk", T, E[1])
            s = np.sum(T * E[2], axis=0)
        out[start:start + _CHUNK] = s
    phase = np.exp(-2j * np.pi * (xi @ f.offset))
    out = f.weight * phase * out
    return out[0] if single else out


def dft_direct(f: SampledFunction, xi) -> np.ndarray:
    """Brute-force sum over explicit physical nodes (independent of the frame algebra)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float).reshape(-1, f.dimension))
    x = f.nodes().reshape(-1, f.dimension)
    v = f.values.reshape(-1)
    nz = v != 0
    x, v = x[nz], v[nz]
    w = f.spacing ** f.dimension * abs(float(np.linalg.det(f.frame)))
    out = np.empty(xi.shape[0], dtype=complex)
    for start in range(0, xi.shape[0], 64):
        ph = np.exp(-2j * np.pi * (x @ xi[start:start + 64].T))
        out[start:start + 64] = v @ ph
    return w * out


def dilate_samples(f: SampledFunction, d, k: int, target: SampledFunction | None = None
                   ) -> SampledFunction:
    """x -> f(A^k x).

    Without ``target`` the dilation is exact: only the frame changes
    (M -> A^-k M, o -> A^-k o). With ``target`` the result is resampled by
    multilinear interpolation onto the target grid.
    """
    Ak_inv = d.power(-k)
    hint = None
    if f.support_hint is not None:
        x0, k0 = f.support_hint
        hint = (Ak_inv @ np.asarray(x0, dtype=float), int(k0) - k)
    if target is None:
        return SampledFunction(f.values, f.half_width, Ak_inv @ f.frame, Ak_inv @ f.offset, hint)
    if target.dimension != f.dimension:
        raise GridMismatch("target dimension differs")
    src_nz = f.nodes()[f.values != 0]
    if src_nz.size:
        # support of the dilated function in target grid coordinates
        u = np.linalg.solve(target.frame, (src_nz @ Ak_inv.T - target.offset).T).T
        if np.any(np.abs(u) > target.half_width):
            raise SupportOverflow("dilated support escapes the target box")
    x = target.nodes() @ d.power(k).T
    u_src = np.linalg.solve(f.frame, (x - f.offset).reshape(-1, f.dimension).T).T
    interp = RegularGridInterpolator(
        [f.axis] * f.dimension, f.values, method="linear", bounds_error=False, fill_value=0.0
    )
    vals = interp(u_src).reshape(target.values.shape)
    return SampledFunction(vals, target.half_width, target.frame, target.offset, hint)


def _nonzero_index_range(v: np.ndarray):
    idx = np.nonzero(v)
    if len(idx[0]) == 0:
        return None
    return [(int(i.min()), int(i.max())) for i in idx]


def convolve(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Discrete convolution h^n sum_y f(y) g(x - y) on matching Cartesian grids.

    Differences of midpoint nodes fall on the lattice shifted by h/2, so the
    output grid has the same box and spacing with offset o_f + o_g + h/2.
    """
    if (f.dimension != g.dimension or f.resolution != g.resolution
            or not math.isclose(f.half_width, g.half_width, rel_tol=1e-14)
            or not (f.is_cartesian() and g.is_cartesian())):
        raise GridMismatch("convolution needs matching Cartesian grids")
    m = f.resolution
    rf, rg = _nonzero_index_range(f.values), _nonzero_index_range(g.values)
    off = f.offset + g.offset + 0.5 * f.spacing
    if rf is None or rg is None:
        return SampledFunction(np.zeros_like(f.values, dtype=np.result_type(f.values, g.values)),
                               f.half_width, None, off)
    lo_keep, hi_keep = m // 2, m // 2 + m - 1
    for (a1, b1), (a2, b2) in zip(rf, rg):
        if a1 + a2 < lo_keep or b1 + b2 > hi_keep:
            raise SupportOverflow("sum of supports does not fit in the box")
    full = fftconvolve(f.values, g.values, mode="full")
    sl = tuple(slice(lo_keep, lo_keep + m) for _ in range(f.dimension))
    vals = full[sl] * f.spacing ** f.dimension
    return SampledFunction(vals, f.half_width, None, off)


def parseval_energies(f: SampledFunction) -> tuple[float, float]:
    """(grid energy, frequency-side energy over the dual grid) for Cartesian f."""
    space = f.weight * float(np.sum(np.abs(f.values) ** 2))
    F = np.fft.fftn(f.values) * f.spacing ** f.dimension
    dual = (1.0 / (2.0 * f.half_width)) ** f.dimension
    freq = dual * float(np.sum(np.abs(F) ** 2))
    return space, freq


def ball_mask(d, f: SampledFunction, ball) -> np.ndarray:
    """Nodes of ``f`` inside the dilated ball x0 + B_k0."""
    x0, k0 = ball
    x = f.nodes() - np.asarray(x0, dtype=float)
    return d.in_ball(x, int(k0))


def ball_coverage(d, f: SampledFunction, ball, supersample: int = 8) -> np.ndarray:
    """Fraction of each grid cell lying inside x0 + B_k0.

    Interior and exterior cells are classified from their corners' distance
    to the boundary; cells near the boundary are supersampled.
    """
    x0, k0 = ball
    n = f.dimension
    h = f.spacing
    u = f.grid_coords()
    Q = d.form(int(k0))
    # node quadratic in grid coordinates: x = o + M u - x0
    G = f.frame.T @ Q @ f.frame
    shift = np.linalg.solve(f.frame, np.asarray(x0, dtype=float) - f.offset)
    v = u - shift
    q = np.einsum("...i,ij,...j->...", v, G, v)
    # |grad sqrt(q)| <= sqrt(lambda_max(G)); half-diagonal of a cell is h sqrt(n)/2
    slope = math.sqrt(float(np.linalg.eigvalsh(G)[-1]))
    margin = slope * h * math.sqrt(n) / 2.0
    sq = np.sqrt(q)
    cov = (sq < 1.0).astype(float)
    edge = np.abs(sq - 1.0) <= margin
    if np.any(edge):
        s = supersample
        sub = (np.arange(s) + 0.5) / s - 0.5
        offs = np.stack(np.meshgrid(*([sub] * n), indexing="ij"), axis=-1).reshape(-1, n) * h
        ve = v[edge]
        pts = ve[:, None, :] + offs[None, :, :]
        qs = np.einsum("abi,ij,abj->ab", pts, G, pts)
        cov[edge] = np.mean(qs < 1.0, axis=1)
    return cov


def write_csv(f: SampledFunction, path) -> None:
    """Dump node coordinates and values (real and imaginary parts)."""
    x = f.nodes().reshape(-1, f.dimension)
    v = f.values.reshape(-1)
    names = [f"x{i}" for i in range(f.dimension)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["re", "im"])
        for row, val in zip(x, v):
            w.writerow([repr(float(c)) for c in row] + [repr(float(np.real(val))), repr(float(np.imag(val)))])
