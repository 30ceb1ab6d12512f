"""Run configuration for the batch verifier."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

CHECK_ORDER = ("dilation", "varexp", "atoms", "lemma31", "lemma32", "theorem31",
               "theorem41", "hardy-littlewood", "maximal")


@dataclass(frozen=True)
class AtomSpec:
    x0: tuple = ()
    k0: int = 0
    r: float = 2.0
    s: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class DecompositionSpec:
    count: int = 5
    coef_low: float = 1e-3
    coef_high: float = 1e3
    k_range: tuple = (-2, 2)
    spread: float = 2.0
    seed: int = 1


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 64
    padding: float = 1.05


@dataclass(frozen=True)
class ScanSpec:
    k_min: int = -6
    k_max: int = 6
    directions: int = 16
    deltas: tuple = tuple(2.0 ** -j for j in range(1, 13))


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    matrix: tuple
    exponent: dict
    atom: AtomSpec = field(default_factory=AtomSpec)
    decomposition: DecompositionSpec = field(default_factory=DecompositionSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    scan: ScanSpec = field(default_factory=ScanSpec)
    checks: tuple = CHECK_ORDER
    output: str = "out"
    pins: str | None = None

    @property
    def matrix_array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float).reshape(self.dimension, self.dimension)

    @property
    def ordered_checks(self) -> tuple:
        return tuple(c for c in CHECK_ORDER if c in self.checks)


def _sub(raw: dict, key: str) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"'{key}' must be an object")
    return val


def _unknown(raw: dict, allowed, where: str) -> None:
    extra = sorted(set(raw) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {', '.join(extra)}")


def parse_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON object and build a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _unknown(raw, ("dimension", "matrix", "exponent", "atom", "decomposition", "grid", "scan",
                   "checks", "output", "pins"), "config")
    try:
        n = int(raw["dimension"])
        flat = np.asarray(raw["matrix"], dtype=float).reshape(-1)
        exponent = dict(raw["exponent"])
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed field: {exc}") from None
    if n not in (1, 2, 3):
        raise ConfigError("dimension must be 1, 2 or 3")
    if flat.size != n * n or not np.all(np.isfinite(flat)):
        raise ConfigError(f"matrix must hold {n * n} finite entries for dimension {n}")

    a = _sub(raw, "atom")
    _unknown(a, ("x0", "k0", "r", "s", "seed"), "atom")
    x0 = tuple(float(v) for v in a.get("x0", [0.0] * n))
    if len(x0) != n:
        raise ConfigError("atom.x0 must have one entry per dimension")
    r = a.get("r", 2.0)
    r = float("inf") if r in ("inf", "infinity", None) else float(r)
    if r <= 1.0:
        raise ConfigError("atom.r must exceed 1")
    s = a.get("s")
    atom = AtomSpec(x0, int(a.get("k0", 0)), r, None if s is None else int(s), int(a.get("seed", 0)))

    dd = _sub(raw, "decomposition")
    _unknown(dd, ("count", "coefficients", "k_range", "spread", "seed"), "decomposition")
    coef = dd.get("coefficients", {})
    if coef.get("law", "loguniform") != "loguniform":
        raise ConfigError("decomposition.coefficients.law must be 'loguniform'")
    decomp = DecompositionSpec(int(dd.get("count", 5)), float(coef.get("low", 1e-3)),
                               float(coef.get("high", 1e3)),
                               tuple(int(v) for v in dd.get("k_range", (-2, 2))),
                               float(dd.get("spread", 2.0)), int(dd.get("seed", 1)))
    if not 1 <= decomp.count <= 64:
        raise ConfigError("decomposition.count must lie in [1, 64]")
    if not 0 < decomp.coef_low <= decomp.coef_high:
        raise ConfigError("coefficient range must satisfy 0 < low <= high")

    g = _sub(raw, "grid")
    _unknown(g, ("resolution", "padding"), "grid")
    res = int(g.get("resolution", 64))
    if res < 2 or res & (res - 1):
        raise ConfigError("grid.resolution must be a power of two")
    grid = GridSpec(res, float(g.get("padding", 1.05)))

    sc = _sub(raw, "scan")
    _unknown(sc, ("k_min", "k_max", "directions", "deltas"), "scan")
    deltas = sc.get("deltas", {"base": 2.0, "count": 12})
    if isinstance(deltas, dict):
        deltas = [float(deltas.get("base", 2.0)) ** -j for j in range(1, int(deltas.get("count", 12)) + 1)]
    scan = ScanSpec(int(sc.get("k_min", -6)), int(sc.get("k_max", 6)),
                    int(sc.get("directions", 16)), tuple(float(v) for v in deltas))
    if scan.k_min >= scan.k_max:
        raise ConfigError("scan.k_min must be below scan.k_max")
    if len(scan.deltas) < 4 or any(b >= a_ for a_, b in zip(scan.deltas, scan.deltas[1:])):
        raise ConfigError("scan.deltas must be a decreasing sequence of at least 4 values")

    checks = raw.get("checks", list(CHECK_ORDER))
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks must be a nonempty list")
    bad = [c for c in checks if c not in CHECK_ORDER]
    if bad:
        raise ConfigError(f"unknown checks: {', '.join(map(str, bad))}")

    return RunConfig(n, tuple(flat.tolist()), exponent, atom, decomp, grid, scan,
                     tuple(checks), str(raw.get("output", "out")), raw.get("pins"))


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg} at line {exc.lineno}") from None
    return parse_config(raw)
