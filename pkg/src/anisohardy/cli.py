"""Command-line batch verifier: ``verify --config <path>`` and ``report --dir <path>``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, atoms, dilation, report, sampling, varexp
from .config import CHECK_ORDER, RunConfig, load_config
from .errors import AnisoError, ConfigError

MC_SAMPLES = 200_000
HOMOGENEITY_POINTS = 1000
HOLDER_PAIRS = 1000
WIDEN_TOL = 0.05
RESCALE_TOL = 1e-6


class Context:
    """Shared immutable inputs, built once before the checks fan out."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.d = dilation.make_dilation(cfg.matrix_array)
        try:
            self.p = varexp.from_spec(cfg.exponent, self.d)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad exponent spec: {exc}") from None
        needs_atom = set(cfg.checks) - {"dilation", "varexp"}
        self.atom = self.decomp = self.scan = None
        if needs_atom:
            a = cfg.atom
            self.atom = atoms.make_atom(self.d, self.p, (np.array(a.x0), a.k0), a.r, a.s, a.seed,
                                        resolution=cfg.grid.resolution)
        if {"atoms", "theorem31"} & set(cfg.checks):
            dd = cfg.decomposition
            self.decomp = atoms.random_decomposition(
                self.d, self.p, dd.count, dd.seed, k_range=dd.k_range,
                coef_range=(dd.coef_low, dd.coef_high), spread=dd.spread, r_exp=cfg.atom.r,
                s=cfg.atom.s, resolution=cfg.grid.resolution)
        if {"lemma32", "theorem31"} & set(cfg.checks):
            sc = cfg.scan
            self.scan = analysis.build_scan_grid(self.d, sc.k_min, sc.k_max, sc.directions)


def check_dilation(ctx: Context) -> report.VerificationReport:
    d = ctx.d
    rng = np.random.default_rng(ctx.cfg.atom.seed)
    rep = report.VerificationReport("dilation", {"n": d.n, "b": d.b})
    rep.add_row("r", d.expansion_factor, 1.0, d.expansion_factor, d.expansion_factor > 1.0)

    hw = d.half_widths
    x = rng.uniform(-hw, hw, size=(MC_SAMPLES, d.n))
    frac = float(np.mean(d.in_ball(x, 0)))
    box = float(np.prod(2 * hw))
    vol, sigma = frac * box, box * math.sqrt(frac * (1 - frac) / MC_SAMPLES)
    rep.add_row("volume", vol, 1.0, vol, abs(vol - 1.0) <= 3 * sigma)

    pts = dilation.sample_ball(d, HOMOGENEITY_POINTS, rng) * np.exp(rng.uniform(-3, 3, (HOMOGENEITY_POINTS, 1)))
    base = d.step_index(pts)
    mismatches = 0
    for k in range(-4, 5):
        mismatches += int(np.sum(d.step_index(pts @ d.power(k).T) != base + k))
    rep.add_row("homogeneity", mismatches, 0, None, mismatches == 0)

    band = dilation.comparability_band(d, pts)
    spreads = []
    for regime in ("large", "small"):
        c = band[regime]
        spread = c["C_high"] * c["C_low"]
        spreads.append(spread)
        rep.add_row(f"band_{regime}", spread, None, spread, math.isfinite(spread))
    rep.sup_ratio = max(spreads)
    rep.notes["band"] = band
    return rep


def check_varexp(ctx: Context) -> report.VerificationReport:
    d, p = ctx.d, ctx.p
    rng = np.random.default_rng(ctx.cfg.atom.seed)
    k0 = ctx.cfg.atom.k0
    rep = report.VerificationReport("varexp", {"family": p.family, "k0": k0})
    grid_val = varexp.indicator_norm(p, d, (np.zeros(d.n), k0))
    if p.family in ("constant", "log_perturbed"):
        series = varexp.indicator_norm_series(p, d, k0)
        ratio = grid_val / series
        rep.add_row("indicator_norm", grid_val, series, ratio, abs(ratio - 1.0) <= 1e-2)
        rep.sup_ratio = ratio
    else:
        rep.add_row("indicator_norm", grid_val, None, None, math.isfinite(grid_val) and grid_val > 0)
        rep.sup_ratio = grid_val
    x = dilation.sample_ball(d, HOLDER_PAIRS, rng) * np.exp(rng.uniform(-4, 4, (HOLDER_PAIRS, 1)))
    y = x + dilation.sample_ball(d, HOLDER_PAIRS, rng) * np.exp(rng.uniform(-6, 2, (HOLDER_PAIRS, 1)))
    lh = varexp.log_holder_check(p, d, x, y)
    consts = p.log_holder_constants
    rep.add_row("C_log", lh["C_log_empirical"], None, None, math.isfinite(lh["C_log_empirical"]))
    c_inf = consts["C_inf"] if consts else None
    ok = math.isfinite(lh["C_inf_empirical"]) and (c_inf is None or lh["C_inf_empirical"] <= c_inf * (1 + 1e-9) + 1e-12)
    rep.add_row("C_inf", lh["C_inf_empirical"], c_inf, None, ok)
    rep.notes["log_holder"] = lh
    return rep


def check_atoms(ctx: Context) -> report.VerificationReport:
    d, p = ctx.d, ctx.p
    rep = report.VerificationReport("atoms", {"count": 1 + len(ctx.decomp.atoms)})
    worst = 0.0
    for a in (ctx.atom, *ctx.decomp.atoms):
        v = atoms.validate_atom(a, d, p)
        worst = max(worst, v["size_ratio"])
        rep.add_row(np.concatenate([a.x0, [a.k0]]), v["size_ratio"], 1.0, v["moment_ratio"], v["valid"])
    total, expr, ok = atoms.coefficient_sum_check(p, d, ctx.decomp)
    rep.add_row("coefficient_sum", total, expr, total / expr, ok)
    rep.sup_ratio = worst
    return rep


def check_lemma31(ctx: Context) -> report.VerificationReport:
    a = ctx.atom
    alphas = atoms.multi_indices(ctx.d.n, min(a.s_order, 1))
    return analysis.lemma31_scan(a, ctx.d, alphas)


def check_lemma32(ctx: Context) -> report.VerificationReport:
    return analysis.lemma32_scan(ctx.atom, ctx.d, ctx.p, ctx.scan)


def check_theorem31(ctx: Context) -> report.VerificationReport:
    rep = analysis.theorem31_scan(ctx.decomp, ctx.d, ctx.p, ctx.scan)
    scaled = analysis.theorem31_scan(ctx.decomp.scaled(10.0), ctx.d, ctx.p, ctx.scan)
    drift = abs(scaled.sup_ratio / rep.sup_ratio - 1.0)
    rep.notes["rescale_drift"] = drift
    rep.require("rescale_invariance", drift <= RESCALE_TOL)
    return rep


def check_theorem41(ctx: Context) -> report.VerificationReport:
    return analysis.origin_limit_scan(ctx.atom, ctx.d, ctx.p, deltas=ctx.cfg.scan.deltas)


def check_hardy_littlewood(ctx: Context) -> report.VerificationReport:
    sc = ctx.cfg.scan
    rep = analysis.hardy_littlewood_integral(ctx.atom, ctx.d, ctx.p, (sc.k_min, sc.k_max))
    wide = analysis.hardy_littlewood_integral(ctx.atom, ctx.d, ctx.p, (sc.k_min - 2, sc.k_max + 2))
    change = abs(wide.sup_ratio / rep.sup_ratio - 1.0)
    rep.notes["widen_change"] = change
    rep.require("widening_stable", change <= WIDEN_TOL)
    if ctx.p.p_minus == ctx.p.p_plus:
        e1, e2 = analysis.hl_weight_exponents(ctx.p)
        rep.require("branches_coincide", e1 == e2)
    return rep


def _cartesian_copy(a: atoms.Atom, d, resolution: int) -> sampling.SampledFunction:
    ext = np.abs(a.x0) + atoms._ball_extent(d, a.ball)
    grid = sampling.make_grid(d.n, 4.0 * float(np.max(ext)), resolution)
    return sampling.dilate_samples(a.samples, d, 0, target=grid)


def check_maximal(ctx: Context) -> report.VerificationReport:
    d, p, a = ctx.d, ctx.p, ctx.atom
    res = {1: 4096, 2: 4 * ctx.cfg.grid.resolution, 3: ctx.cfg.grid.resolution}[d.n]
    f = _cartesian_copy(a, d, res)
    phi = analysis.default_phi(d)
    m_narrow = analysis.radial_maximal(f, phi, d, (-6, 6))
    m_wide = analysis.radial_maximal(f, phi, d, (-7, 7))
    proxy = varexp.luxemburg_norm(p, m_narrow)
    proxy_wide = varexp.luxemburg_norm(p, m_wide)
    N = atoms.atomic_norm_from_balls(p, d, np.array([1.0]), [a.ball])
    ratio = proxy / N
    rep = report.VerificationReport("maximal", {"k0": a.k0, "resolution": res})
    rep.add_row("proxy", proxy, N, ratio, 1e-2 <= ratio <= 1e2)
    rep.add_row("proxy_widened", proxy_wide, proxy, proxy_wide / proxy, proxy_wide >= proxy)
    rep.require("pointwise_monotone", bool(np.all(m_wide.values >= m_narrow.values)))
    rep.sup_ratio = ratio
    return rep


CHECKS = {
    "dilation": check_dilation,
    "varexp": check_varexp,
    "atoms": check_atoms,
    "lemma31": check_lemma31,
    "lemma32": check_lemma32,
    "theorem31": check_theorem31,
    "theorem41": check_theorem41,
    "hardy-littlewood": check_hardy_littlewood,
    "maximal": check_maximal,
}
assert tuple(CHECKS) == CHECK_ORDER


def thread_cap() -> int:
    raw = os.environ.get("ANISO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"ANISO_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_checks(cfg: RunConfig, threads: int | None = None) -> list[report.VerificationReport]:
    ctx = Context(cfg)
    names = cfg.ordered_checks
    with ThreadPoolExecutor(max_workers=threads or thread_cap()) as pool:
        futures = [pool.submit(CHECKS[name], ctx) for name in names]
        return [fut.result() for fut in futures]


def verify(cfg: RunConfig, out_dir: str | None = None, threads: int | None = None) -> int:
    out_dir = out_dir or cfg.output
    reports = run_checks(cfg, threads)
    pin_path = cfg.pins or os.path.join(out_dir, "pins.json")
    pins = report.load_pins(pin_path)
    os.makedirs(out_dir, exist_ok=True)
    if pins is None:
        pins = report.write_pins(pin_path, reports)
    for rep in reports:
        rep.pinned = pins.get(rep.check)
    report.write_reports(reports, out_dir)
    failing = [r.check for r in reports if not r.verdict]
    if failing:
        print("failing checks: " + ", ".join(failing), file=sys.stderr)
        return 1
    return 0


def show_report(out_dir: str) -> int:
    path = os.path.join(out_dir, "summary.json")
    if not os.path.exists(path):
        raise ConfigError(f"no summary.json in {out_dir}")
    with open(path) as fh:
        summary = json.load(fh)
    pins = report.load_pins(os.path.join(out_dir, "pins.json"))
    entries = [report.reassess(e, pins) for e in summary]
    print(report.format_table(entries))
    return 0 if all(e["verdict"] == "pass" for e in entries) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisohardy", description="Anisotropic Hardy-space inequality verifier")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the configured checks")
    v.add_argument("--config", required=True)
    v.add_argument("--out", default=None, help="output directory (overrides the config)")
    r = sub.add_parser("report", help="print the summary table of a run")
    r.add_argument("--dir", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return verify(load_config(args.config), args.out)
        return show_report(args.dir)
    except (AnisoError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}".splitlines()[0], file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
