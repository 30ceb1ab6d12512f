"""Acceptance suite: one test and one pass/fail line per criterion."""
import json
import math
import os
import time

import numpy as np
import pytest

from anisohardy import analysis, atoms, cli, dilation, sampling, varexp

from conftest import DATA, STANDARD_MATRICES, expansive_matrix

pytestmark = pytest.mark.filterwarnings("ignore::anisohardy.errors.AliasingRisk")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def default_exponent(d):
    return varexp.log_perturbed(0.6, 0.3, d)


def standard(name):
    return dilation.make_dilation(STANDARD_MATRICES[name])


def test_criterion_01_dilation_geometry(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mc, fails = 10 ** 6, []
    worst_z, worst_exact, mismatches = 0.0, 0.0, 0
    for trial in range(100):
        A = expansive_matrix(rng, 2, 1.05, 3.0)
        d = dilation.make_dilation(A)
        if not d.expansion_factor > 1.0:
            fails.append(f"r<=1 at trial {trial}")
        # closed-form volume of {x^T P x < c}, reported alongside the sampled estimate
        exact = math.pi * d.ellipsoid_scale / math.sqrt(np.linalg.det(d.ellipsoid_form))
        worst_exact = max(worst_exact, abs(exact - 1.0))
        hw = d.half_widths
        x = rng.uniform(-hw, hw, (mc, 2))
        frac = float(np.mean(d.in_ball(x, 0)))
        box = float(np.prod(2 * hw))
        sigma = box * math.sqrt(frac * (1 - frac) / mc)
        z = abs(frac * box - 1.0) / sigma
        worst_z = max(worst_z, z)
        if z > 3.0:
            fails.append(f"volume z={z:.2f} at trial {trial}")
        pts = dilation.sample_ball(d, 1000, rng) * np.exp(rng.uniform(-3, 3, (1000, 1)))
        base = d.step_index(pts)
        for k in range(-4, 5):
            mismatches += int(np.sum(d.step_index(pts @ d.power(k).T) != base + k))
    elapsed = time.perf_counter() - t0
    ok = not fails and mismatches == 0 and elapsed < 60
    criterion(1, "dilation geometry", ok,
              f"100 matrices, worst volume z={worst_z:.2f} (closed-form |vol-1|<={worst_exact:.1e}), homogeneity mismatches={mismatches}, "
              f"{elapsed:.1f}s (<60s){'; ' + '; '.join(fails) if fails else ''}")
    assert ok


def test_criterion_02_comparability_bands(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    details, ok = [], True
    for name in ("iso2", "diag23", "rot"):
        # lambda_+- taken at the eigenvalue moduli, so 2I gives exponents exactly 1/2
        d = dilation.make_dilation(STANDARD_MATRICES[name], slack=0.0)
        x = dilation.sample_ball(d, 20000, rng) * np.exp(rng.uniform(-6, 6, (20000, 1)))
        band = dilation.comparability_band(d, x)
        finite = all(math.isfinite(band[r][c]) for r in band for c in ("C_low", "C_high"))
        ok &= finite
        details.append(f"{name} finite={finite}")
        if name == "iso2":
            e_minus = math.log(d.lambda_minus) / math.log(d.b)
            e_plus = math.log(d.lambda_plus) / math.log(d.b)
            ratio = max(band[r]["minus_max"] / band[r]["minus_min"] for r in band)
            ok &= e_minus == e_plus == 0.5 and ratio <= 2.01
            details.append(f"2I exponents=({e_minus}, {e_plus}) band ratio={ratio:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    criterion(2, "comparability bands", ok, ", ".join(details) + f", {elapsed:.1f}s (<10s)")
    assert ok


def test_criterion_03_variable_norm_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    m, L = 256, 2.0
    h = 2 * L / m
    for _ in range(20):
        p0 = rng.uniform(0.2, 1.0)
        vals = np.zeros(m)
        acc = 0.0
        pos = int(rng.integers(0, 10))
        while pos < m - 20:
            w, c = int(rng.integers(1, 20)), rng.uniform(-10, 10)
            vals[pos:pos + w] = c
            acc += abs(c) ** p0 * w * h
            pos += w + int(rng.integers(1, 10))
        got = varexp.luxemburg_norm(varexp.constant(p0), sampling.SampledFunction(vals, L))
        worst = max(worst, abs(got / acc ** (1 / p0) - 1))
    f = sampling.from_callable(lambda x: ((x[..., 0] >= 0) & (x[..., 0] < 2)).astype(float), 1, L, m)
    p = varexp.piecewise_test([((0.0,), (1.0,), 1.0), ((1.0,), (2.0,), 0.5)])
    pw = varexp.luxemburg_norm(p, f)
    pw_err = abs(pw / ((3 + math.sqrt(5)) / 2) - 1)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and pw_err <= 1e-4 and elapsed < 5
    criterion(3, "variable-norm oracle", ok,
              f"20 step functions worst rel err={worst:.2e}, piecewise {pw:.12f} rel err={pw_err:.2e}, "
              f"{elapsed:.2f}s (<5s)")
    assert ok


def test_criterion_04_atom_validity(criterion):
    t0 = time.perf_counter()
    names = ["iso2", "diag23", "rot"]
    dils = {n: standard(n) for n in names}
    bad, worst_moment = [], 0.0
    for i in range(50):
        d = dils[names[i % 3]]
        p = varexp.log_perturbed(0.9, 0.1, d)  # p_- = 0.9 keeps s = 0 admissible
        k0, s, r = i % 5 - 2, (i // 5) % 3, (2.0, math.inf)[(i // 15) % 2]
        x0 = np.random.default_rng(i).uniform(-2, 2, 2)
        a = atoms.make_atom(d, p, (x0, k0), r, s, seed=i)
        v = atoms.validate_atom(a, d, p)
        worst_moment = max(worst_moment, v["moment_ratio"])
        if not v["valid"]:
            bad.append(i)
    elapsed = time.perf_counter() - t0
    ok = not bad and worst_moment <= 1e-8 and elapsed < 120
    criterion(4, "atom validity", ok,
              f"50 atoms, invalid={bad}, worst moment residual/L1={worst_moment:.2e}, {elapsed:.1f}s (<120s)")
    assert ok


def test_criterion_05_atom_fourier_decay(criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    for name in ("iso2", "diag23", "rot"):
        d = standard(name)
        p = default_exponent(d)
        sups, margin = [], math.inf
        for k0 in range(-2, 3):
            a = atoms.make_atom(d, p, (np.zeros(2), k0), seed=0)
            rep = analysis.lemma31_scan(a, d, atoms.multi_indices(2, a.s_order))
            sups.append(rep.sup_ratio)
            margin = min(margin, rep.notes["slope_margin"])
        factor = max(sups) / min(sups)
        ok &= margin >= -0.15 and factor <= 4
        details.append(f"{name}: slope margin={margin:+.3f} k0 factor={factor:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    criterion(5, "Fourier decay of dilated atoms", ok, "; ".join(details) + f"; {elapsed:.1f}s (<120s)")
    assert ok


def test_criterion_06_shell_scans(criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    for name in ("iso2", "diag23", "rot"):
        d = standard(name)
        scan = analysis.build_scan_grid(d, -6, 6, 16)
        for p in (varexp.constant(0.5), default_exponent(d)):
            sups, routes = [], True
            for k0 in range(-3, 4):
                a = atoms.make_atom(d, p, (np.zeros(2), k0), seed=0)
                rep = analysis.lemma32_scan(a, d, p, scan)
                sups.append(rep.sup_ratio)
                routes &= rep.criteria["route_agreement"]
            factor = max(sups) / min(sups)
            finite = all(math.isfinite(s) for s in sups)
            good = finite and routes and factor <= 4
            ok &= good
            details.append(f"{name}/{p.family}: k0 factor={factor:.2f} routes={routes}")
        p = default_exponent(d)
        drifts, t31_finite = [], True
        for seed in range(3):
            dec = atoms.random_decomposition(d, p, 5, seed, resolution=64)
            base = analysis.theorem31_scan(dec, d, p, scan)
            scaled = analysis.theorem31_scan(dec.scaled(10.0), d, p, scan)
            t31_finite &= math.isfinite(base.sup_ratio)
            drifts.append(abs(scaled.sup_ratio / base.sup_ratio - 1))
        ok &= t31_finite and max(drifts) <= 1e-6
        details.append(f"{name} decomposition rescale drift={max(drifts):.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    criterion(6, "shell scans and uniformity", ok, "; ".join(details) + f"; {elapsed:.1f}s (<180s)")
    assert ok


def test_criterion_07_origin_limit(criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    deltas = 2.0 ** -np.arange(1, 13)
    for name in ("iso2", "diag23", "rot"):
        d = standard(name)
        for p in (varexp.constant(0.5), default_exponent(d)):
            a = atoms.make_atom(d, p, (np.zeros(2), 0), seed=0)
            rep = analysis.origin_limit_scan(a, d, p, n_dir=16, deltas=deltas)
            good = rep.criteria["decay_to_1e-2"] and rep.criteria["slope"]
            ok &= good
            details.append(f"{name}/{p.family}: slope={rep.slope:.3f} rate={rep.notes['rate']:.3f} "
                           f"final/initial={rep.sup_ratio:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    criterion(7, "vanishing at the origin", ok, "; ".join(details) + f"; {elapsed:.1f}s (<60s)")
    assert ok


def test_criterion_08_hardy_littlewood(criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    for name in ("iso2", "diag23", "rot"):
        d = standard(name)
        p = default_exponent(d)
        a = atoms.make_atom(d, p, (np.zeros(2), 0), seed=0)
        base = analysis.hardy_littlewood_integral(a, d, p, (-6, 6))
        wide = analysis.hardy_littlewood_integral(a, d, p, (-8, 8))
        change = abs(wide.sup_ratio / base.sup_ratio - 1)
        worst = max(r[3] for r in base.rows if r[3] is not None)
        ok &= base.criteria["outer_decay"] and change < 0.05
        details.append(f"{name}: worst outer ratio={worst:.3f} widening change={change:.2%}")
    e1, e2 = analysis.hl_weight_exponents(varexp.constant(0.7))
    ok &= e1 == e2
    details.append(f"constant p branches {e1} == {e2}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    criterion(8, "Hardy-Littlewood shells", ok, "; ".join(details) + f"; {elapsed:.1f}s (<120s)")
    assert ok


def test_criterion_09_coefficient_sum(criterion):
    t0 = time.perf_counter()
    d = standard("diag23")
    p = default_exponent(d)
    failures, slack = 0, math.inf
    for seed in range(100):
        dec = atoms.random_decomposition(d, p, 5, seed, resolution=16)
        total, expr, verdict = atoms.coefficient_sum_check(p, d, dec)
        failures += not verdict
        slack = min(slack, expr / total)
    a = atoms.make_atom(d, p, (np.zeros(2), 0), resolution=16)
    total, expr, _ = atoms.coefficient_sum_check(p, d, atoms.AtomicDecomposition(np.array([1.0]), (a,)))
    eq_err = abs(total / expr - 1)
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and eq_err <= 1e-4 and elapsed < 30
    criterion(9, "coefficient sum", ok,
              f"100 decompositions, failures={failures}, min expression/sum={slack:.3f}, "
              f"single-atom rel gap={eq_err:.1e}, {elapsed:.1f}s (<30s)")
    assert ok


def test_criterion_10_regression_discipline(criterion, tmp_path):
    cfg_raw = json.load(open(os.path.join(ROOT, "configs", "default.json")))
    pins_path = os.path.join(DATA, "pins.json")
    cfg_raw["pins"] = pins_path
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(cfg_raw))
    frozen = open(pins_path, "rb").read()
    codes = [cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / run)]) for run in ("a", "b")]
    same_csv = (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
    pins = json.loads(frozen)
    summary = json.loads((tmp_path / "b" / "summary.json").read_text())
    growth = max(e["sup_ratio"] / pins[e["check"]] - 1 for e in summary if e["check"] in pins)
    untouched = open(pins_path, "rb").read() == frozen
    ok = codes == [0, 0] and same_csv and growth <= 0.10 and untouched
    criterion(10, "regression discipline", ok,
              f"exit codes={codes}, max pin growth={growth:+.2%}, byte-identical report.csv={same_csv}, "
              f"pins untouched={untouched}")
    assert ok
