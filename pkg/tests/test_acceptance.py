"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are also collected and
repeated in the pytest terminal summary.  The full-length scenario runs are
shared between criteria through a session fixture.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from exflow.diagnostics import check_loops_inequalities, energy_components
from exflow.dynamics import discretize, alpha_of
from exflow.geometry import ExteriorMapSpec, forward_map, inverse_map, validate_map
from exflow.harness import Scenario, run_scenario
from exflow.kernels import KernelContext, bs_kernel

GROWTH_SCENARIOS = (
    "disk-generic",
    "disk-even",
    "ellipse-theta1",
    "ellipse-theta2-negative-alpha",
    "ellipse-theta2-large-alpha",
)


def report(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


class Runs:
    def __init__(self, root):
        self.root = root
        self.cache = {}

    def get(self, name):
        if name not in self.cache:
            t0 = time.perf_counter()
            res = run_scenario(Scenario(name), self.root / name)
            self.cache[name] = (res, time.perf_counter() - t0)
        return self.cache[name]


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("scenarios"))


def reference_disk_kernel(x, y):
    """Direct evaluation of the disk-exterior Biot-Savart bracket for real 2-vectors."""
    def perp(v):
        return np.array([-v[1], v[0]])

    ystar = y / (y @ y)
    a = x - y
    b = x - ystar
    return (perp(a) / (a @ a) - perp(b) / (b @ b)) / (2 * math.pi)


def test_criterion_1_disk_kernel_equivalence():
    rng = np.random.default_rng(2024)

    def sample(n):
        r = np.exp(rng.uniform(0, math.log(10), n))
        th = rng.uniform(0, 2 * math.pi, n)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    x, y = sample(1000), sample(1000)
    ctx = KernelContext(ExteriorMapSpec.disk(), 0.0, 0.0)
    t0 = time.perf_counter()
    k = bs_kernel(ctx, x, y)
    elapsed = time.perf_counter() - t0
    ref = np.array([reference_disk_kernel(a, b) for a, b in zip(x, y)])
    err = float(np.max(np.abs(k - ref)))
    report(1, err <= 1e-12 and elapsed < 1.0,
           f"disk kernel max abs error {err:.3e} (<= 1e-12) in {elapsed:.3f} s (< 1 s)")


def test_criterion_2_analytic_orbit(tmp_path):
    # one revolution takes 6 pi ~ 18.85, so t_end = 19 is enough to time it
    t0 = time.perf_counter()
    res = run_scenario(Scenario("orbit-regression", {"dt": 1e-3, "t_end": 19.0}), tmp_path)
    elapsed = time.perf_counter() - t0
    expected = 6 * math.pi
    err = res.orbit_rel_error if res.orbit_rel_error is not None else math.inf
    report(2, res.status == 0 and err <= 1e-4 and elapsed < 5.0,
           f"orbit period relative error {err:.3e} vs {expected:.6f} (<= 1e-4) in {elapsed:.2f} s (< 5 s)")


def test_criterion_3_conservation(tmp_path, runs):
    scenario = Scenario("disk-generic", {"t_end": 10.0, "dt": 5e-3})
    cfg = scenario.config()
    ens0 = discretize(cfg.map, cfg.patches, cfg.blob_delta, cfg.even_symmetric)
    ctx = KernelContext(cfg.map, alpha_of(cfg, ens0), cfg.blob_delta)
    scale = sum(abs(c) for c in energy_components(ctx, ens0))

    t0 = time.perf_counter()
    res = run_scenario(scenario, tmp_path)
    elapsed = time.perf_counter() - t0
    recs = res.records
    n = len(ens0)
    delta_ok = cfg.blob_delta == pytest.approx(2 * cfg.patches[0].spacing)
    mass_drift = max(abs(r.mass - recs[0].mass) for r in recs)
    inertia_drift = max(abs(r.inertia - recs[0].inertia) for r in recs) / recs[0].inertia
    energy_drift = max(abs(r.energy - recs[0].energy) for r in recs) / scale

    even, _ = runs.get("disk-even")
    centre_ok = all(r.center == (0.0, 0.0) for r in even.records)

    ok = (res.status == 0 and 900 <= n <= 1100 and delta_ok and mass_drift == 0.0
          and inertia_drift < 5e-3 and energy_drift < 1e-2 and centre_ok and elapsed < 120)
    report(3, ok,
           f"N={n}, mass drift {mass_drift!r} (== 0), inertia drift {inertia_drift:.2e} (< 5e-3), "
           f"energy drift {energy_drift:.2e} of scale {scale:.4g} (< 1e-2), "
           f"even centre exactly 0: {centre_ok}, {elapsed:.1f} s (< 120 s)")


def quarter_means(t, v):
    t, v = np.asarray(t), np.asarray(v)
    span = t[-1] - t[0]
    first = v[t <= t[0] + span / 4].mean()
    last = v[t >= t[-1] - span / 4].mean()
    return first, last


def test_criterion_4_log_moment_trend(runs):
    res, _ = runs.get("ellipse-theta2-negative-alpha")
    recs = res.records
    t = [r.t for r in recs]
    l1, l4 = quarter_means(t, [r.log_moment for r in recs])
    p1, p4 = quarter_means(t, [r.min_log_pair for r in recs])
    alpha_ok = recs[0].alpha == pytest.approx(-recs[0].mass)
    ok = res.status == 0 and alpha_ok and t[-1] == pytest.approx(20.0) and l4 <= l1 + 1 and p4 <= p1 + 1
    report(4, ok,
           f"alpha=-m; L quarter means {l1:.5f} -> {l4:.5f}; "
           f"min-log-pair quarter means {p1:.5f} -> {p4:.5f} (final <= first + 1)")


def superlinear_fraction(t, j):
    """Convex quadratic excess at the window end relative to the linear part there."""
    t = np.asarray(t)
    c2, c1, c0 = np.polyfit(t, np.asarray(j), 2)
    T = t[-1]
    return max(c2, 0.0) * T * T / (abs(c0) + abs(c1) * T)


def test_criterion_5_linear_envelopes(runs):
    worst = []
    ok = True
    for name in GROWTH_SCENARIOS:
        res, _ = runs.get(name)
        recs = [r for r in res.records if r.t <= 20.0 + 1e-9]
        t = [r.t for r in recs]
        fr = superlinear_fraction(t, [r.j_theta1 for r in recs])
        parts = [f"j1 {fr:.2e}"]
        ok &= res.status == 0 and fr < 0.1
        if recs[0].theta == 2:
            fr2 = superlinear_fraction(t, [r.j_theta2 for r in recs])
            parts.append(f"j2 {fr2:.2e}")
            ok &= fr2 < 0.1
        worst.append(f"{name}: {', '.join(parts)}")
    report(5, ok, "superlinear fractions (< 0.1) " + "; ".join(worst))


def test_criterion_6_confinement_envelopes(runs):
    p = {}
    times = {}
    for name in GROWTH_SCENARIOS:
        res, elapsed = runs.get(name)
        fit = res.fits.get("r_support_mapped")
        p[name] = fit.exponent if (fit is not None and res.status == 0) else math.inf
        times[name] = elapsed
    ok = (all(v <= 0.6 for v in p.values()) and p["disk-even"] <= p["disk-generic"]
          and all(v < 300 for v in times.values()))
    detail = "; ".join(f"{k} p={v:.4f} ({times[k]:.0f} s)" for k, v in p.items())
    report(6, ok, f"{detail} (p <= 0.6, even <= generic, < 300 s each)")


def test_criterion_7_geometry_suite():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    errs = {}
    inj = {}
    finite = {}
    for name in ("disk", "ellipse:0.5"):
        spec = ExteriorMapSpec.from_preset(name)
        w = np.exp(rng.uniform(0, math.log(100), 10_000)) * np.exp(2j * math.pi * rng.uniform(size=10_000))
        errs[name] = float(np.max(np.abs(forward_map(spec, inverse_map(spec, w)) - w)))
        rep = validate_map(spec)
        inj[name] = rep.injectivity_ok
        finite[name] = bool(np.isfinite([rep.max_h_prime_times_z2, rep.max_h_second_times_z3,
                                         rep.max_DT_norm, rep.max_DTinv_norm]).all())
    elapsed = time.perf_counter() - t0
    ok = all(e <= 1e-11 for e in errs.values()) and all(inj.values()) and all(finite.values()) and elapsed < 2
    detail = "; ".join(f"{k}: round trip {errs[k]:.2e}, injective {inj[k]}, finite {finite[k]}" for k in errs)
    report(7, ok, f"{detail} in {elapsed:.2f} s (< 2 s)")


def test_criterion_8_loops_property():
    parts = []
    ok = True
    for name in ("disk", "ellipse:0.5"):
        spec = ExteriorMapSpec.from_preset(name)
        t0 = time.perf_counter()
        rep = check_loops_inequalities(spec, 100_000, seed=11, tol=1e-12)
        elapsed = time.perf_counter() - t0
        ok &= rep.violations == 0 and elapsed < 2
        parts.append(f"{name}: {rep.violations} violations in {rep.n_pairs} pairs, {elapsed:.2f} s")
    report(8, ok, "; ".join(parts) + " (0 violations, < 2 s)")


def test_criterion_9_determinism(tmp_path):
    names = ("orbit-regression",) + GROWTH_SCENARIOS
    same = {}
    for name in names:
        over = {"t_end": 1.0}
        a = run_scenario(Scenario(name, over), tmp_path / name / "a")
        b = run_scenario(Scenario(name, over), tmp_path / name / "b")
        same[name] = a.csv_path.read_bytes() == b.csv_path.read_bytes()
    report(9, all(same.values()),
           "byte-identical CSV on rerun: " + ", ".join(f"{k}={v}" for k, v in same.items()))
