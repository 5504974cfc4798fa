import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exflow.diagnostics import (
    FitError,
    check_loops_inequalities,
    energy_components,
    eta,
    fit_growth_exponent,
    generalized_energy,
    log_moment,
    make_record,
    min_log_pair_moment,
    physical_moments,
    smoothed_tail_mass,
    theta_selector,
    weighted_moments,
)
from exflow.dynamics import VortexEnsemble
from exflow.geometry import ExteriorMapSpec, forward_map
from exflow.kernels import KernelContext, SingularityError

DISK = ExteriorMapSpec.disk()
ELLIPSE = ExteriorMapSpec.ellipse(0.5)
E = math.e


def ens(points, gam, **kw):
    return VortexEnsemble(np.array(points, dtype=float).reshape(-1, 2), gam, **kw)


def brute_energy(spec, alpha, delta, pos, gam):
    """Pairwise loop straight from the vorticity-form definition."""
    w = [complex(forward_map(spec, complex(*p))) for p in pos]
    total = 0.0
    for i, j in itertools.product(range(len(w)), repeat=2):
        wj_star = w[j] / abs(w[j]) ** 2
        if i != j:
            total -= gam[i] * gam[j] * 0.5 * math.log(abs(w[i] - w[j]) ** 2 + delta**2) / (2 * math.pi)
        total += gam[i] * gam[j] * math.log(abs(w[i] - wj_star) * abs(w[j])) / (2 * math.pi)
    for i in range(len(w)):
        total -= alpha / math.pi * gam[i] * math.log(abs(w[i]))
    return total


class TestEnergy:
    def test_single_particle(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        assert generalized_energy(ctx, ens([[2, 0]], [1.0])) == pytest.approx(math.log(3) / (2 * math.pi), rel=1e-14)

    def test_empty(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        assert generalized_energy(ctx, ens(np.zeros((0, 2)), [])) == 0.0

    @pytest.mark.parametrize("spec, alpha, delta", [(DISK, 0.0, 0.0), (ELLIPSE, 1.3, 0.1), (ELLIPSE, -2.0, 0.0)])
    def test_matches_pairwise_loop(self, spec, alpha, delta):
        rng = np.random.default_rng(3)
        pos = np.column_stack([rng.uniform(-4, 4, 12), rng.uniform(2, 4, 12)])
        gam = rng.uniform(0.1, 1.0, 12)
        ctx = KernelContext(spec, alpha, delta)
        assert generalized_energy(ctx, ens(pos, gam)) == pytest.approx(
            brute_energy(spec, alpha, delta, pos, gam), rel=1e-12)

    def test_coincident_without_blob(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        with pytest.raises(SingularityError):
            energy_components(ctx, ens([[2, 0], [2, 0]], [1.0, 1.0]))
        ctx = KernelContext(DISK, 0.0, 0.1)
        assert np.isfinite(generalized_energy(ctx, ens([[2, 0], [2, 0]], [1.0, 1.0])))


class TestMoments:
    def test_log_moment(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        assert log_moment(ctx, ens([[E, 0]], [2 * math.pi])) == pytest.approx(1.0, rel=1e-15)
        assert log_moment(ctx, ens([[E, 0], [0, E * E]], [math.pi, math.pi])) == pytest.approx(1.5, rel=1e-15)
        assert log_moment(ctx, ens([[1, 0], [0, -1]], [1.0, 2.0])) == 0.0

    def test_weighted(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        j1, j2 = weighted_moments(ctx, ens([[E, 0]], [1.0]))
        assert j1 == pytest.approx(E * E, rel=1e-15)
        assert j2 == pytest.approx(E * E, rel=1e-15)
        assert weighted_moments(ctx, ens([[1, 0], [-1, 0]], [1.0, 1.0])) == (0.0, 0.0)

    def test_weighted_use_mapped_radius(self):
        ctx = KernelContext(ELLIPSE, 0.0, 0.0)
        j1, _ = weighted_moments(ctx, ens([[2.25, 0]], [1.0]))
        assert j1 == pytest.approx(4 * math.log(2), rel=1e-11)

    def test_physical(self):
        inertia, center = physical_moments(ens([[3, 4]], [2.0]))
        assert inertia == 50.0 and center == (3.0, 4.0)
        with pytest.raises(ValueError):
            physical_moments(ens([[3, 4]], [0.0]))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-3, 10)),
                    min_size=1, max_size=30))
    def test_even_centre_is_exactly_zero(self, rows):
        pos = np.array([(x, y) for x, y, _ in rows])
        gam = np.array([g for *_, g in rows])
        e = ens(np.concatenate([pos, -pos]), np.concatenate([gam, gam]), even_symmetric=True)
        assert physical_moments(e)[1] == (0.0, 0.0)


class TestTailMass:
    def test_eta(self):
        assert eta(0.0) == 0.5
        assert eta(800.0) == 1.0

    def test_particle_on_radius(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        assert smoothed_tail_mass(ctx, ens([[0, 4]], [3.0]), 4.0) == 1.5

    def test_far_radius(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        e = ens([[2, 0], [0, -3]], [1.0, 1.0])
        r, lam = 100.0, 1 / (4 * math.log(100.0))
        assert smoothed_tail_mass(ctx, e, r) <= 2 * math.exp(-1 / (2 * lam))

    def test_near_one(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        e = ens([[2, 0], [0, -3]], [1.0, 1.0])
        assert smoothed_tail_mass(ctx, e, 1.0 + 1e-9, lam=0.01) == pytest.approx(2.0, rel=1e-12)
        assert smoothed_tail_mass(ctx, e, 1.0 + 1e-9) > 1.9

    def test_monotone_in_radius(self):
        ctx = KernelContext(ELLIPSE, 0.0, 0.0)
        rng = np.random.default_rng(0)
        e = ens(np.column_stack([rng.uniform(-5, 5, 50), rng.uniform(2, 6, 50)]), rng.uniform(0, 1, 50))
        f = [smoothed_tail_mass(ctx, e, r, lam=0.3) for r in (1.5, 2, 3, 5, 8, 13)]
        assert all(a >= b for a, b in zip(f, f[1:]))

    def test_bad_arguments(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        with pytest.raises(ValueError):
            smoothed_tail_mass(ctx, ens([[2, 0]], [1.0]), 1.0)
        with pytest.raises(ValueError):
            smoothed_tail_mass(ctx, ens([[2, 0]], [1.0]), 2.0, lam=1.5)


@pytest.mark.parametrize("alpha, expected", [(-0.1, 2), (0.5, 1), (1.2, 2), (0.0, 2), (1.0, 1)])
def test_theta_selector(alpha, expected):
    assert theta_selector(alpha, 1.0) == expected


class TestMinLogPair:
    def test_examples(self):
        ctx = KernelContext(DISK, 0.0, 0.0)
        assert min_log_pair_moment(ctx, ens([[1, 0], [0, 1]], [1.0, 1.0])) == 0.0
        assert min_log_pair_moment(ctx, ens([[E, 0], [0, E**3]], [1.0, 1.0])) == pytest.approx(6.0, rel=1e-14)
        assert min_log_pair_moment(ctx, ens([[0, -E]], [1.0])) == pytest.approx(1.0, rel=1e-15)

    def test_matches_quadratic_sum(self):
        ctx = KernelContext(ELLIPSE, 0.0, 0.0)
        rng = np.random.default_rng(5)
        e = ens(np.column_stack([rng.uniform(-5, 5, 60), rng.uniform(2, 6, 60)]), rng.uniform(0, 1, 60))
        r = np.abs(forward_map(ELLIPSE, e.positions))
        g = e.strengths
        brute = np.sum(np.outer(g, g) * np.log(np.minimum.outer(r, r)))
        assert min_log_pair_moment(ctx, e) == pytest.approx(brute, rel=1e-12)


class TestFit:
    def test_exact_power_law(self):
        t = np.linspace(1, 20, 50)
        fit = fit_growth_exponent(np.column_stack([t, 3 * np.sqrt(1 + t)]), 1, 20)
        assert fit.exponent == pytest.approx(0.5, abs=1e-12)
        assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
        assert fit.residual <= 1e-12

    def test_constant(self):
        t = np.linspace(1, 20, 50)
        assert fit_growth_exponent(np.column_stack([t, np.full_like(t, 2.0)]), 1, 20).exponent == pytest.approx(0, abs=1e-12)

    def test_log_corrected_quarter(self):
        t = np.linspace(10, 1000, 500)
        r = ((1 + t) * np.log(2 + t)) ** 0.25
        p = fit_growth_exponent(np.column_stack([t, r]), 10, 1000).exponent
        assert 0.25 <= p <= 0.33

    def test_too_few_samples(self):
        t = np.linspace(1, 20, 50)
        with pytest.raises(FitError):
            fit_growth_exponent(np.column_stack([t, t]), 30, 40)


class TestLoops:
    def test_hand_example(self):
        x, y = 2 + 0j, 2j
        lhs = abs(x.real * y.imag - x.imag * y.real)
        rhs = min(abs(x), abs(y)) * abs(x - y)
        assert lhs == 4.0 and rhs == pytest.approx(4 * math.sqrt(2))

    def test_disk_second_inequality_vanishes(self):
        rep = check_loops_inequalities(DISK, 2000, seed=1)
        assert rep.violations == 0
        assert rep.loops2_sup == 0.0

    def test_ellipse_bounded_across_scales(self):
        rep = check_loops_inequalities(ELLIPSE, 5000, seed=2)
        assert rep.max_loops1_ratio <= 1 + 1e-12
        assert np.isfinite(rep.loops2_sup)
        assert all(np.isfinite(v) for _, v in rep.loops2_sup_by_scale)

    def test_bad_count(self):
        with pytest.raises(ValueError):
            check_loops_inequalities(DISK, 0)


def test_record_fields():
    ctx = KernelContext(DISK, -1.0, 0.1)
    e = ens([[2, 0], [0, 3]], [0.5, 0.5])
    rec = make_record(ctx, e, 0.25)
    assert rec.t == 0.25 and rec.mass == 1.0 and rec.theta == 2
    assert [r for r, _ in rec.tail_mass] == [2.0, 4.0, 8.0, 16.0]
    assert rec.r_support_phys == 3.0 and rec.r_support_mapped == 3.0
