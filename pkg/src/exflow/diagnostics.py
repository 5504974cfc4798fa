"""Conserved and slowly-growing functionals of a vortex ensemble.

All mapped-plane quantities use T(x_i) of the particle positions.  The energy
is evaluated in its vorticity form,

    E = -sum_{i != j} g_i g_j log|T_i - T_j| / 2pi
        + sum_{i, j} g_i g_j log(|T_i - T_j*| |T_j|) / 2pi
        - (alpha / pi) sum_i g_i log|T_i|,

with the free-space self term dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from .geometry import ExteriorMapSpec, forward_map, inverse_map, map_derivative
from .kernels import KernelContext, SingularityError

TAIL_RADII = (2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    mass: float
    alpha: float
    energy: float
    log_moment: float
    j_theta1: float
    j_theta2: float
    inertia: float
    center: tuple[float, float]
    r_support_phys: float
    r_support_mapped: float
    tail_mass: tuple[tuple[float, float], ...]
    theta: int
    min_log_pair: float = float("nan")


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    prefactor: float
    fit_window: tuple[float, float]
    residual: float
    n_samples: int = 0


class FitError(ValueError):
    pass


class LoopsInequalityError(AssertionError):
    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


def _mapped_radii(ctx: KernelContext, ensemble):
    pos = np.asarray(ensemble.positions).reshape(-1, 2)
    if pos.shape[0] == 0:
        return np.zeros(0, np.complex128)
    return np.asarray(forward_map(ctx.map, pos[:, 0] + 1j * pos[:, 1]), dtype=np.complex128)


@numba.njit(parallel=True, cache=True)
def _energy_rows(w, gam, delta2):
    """Per-row partial sums (free-space, image) of the energy double sum."""
    n = w.shape[0]
    free = np.zeros(n)
    img = np.zeros(n)
    bad = np.zeros(n, dtype=np.bool_)
    for i in numba.prange(n):
        fi = 0.0
        gi = 0.0
        for j in range(n):
            r2 = w[j].real * w[j].real + w[j].imag * w[j].imag
            sr = w[j].real / r2
            si = w[j].imag / r2
            br = w[i].real - sr
            bi = w[i].imag - si
            gi += gam[j] * 0.5 * np.log((br * br + bi * bi) * r2)
            if j != i:
                ar = w[i].real - w[j].real
                ai = w[i].imag - w[j].imag
                d2 = ar * ar + ai * ai + delta2
                if d2 == 0.0:
                    bad[i] = True
                fi += gam[j] * 0.5 * np.log(d2)
        free[i] = gam[i] * fi
        img[i] = gam[i] * gi
    return free, img, bad


def energy_components(ctx: KernelContext, ensemble, w=None):
    """The three terms (free-space, image, harmonic) whose sum is E."""
    if w is None:
        w = _mapped_radii(ctx, ensemble)
    gam = np.ascontiguousarray(ensemble.strengths, dtype=np.float64)
    if w.size == 0:
        return 0.0, 0.0, 0.0
    free, img, bad = _energy_rows(np.ascontiguousarray(w), gam, float(ctx.blob_delta) ** 2)
    if bad.any():
        raise SingularityError("coincident particles in energy with delta = 0")
    two_pi = 2.0 * np.pi
    e_free = -math.fsum(free) / two_pi
    e_img = math.fsum(img) / two_pi
    e_harm = -(ctx.alpha / np.pi) * math.fsum(gam * np.log(np.abs(w)))
    return e_free, e_img, e_harm


def generalized_energy(ctx: KernelContext, ensemble, w=None) -> float:
    return float(sum(energy_components(ctx, ensemble, w)))


def log_moment(ctx: KernelContext, ensemble, w=None) -> float:
    """L = (1/2pi) sum_i g_i log|T(x_i)|."""
    if w is None:
        w = _mapped_radii(ctx, ensemble)
    return math.fsum(np.asarray(ensemble.strengths) * np.log(np.abs(w))) / (2.0 * np.pi)


def weighted_moments(ctx: KernelContext, ensemble, w=None) -> tuple[float, float]:
    """(sum g |T|^2 log|T|, sum g |T|^2 log^2|T|)."""
    if w is None:
        w = _mapped_radii(ctx, ensemble)
    r = np.abs(w)
    lg = np.log(r)
    gam = np.asarray(ensemble.strengths)
    base = gam * r * r * lg
    return math.fsum(base), math.fsum(base * lg)


def physical_moments(ensemble) -> tuple[float, tuple[float, float]]:
    """Moment of inertia sum g|x|^2 and centre of vorticity sum g x / m.

    Sums are exactly rounded (math.fsum), so mirror-symmetric ensembles give a
    centre of exactly (0, 0).
    """
    gam = np.asarray(ensemble.strengths)
    pos = np.asarray(ensemble.positions).reshape(-1, 2)
    m = math.fsum(gam)
    if m <= 0:
        raise ValueError("centre of vorticity is undefined for zero mass")
    inertia = math.fsum(gam * pos[:, 0] ** 2) + math.fsum(gam * pos[:, 1] ** 2)
    cx = math.fsum(gam * pos[:, 0]) / m
    cy = math.fsum(gam * pos[:, 1]) / m
    return inertia, (cx, cy)


def eta(s):
    """Logistic function e^s / (1 + e^s)."""
    return expit(s)


def smoothed_tail_mass(ctx: KernelContext, ensemble, r: float, lam: float | None = None, w=None) -> float:
    """f_r = sum_i g_i eta((|T_i|^2 - r^2) / (lam r^2)).

    ``lam`` defaults to 1 / (4 log r), capped at 1 for r close to 1.
    """
    if not r > 1:
        raise ValueError("r must exceed 1")
    if lam is None:
        lam = min(1.0, 1.0 / (4.0 * math.log(r)))
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    if w is None:
        w = _mapped_radii(ctx, ensemble)
    s = (np.abs(w) ** 2 - r * r) / (lam * r * r)
    return math.fsum(np.asarray(ensemble.strengths) * eta(s))


def theta_selector(alpha: float, m: float) -> int:
    """2 when alpha <= 0 or alpha > m, else 1."""
    if not m > 0:
        raise ValueError("total mass must be positive")
    return 2 if (alpha <= 0 or alpha > m) else 1


def min_log_pair_moment(ctx: KernelContext, ensemble, w=None) -> float:
    """sum_{i,j} g_i g_j log min(|T_i|, |T_j|), in O(N log N) via sorting."""
    if w is None:
        w = _mapped_radii(ctx, ensemble)
    r = np.abs(w)
    if r.size == 0:
        return 0.0
    order = np.argsort(r, kind="stable")
    lr = np.log(r[order])
    g = np.asarray(ensemble.strengths)[order]
    # mass strictly after position k in the sorted order
    after = np.concatenate([np.cumsum(g[::-1])[::-1][1:], [0.0]])
    return math.fsum(lr * g * (g + 2.0 * after))


def make_record(ctx: KernelContext, ensemble, t: float, tail_radii=TAIL_RADII) -> DiagnosticRecord:
    w = _mapped_radii(ctx, ensemble)
    mass = math.fsum(ensemble.strengths)
    j1, j2 = weighted_moments(ctx, ensemble, w)
    inertia, center = physical_moments(ensemble)
    pos = np.asarray(ensemble.positions).reshape(-1, 2)
    return DiagnosticRecord(
        t=float(t),
        mass=mass,
        alpha=float(ctx.alpha),
        energy=generalized_energy(ctx, ensemble, w),
        log_moment=log_moment(ctx, ensemble, w),
        j_theta1=j1,
        j_theta2=j2,
        inertia=inertia,
        center=center,
        r_support_phys=float(np.max(np.hypot(pos[:, 0], pos[:, 1]))),
        r_support_mapped=float(np.max(np.abs(w))),
        tail_mass=tuple((float(r), smoothed_tail_mass(ctx, ensemble, r, w=w)) for r in tail_radii),
        theta=theta_selector(ctx.alpha, mass),
        min_log_pair=min_log_pair_moment(ctx, ensemble, w),
    )


def fit_growth_exponent(series, t_lo: float, t_hi: float, min_samples: int = 10) -> GrowthFit:
    """Least-squares fit of log r = log M + p log(1 + t) over t_lo <= t <= t_hi."""
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    t, r = data[:, 0], data[:, 1]
    sel = (t >= t_lo) & (t <= t_hi)
    t, r = t[sel], r[sel]
    if t.size < min_samples:
        raise FitError(f"need at least {min_samples} samples in [{t_lo}, {t_hi}], got {t.size}")
    if np.any(r <= 0) or np.any(t <= 0):
        raise FitError("fit requires t > 0 and r > 0")
    x = np.log1p(t)
    y = np.log(r)
    A = np.column_stack([np.ones_like(x), x])
    (logm, p), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([logm, p])
    return GrowthFit(float(p), float(np.exp(logm)), (float(t_lo), float(t_hi)),
                     float(np.sqrt(np.mean(resid**2))), int(t.size))


@dataclass(frozen=True)
class LoopsReport:
    n_pairs: int
    violations: int
    max_loops1_ratio: float
    loops2_sup: float
    loops2_sup_by_scale: tuple[tuple[float, float], ...] = field(default=())


def check_loops_inequalities(spec: ExteriorMapSpec, n_random: int = 1000, seed: int = 0,
                             r_max: float = 50.0, tol: float = 1e-12) -> LoopsReport:
    """Sample exterior point pairs and test the two conformal-map inequalities.

    |T(x) . T(y)^perp| <= min(|T(x)|, |T(y)|) |T(x) - T(y)| must hold to
    ``tol``; a violation raises :class:`LoopsInequalityError`.  For the
    derivative inequality only the empirical sup of

        ||T'(x)|^2 - |T'(y)|^2| min(|T(x)|, |T(y)|)^2 / |T(x) - T(y)|

    is reported, overall and per mapped-radius decade.
    """
    if n_random < 1:
        raise ValueError("n_random must be positive")
    rng = np.random.default_rng(seed)
    lr = np.log(r_max)

    def sample():
        w = np.exp(rng.uniform(0, lr, n_random)) * np.exp(2j * np.pi * rng.uniform(size=n_random))
        return inverse_map(spec, w)

    x, y = sample(), sample()
    tx = np.asarray(forward_map(spec, x))
    ty = np.asarray(forward_map(spec, y))
    lhs = np.abs(tx.real * ty.imag - tx.imag * ty.real)
    rmin = np.minimum(np.abs(tx), np.abs(ty))
    dist = np.abs(tx - ty)
    rhs = rmin * dist
    viol = lhs > rhs + tol * np.maximum(1.0, rhs)
    if viol.any():
        k = int(np.flatnonzero(viol)[0])
        raise LoopsInequalityError(
            f"|T(x).T(y)^perp| <= min|T| |T(x)-T(y)| fails at x={x[k]}, y={y[k]}", (x[k], y[k]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio1 = np.where(rhs > 0, lhs / rhs, 0.0)
        dx = np.abs(map_derivative(spec, None, tx)) ** 2 - np.abs(map_derivative(spec, None, ty)) ** 2
        ratio2 = np.where(dist > 0, np.abs(dx) * rmin**2 / dist, 0.0)
    scales = []
    for lo in (1.0, 10.0):
        sel = (rmin >= lo) & (rmin < 10 * lo)
        scales.append((lo, float(np.max(ratio2[sel])) if sel.any() else 0.0))
    return LoopsReport(int(n_random), 0, float(np.max(ratio1)), float(np.max(ratio2)), tuple(scales))
