"""Green's function, harmonic field and Biot-Savart law of the exterior domain.

Everything is computed in the mapped plane W = T(x), where the obstacle is
the unit disk and the method of images applies, then pulled back with the
Jacobian.  For T' = a + ib the pull-back DT^t acting on a column vector is
multiplication by conj(T'), and the perpendicular a^perp = (-a2, a1) is
multiplication by i.

Blob regularisation replaces |W_x - W_y|^2 by |W_x - W_y|^2 + delta^2 in the
velocity kernel (free-space and image terms alike).
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .geometry import ExteriorMapSpec, as_complex, as_vector, forward_map, map_derivative

TWO_PI = 2.0 * np.pi


class SingularityError(ValueError):
    """Kernel evaluated at coincident points without regularisation."""


@dataclass(frozen=True)
class KernelContext:
    map: ExteriorMapSpec
    alpha: float = 0.0
    blob_delta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not (self.blob_delta >= 0 and np.isfinite(self.blob_delta)):
            raise ValueError("blob_delta must be a nonnegative real")


def mapped(ctx: KernelContext, x):
    """Return (T(x), T'(x)) as complex arrays for points x (complex or (...,2))."""
    w = np.asarray(forward_map(ctx.map, x), dtype=np.complex128)
    tp = np.asarray(map_derivative(ctx.map, None, w), dtype=np.complex128)
    return w, tp


def _image(w):
    return w / (w.real**2 + w.imag**2)


def green(ctx: KernelContext, x, y):
    """G(x, y) = (1/2pi) log(|T(x)-T(y)| / (|T(x)-T(y)*| |T(y)|))."""
    wx = np.asarray(forward_map(ctx.map, x), dtype=np.complex128)
    wy = np.asarray(forward_map(ctx.map, y), dtype=np.complex128)
    num = np.abs(wx - wy)
    if np.any(num == 0):
        raise SingularityError("green() evaluated at coincident points")
    den = np.abs(wx - _image(wy)) * np.abs(wy)
    g = np.log(num / den) / TWO_PI
    return float(g) if g.ndim == 0 else g


def harmonic_field(ctx: KernelContext, x):
    """Unit-circulation harmonic field H(x) = DT^t(x) T(x)^perp / (2pi |T(x)|^2)."""
    w, tp = mapped(ctx, x)
    h = np.conj(tp) * 1j * w / (TWO_PI * np.abs(w) ** 2)
    return as_vector(h)


def bs_kernel(ctx: KernelContext, x, y):
    """Biot-Savart kernel K(x, y): velocity at x induced by unit vorticity at y.

    K = DT^t(x) [ (T(x)-T(y))^perp / (2pi d^2) - (T(x)-T(y)*)^perp / (2pi d*^2) ]
    with d^2 -> d^2 + delta^2 under regularisation.  Broadcasts over x and y.
    """
    wx, tpx = mapped(ctx, x)
    wy = np.asarray(forward_map(ctx.map, y), dtype=np.complex128)
    d2 = ctx.blob_delta**2
    a = wx - wy
    b = wx - _image(wy)
    a2 = np.abs(a) ** 2 + d2
    if np.any(a2 == 0):
        raise SingularityError("bs_kernel evaluated at coincident points with delta = 0")
    k = 1j * a / a2 - 1j * b / (np.abs(b) ** 2 + d2)
    return as_vector(np.conj(tpx) * k / TWO_PI)


@numba.njit(parallel=True, cache=True)
def _induced(wt, tpt, skip, ws, gam, delta2, alpha):
    """Pulled-back velocity at mapped targets.

    Sums gam_j [i a/(|a|^2+d2) - i b/(|b|^2+d2)] with a = wt-ws_j, b = wt-ws_j*,
    adds alpha i wt/|wt|^2 and multiplies by conj(T')/2pi.  The free-space
    term with j == skip[t] is dropped.  Each target sums its sources in index
    order, so results do not depend on thread scheduling.
    """
    m = wt.shape[0]
    n = ws.shape[0]
    out = np.empty(m, dtype=np.complex128)
    img = np.empty(n, dtype=np.complex128)
    for j in range(n):
        img[j] = ws[j] / (ws[j].real * ws[j].real + ws[j].imag * ws[j].imag)
    for t in numba.prange(m):
        w = wt[t]
        sr = 0.0
        si = 0.0
        for j in range(n):
            g = gam[j]
            if j != skip[t]:
                ar = w.real - ws[j].real
                ai = w.imag - ws[j].imag
                q = g / (ar * ar + ai * ai + delta2)
                sr -= ai * q
                si += ar * q
            br = w.real - img[j].real
            bi = w.imag - img[j].imag
            q = g / (br * br + bi * bi + delta2)
            sr += bi * q
            si -= br * q
        q = alpha / (w.real * w.real + w.imag * w.imag)
        sr -= w.imag * q
        si += w.real * q
        out[t] = tpt[t].conjugate() * complex(sr, si) / TWO_PI
    return out


def induced_velocity(ctx: KernelContext, w_targets, tp_targets, w_sources, strengths, skip=None):
    """Velocity at mapped targets from mapped sources, harmonic part included.

    Low-level entry used by the integrator: all positions are already mapped.
    ``skip[t]`` names a source whose free-space term is omitted at target t
    (-1 for none).
    """
    wt = np.ascontiguousarray(w_targets, dtype=np.complex128)
    m = wt.shape[0]
    if skip is None:
        skip = np.full(m, -1, dtype=np.int64)
    tpt = np.ascontiguousarray(np.broadcast_to(tp_targets, wt.shape), dtype=np.complex128)
    ws = np.ascontiguousarray(w_sources, dtype=np.complex128)
    gam = np.ascontiguousarray(strengths, dtype=np.float64)
    return _induced(wt, tpt, np.asarray(skip, dtype=np.int64), ws, gam,
                    float(ctx.blob_delta) ** 2, float(ctx.alpha))


def velocity(ctx: KernelContext, ensemble, x, skip: int | None = None):
    """u(x) = sum_j gamma_j K(x, x_j) + alpha H(x).

    With ``skip = j`` the free-space part of source j is left out, but its
    image term is kept: a blob is carried by its own image and by the
    harmonic field.
    """
    xc = as_complex(x)
    scalar = np.ndim(xc) == 0
    xs = np.atleast_1d(np.asarray(xc, dtype=np.complex128)).ravel()
    w, tp = mapped(ctx, xs)
    ws, _ = _ensemble_mapped(ctx, ensemble)
    sk = np.full(xs.shape[0], -1 if skip is None else int(skip), dtype=np.int64)
    u = as_vector(induced_velocity(ctx, w, tp, ws, ensemble.strengths, sk))
    return u[0] if scalar else u.reshape(np.shape(xc) + (2,))


def _ensemble_mapped(ctx: KernelContext, ensemble):
    pos = np.asarray(ensemble.positions, dtype=np.float64).reshape(-1, 2)
    if pos.shape[0] == 0:
        return np.zeros(0, np.complex128), np.zeros(0, np.complex128)
    return mapped(ctx, pos)


def stream_at(ctx: KernelContext, ensemble, x):
    """psi(x) = sum_j gamma_j G(x, x_j) with the free-space log regularised.

    The free-space part is (1/4pi) log(d^2 + delta^2); the image part is exact.
    """
    xc = as_complex(x)
    scalar = np.ndim(xc) == 0
    wx = np.atleast_1d(np.asarray(forward_map(ctx.map, xc), dtype=np.complex128)).ravel()
    ws, _ = _ensemble_mapped(ctx, ensemble)
    gam = np.asarray(ensemble.strengths, dtype=np.float64)
    if ws.size == 0:
        psi = np.zeros(wx.shape)
    else:
        a2 = np.abs(wx[:, None] - ws[None, :]) ** 2 + ctx.blob_delta**2
        if np.any(a2 == 0):
            raise SingularityError("stream_at evaluated on a particle with delta = 0")
        img = np.log(np.abs(wx[:, None] - _image(ws)[None, :]) * np.abs(ws)[None, :])
        psi = (0.5 * np.log(a2) - img) @ gam / TWO_PI
    return float(psi[0]) if scalar else psi.reshape(np.shape(xc))


def inverse_distance_sup(ctx: KernelContext, ensemble, n_points: int = 100, seed: int = 0,
                         r_max: float | None = None) -> float:
    """Empirical sup over random x of sum_j gamma_j / |T(x) - T(x_j)|.

    Targets are drawn uniformly in the mapped annulus 1 < |w| < r_max, where
    r_max defaults to twice the largest mapped radius of the ensemble.
    """
    ws, _ = _ensemble_mapped(ctx, ensemble)
    gam = np.asarray(ensemble.strengths, dtype=np.float64)
    if ws.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    if r_max is None:
        r_max = 2.0 * float(np.max(np.abs(ws)))
    r = np.sqrt(rng.uniform(1.0, r_max**2, n_points))
    w = r * np.exp(2j * np.pi * rng.uniform(size=n_points))
    return float(np.max((1.0 / np.abs(w[:, None] - ws[None, :])) @ gam))
