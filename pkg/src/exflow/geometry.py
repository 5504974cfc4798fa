"""Exterior conformal maps given by a closed-form inverse.

A domain is described by the inverse map

    S(w) = w / beta + sum_k c_k w^{-k},   |w| >= 1,

which sends the exterior of the unit disk onto the fluid region.  The forward
map T = S^{-1} (so that T(z) = beta*z + h(z) with h bounded) is evaluated by
Newton iteration.  Points are handled as complex numbers throughout; real
2-vectors are accepted where noted and converted with :func:`as_complex`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

ComplexArray = NDArray[np.complex128]


class GeometryError(ValueError):
    """Base class for map construction and evaluation failures."""


class DomainError(GeometryError):
    """A point lies strictly inside the obstacle (or |w| < 1 for the inverse)."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class InversionError(GeometryError):
    """Newton iteration for the forward map did not converge."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


def as_complex(points: ArrayLike) -> np.ndarray | complex:
    """Convert a point or array of points to complex form.

    Complex input passes through.  Real input with a trailing axis of length
    2 is read as (x, y) pairs.
    """
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        return complex(arr) if arr.ndim == 0 else arr.astype(np.complex128)
    if arr.ndim == 0:
        return complex(float(arr))
    if arr.shape[-1] != 2:
        raise ValueError(f"expected trailing dimension 2, got shape {arr.shape}")
    z = arr[..., 0].astype(np.float64) + 1j * arr[..., 1].astype(np.float64)
    return complex(z) if z.ndim == 0 else z


def as_vector(z) -> np.ndarray:
    """Inverse of :func:`as_complex`: complex -> (..., 2) float array."""
    z = np.asarray(z, dtype=np.complex128)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass(frozen=True)
class ExteriorMapSpec:
    """Conformal map of the fluid region onto {|w| > 1}, stored via its inverse.

    ``inverse_coeffs[k]`` multiplies ``w**-k``; the constant term c_0 is a
    translation of the obstacle.
    """

    beta: float = 1.0
    inverse_coeffs: tuple[complex, ...] = ()
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    _c: np.ndarray = field(init=False, repr=False, compare=False)
    _identity: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise GeometryError(f"beta must be a positive real number, got {self.beta!r}")
        coeffs = tuple(complex(c) for c in self.inverse_coeffs)
        if not all(np.isfinite(c) for c in coeffs):
            raise GeometryError("inverse_coeffs must be finite")
        if not (self.newton_tol > 0):
            raise GeometryError("newton_tol must be positive")
        if int(self.newton_max_iter) < 1:
            raise GeometryError("newton_max_iter must be a positive integer")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "inverse_coeffs", coeffs)
        object.__setattr__(self, "newton_max_iter", int(self.newton_max_iter))
        object.__setattr__(self, "_c", np.array(coeffs, dtype=np.complex128))
        object.__setattr__(self, "_identity", self.beta == 1.0 and not any(coeffs))

    @property
    def is_identity(self) -> bool:
        """True for the unit disk centred at the origin (T = Id)."""
        return self._identity

    # alias used by config validation
    is_disk = is_identity

    @classmethod
    def disk(cls, **kwargs) -> "ExteriorMapSpec":
        return cls(beta=1.0, inverse_coeffs=(), **kwargs)

    @classmethod
    def ellipse(cls, c: float, **kwargs) -> "ExteriorMapSpec":
        """Joukowski exterior, S(w) = w + c/w, an ellipse for 0 < c < 1."""
        if not 0.0 < c < 1.0:
            raise GeometryError(f"ellipse preset needs 0 < c < 1, got {c}")
        return cls(beta=1.0, inverse_coeffs=(0.0, c), **kwargs)

    @classmethod
    def from_preset(cls, name: str, **kwargs) -> "ExteriorMapSpec":
        name = name.strip()
        if name == "disk":
            return cls.disk(**kwargs)
        if name.startswith("ellipse:"):
            try:
                c = float(name.split(":", 1)[1])
            except ValueError:
                raise GeometryError(f"bad ellipse preset {name!r}") from None
            return cls.ellipse(c, **kwargs)
        raise GeometryError(f"unknown map preset {name!r} (expected 'disk' or 'ellipse:c')")

    # -- Laurent series and derivatives ---------------------------------

    def _series(self, w, order: int):
        """sum_k c_k * d^order/dw^order w^{-k}."""
        w = np.asarray(w, dtype=np.complex128)
        out = np.zeros_like(w)
        inv = 1.0 / w
        for k, c in enumerate(self._c):
            if c == 0:
                continue
            if order == 0:
                out = out + c * inv**k
            elif order == 1:
                if k:
                    out = out - k * c * inv ** (k + 1)
            else:
                if k:
                    out = out + k * (k + 1) * c * inv ** (k + 2)
        return out

    def S(self, w):
        return np.asarray(w, dtype=np.complex128) / self.beta + self._series(w, 0)

    def dS(self, w):
        return 1.0 / self.beta + self._series(w, 1)

    def d2S(self, w):
        return self._series(w, 2)


def _scalar_out(template, value):
    return complex(value) if np.ndim(template) == 0 else value


def inverse_map(spec: ExteriorMapSpec, w):
    """Evaluate S(w) = T^{-1}(w) for |w| >= 1."""
    w_arr = np.asarray(w, dtype=np.complex128)
    bad = np.abs(w_arr) < 1.0 - 1e-12
    if np.any(bad):
        first = w_arr[bad].ravel()[0] if w_arr.ndim else complex(w_arr)
        raise DomainError(f"inverse_map needs |w| >= 1, got w={first}", first)
    return _scalar_out(w, spec.S(w_arr))


def _newton(spec: ExteriorMapSpec, z: np.ndarray, w0: np.ndarray):
    """Vectorised Newton solve of S(w) = z.  Returns (w, converged)."""
    w = w0.copy()
    tol = spec.newton_tol * np.maximum(1.0, np.abs(z))
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(spec.newton_max_iter):
        active = ~done
        if not active.any():
            break
        wa = w[active]
        res = spec.S(wa) - z[active]
        ok = np.abs(res) <= tol[active]
        step = res / spec.dS(wa)
        wa = np.where(ok, wa, wa - step)
        w[active] = wa
        done[active] = ok
    if not done.all():
        # final residual check for the ones that moved on the last iteration
        idx = ~done
        done[idx] = np.abs(spec.S(w[idx]) - z[idx]) <= tol[idx]
    # one polishing step: the residual test is relative to |z|, the root error is not
    with np.errstate(all="ignore"):
        polished = w - (spec.S(w) - z) / spec.dS(w)
    w = np.where(done & np.isfinite(polished), polished, w)
    return w, done & np.isfinite(w)


def forward_map(spec: ExteriorMapSpec, z):
    """Evaluate T(z) for z in the closed exterior domain.

    Newton is seeded at beta*z.  Points that fail, or that converge to a root
    with |w| < 1, are retried from 16 seeds on the circle of radius
    max(beta*|z|, 1.05).  Raises :class:`DomainError` if only roots inside the
    unit disk are found and :class:`InversionError` if nothing converges.
    """
    zc = as_complex(z)
    scalar = np.ndim(zc) == 0
    shape = np.shape(zc)
    z = np.atleast_1d(np.asarray(zc, dtype=np.complex128)).ravel()
    if spec.is_identity:
        inside = np.abs(z) < 1.0 - 10 * spec.newton_tol
        if inside.any():
            p = z[inside][0]
            raise DomainError(f"point {p} lies inside the obstacle", p)
        return complex(z[0]) if scalar else z.reshape(shape)

    floor = 1.0 - 10 * spec.newton_tol
    w, ok = _newton(spec, z, spec.beta * z)
    good = ok & (np.abs(w) >= floor)
    if not good.all():
        idx = np.flatnonzero(~good)
        zi = z[idx]
        radius = np.maximum(spec.beta * np.abs(zi), 1.05)
        found = np.zeros(idx.size, dtype=bool)
        any_root = ok[idx].copy()
        best = w[idx].copy()
        for j in range(16):
            if found.all():
                break
            seed = radius * np.exp(2j * np.pi * (j + 0.5) / 16)
            wj, okj = _newton(spec, zi, seed)
            any_root |= okj
            hit = okj & (np.abs(wj) >= floor) & ~found
            best[hit] = wj[hit]
            found |= hit
        w[idx] = best
        if not found.all():
            miss = np.flatnonzero(~found)
            p = zi[miss[0]]
            if any_root[miss[0]]:
                raise DomainError(f"point {p} lies inside the obstacle", p)
            raise InversionError(
                f"forward map did not converge at z={p} after "
                f"{spec.newton_max_iter} iterations and 16 restarts", p)
    return complex(w[0]) if scalar else w.reshape(shape)


def map_derivative(spec: ExteriorMapSpec, z, w=None):
    """Complex derivative T'(z) = 1/S'(T(z)).  ``w`` may pass a known T(z)."""
    if w is None:
        w = forward_map(spec, z)
    if spec.is_identity:
        out = np.ones_like(np.asarray(w, dtype=np.complex128))
        return _scalar_out(w, out)
    return _scalar_out(w, 1.0 / spec.dS(w))


def map_second_derivative(spec: ExteriorMapSpec, z, w=None):
    """T''(z) = -S''(w) / S'(w)^3."""
    if w is None:
        w = forward_map(spec, z)
    ds = spec.dS(w)
    return _scalar_out(w, -spec.d2S(w) / ds**3)


def jacobian(spec: ExteriorMapSpec, z, w=None) -> np.ndarray:
    """Real Jacobian DT of T viewed as a map R^2 -> R^2.

    Rows index the components of T, columns the coordinates, so that for
    T' = a + ib the matrix is [[a, -b], [b, a]].  A row vector v maps to
    v @ DT = conj(T') v, which is the convention under which
    grad(f o T) = (grad f)(T) @ DT.
    """
    tp = np.asarray(map_derivative(spec, z, w), dtype=np.complex128)
    a, b = tp.real, tp.imag
    return np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2)


@dataclass(frozen=True)
class MapValidationReport:
    max_h_prime_times_z2: float
    max_h_second_times_z3: float
    max_DT_norm: float
    max_DTinv_norm: float
    injectivity_ok: bool
    min_abs_S_prime: float = float("nan")
    n_samples: int = 0

    def lines(self) -> list[str]:
        return [
            f"max_h_prime_times_z2 = {self.max_h_prime_times_z2!r}",
            f"max_h_second_times_z3 = {self.max_h_second_times_z3!r}",
            f"max_DT_norm = {self.max_DT_norm!r}",
            f"max_DTinv_norm = {self.max_DTinv_norm!r}",
            f"min_abs_S_prime = {self.min_abs_S_prime!r}",
            f"injectivity_ok = {str(self.injectivity_ok).lower()}",
            f"n_samples = {self.n_samples}",
        ]


def _polar_grid(r_max: float, n_samples: int):
    n_r = max(10, int(round(np.sqrt(n_samples / 4))))
    n_t = max(16, int(np.ceil(n_samples / n_r)))
    s = np.linspace(0.0, np.log(r_max), n_r)
    theta = 2 * np.pi * np.arange(n_t) / n_t
    w = np.exp(s)[:, None] * np.exp(1j * theta)[None, :]
    return w, s[1] - s[0], theta[1] - theta[0]


def validate_map(spec: ExteriorMapSpec, r_max: float = 10.0, n_samples: int = 4096) -> MapValidationReport:
    """Grid check of the decay bounds on h and of injectivity of S.

    Samples {1 <= |w| <= r_max} on a log-radial by uniform-angle grid.  The
    h-derivatives come from the closed form: h' = T' - beta, h'' = T''.
    Injectivity is declared broken if two images are closer than the local
    mapped grid spacing while their preimages are several cells apart, or if
    S' vanishes (to 1e-8) anywhere on the grid.
    """
    if not r_max > 1:
        raise ValueError("r_max must exceed 1")
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    w, ds, dtheta = _polar_grid(r_max, n_samples)
    z = spec.S(w)
    dS = spec.dS(w)
    tp = 1.0 / dS
    tpp = -spec.d2S(w) / dS**3
    hp = tp - spec.beta
    az = np.abs(z)

    with np.errstate(all="ignore"):
        hp_z2 = np.abs(hp) * az**2
        hpp_z3 = np.abs(tpp) * az**3
    min_dS = float(np.min(np.abs(dS)))

    # collisions: images near each other whose preimages are far apart
    step = max(ds, dtheta)
    zf, wf = z.ravel(), w.ravel()
    spacing_w = np.abs(wf) * step
    spacing_z = np.abs(dS.ravel()) * spacing_w
    tree = cKDTree(np.column_stack([zf.real, zf.imag]))
    pairs = tree.query_pairs(r=float(np.max(spacing_z)), output_type="ndarray")
    collision = False
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        close = np.abs(zf[i] - zf[j]) < 0.5 * (spacing_z[i] + spacing_z[j])
        far = np.abs(wf[i] - wf[j]) > 4.0 * (spacing_w[i] + spacing_w[j])
        collision = bool(np.any(close & far))
    finite = np.all(np.isfinite(hp_z2)) and np.all(np.isfinite(hpp_z3))
    injective = (not collision) and min_dS > 1e-8 and bool(finite)

    return MapValidationReport(
        max_h_prime_times_z2=float(np.max(hp_z2)),
        max_h_second_times_z3=float(np.max(hpp_z3)),
        max_DT_norm=float(np.max(np.abs(tp))),
        max_DTinv_norm=float(np.max(np.abs(dS))),
        injectivity_ok=injective,
        min_abs_S_prime=min_dS,
        n_samples=int(w.size),
    )


def boundary_points(spec: ExteriorMapSpec, n: int = 256) -> np.ndarray:
    """Points of the obstacle boundary, S(e^{i theta}) for n equispaced angles."""
    theta = 2 * np.pi * np.arange(n) / n
    return spec.S(np.exp(1j * theta))


def boundary_normal(spec: ExteriorMapSpec, theta) -> np.ndarray:
    """Unit normal of the boundary at S(e^{i theta}), pointing into the fluid."""
    w = np.exp(1j * np.asarray(theta, dtype=np.float64))
    n = spec.dS(w) * w
    return n / np.abs(n)
