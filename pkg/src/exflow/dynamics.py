"""Vortex-blob discretisation and RK4 transport of the ensemble."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np

from .geometry import (
    DomainError,
    ExteriorMapSpec,
    boundary_points,
    forward_map,
    map_derivative,
)
from .kernels import KernelContext, _induced, mapped


class SimulationError(RuntimeError):
    """A run stopped early.  Carries what was computed up to the failure."""

    def __init__(self, message, records=None, ensemble=None, t=None):
        super().__init__(message)
        self.records = records if records is not None else []
        self.ensemble = ensemble
        self.t = t


class BoundaryPenetrationError(SimulationError):
    def __init__(self, index: int, t=None):
        super().__init__(
            f"particle {index} crossed into the obstacle; try a smaller dt", t=t)
        self.index = index


@dataclass(frozen=True, eq=False)
class VortexEnsemble:
    """Blob positions (N, 2) and nonnegative strengths (N,).

    In even-symmetric mode particle ``i + N/2`` is the mirror image ``-x_i`` of
    particle ``i`` and carries the same strength.
    """

    positions: np.ndarray
    strengths: np.ndarray
    blob_delta: float = 0.0
    even_symmetric: bool = False

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        gam = np.array(self.strengths, dtype=np.float64).reshape(-1)
        if pos.shape[0] != gam.shape[0]:
            raise ValueError("positions and strengths differ in length")
        if np.any(gam < 0):
            raise ValueError("strengths must be nonnegative")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(gam))):
            raise ValueError("non-finite particle data")
        if self.blob_delta < 0:
            raise ValueError("blob_delta must be nonnegative")
        if self.even_symmetric:
            n = pos.shape[0]
            h = n // 2
            if n % 2 or np.any(pos[h:] != -pos[:h]) or np.any(gam[h:] != gam[:h]):
                raise ValueError("even-symmetric ensemble must consist of exact (x, -x) pairs")
        pos.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "strengths", gam)
        object.__setattr__(self, "blob_delta", float(self.blob_delta))

    def __len__(self):
        return self.strengths.shape[0]

    @property
    def mass(self) -> float:
        return math.fsum(self.strengths)

    def mirror_index(self, i: int) -> int:
        h = len(self) // 2
        return i + h if i < h else i - h

    def with_positions(self, positions) -> "VortexEnsemble":
        return replace(self, positions=positions)

    def _moved(self, positions: np.ndarray) -> "VortexEnsemble":
        # integrator fast path: strengths and layout are unchanged by construction
        new = object.__new__(VortexEnsemble)
        positions.setflags(write=False)
        for k, v in (("positions", positions), ("strengths", self.strengths),
                     ("blob_delta", self.blob_delta), ("even_symmetric", self.even_symmetric)):
            object.__setattr__(new, k, v)
        return new


@dataclass(frozen=True)
class PatchSpec:
    """Disk-shaped patch of initial vorticity."""

    center: tuple[float, float]
    radius: float
    profile: Literal["uniform", "cosine-bump"] = "cosine-bump"
    total_mass: float = 1.0
    grid_n: int = 24

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2:
            raise ValueError("patch center must be a 2-vector")
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("patch radius must be positive")
        if self.profile not in ("uniform", "cosine-bump"):
            raise ValueError(f"unknown profile {self.profile!r}")
        if not self.total_mass > 0:
            raise ValueError("patch total_mass must be positive")
        if int(self.grid_n) < 1:
            raise ValueError("grid_n must be a positive integer")
        object.__setattr__(self, "grid_n", int(self.grid_n))

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / self.grid_n

    def mirrored(self) -> "PatchSpec":
        return replace(self, center=(-self.center[0], -self.center[1]))


def check_patch(spec: ExteriorMapSpec, patch: PatchSpec) -> None:
    """Raise DomainError unless the closed patch disk lies in the fluid."""
    c = complex(*patch.center)
    if np.any(np.abs(boundary_points(spec, 512) - c) <= patch.radius):
        raise DomainError(f"patch at {patch.center} with radius {patch.radius} intersects the obstacle")
    ring = c + patch.radius * np.exp(2j * np.pi * np.arange(256) / 256)
    w = forward_map(spec, np.append(ring, c))
    if np.any(np.abs(w) <= 1.0):
        raise DomainError(f"patch at {patch.center} is not exterior to the obstacle")


@dataclass(frozen=True)
class SimulationConfig:
    map: ExteriorMapSpec
    patches: tuple[PatchSpec, ...]
    dt: float
    t_end: float
    boundary_circulation: float = 0.0
    diagnostic_stride: int = 10
    blob_delta: float | None = None
    even_symmetric: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        if not self.patches:
            raise ValueError("at least one patch is required")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if int(self.diagnostic_stride) < 1:
            raise ValueError("diagnostic_stride must be a positive integer")
        object.__setattr__(self, "diagnostic_stride", int(self.diagnostic_stride))
        object.__setattr__(self, "seed", int(self.seed))
        if self.even_symmetric:
            if not self.map.is_disk:
                raise ValueError("even_symmetric mode requires the unit disk map")
            if not _symmetric_patch_set(self.patches):
                raise ValueError("even_symmetric mode requires a patch set symmetric under x -> -x")
        if self.blob_delta is None:
            object.__setattr__(self, "blob_delta", default_blob_delta(self.map, self.patches))
        elif not self.blob_delta >= 0:
            raise ValueError("blob_delta must be nonnegative")
        object.__setattr__(self, "blob_delta", float(self.blob_delta))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def default_blob_delta(spec: ExteriorMapSpec, patches) -> float:
    """Two grid spacings of the first patch, measured in the mapped plane."""
    p = patches[0]
    c = complex(*p.center)
    scale = abs(map_derivative(spec, c)) if not spec.is_identity else 1.0
    return 2.0 * p.spacing * float(scale)


def _symmetric_patch_set(patches) -> bool:
    remaining = list(patches)
    while remaining:
        p = remaining.pop(0)
        try:
            remaining.remove(p.mirrored())
        except ValueError:
            return False
    return True


def _patch_particles(patch: PatchSpec):
    n = patch.grid_n
    h = patch.spacing
    offs = -patch.radius + h * (np.arange(n) + 0.5)
    gx, gy = np.meshgrid(offs, offs, indexing="xy")
    rho = np.hypot(gx, gy).ravel()
    inside = rho <= patch.radius
    if patch.profile == "uniform":
        omega = np.ones(inside.sum())
    else:
        omega = 0.5 * (1.0 + np.cos(np.pi * rho[inside] / patch.radius))
    gam = omega * h * h
    gam *= patch.total_mass / gam.sum()
    pos = np.column_stack([gx.ravel()[inside] + patch.center[0], gy.ravel()[inside] + patch.center[1]])
    return pos, gam


def discretize(spec: ExteriorMapSpec, patches, blob_delta: float, even_symmetric: bool = False) -> VortexEnsemble:
    """Lay each patch on a grid_n x grid_n grid and put a blob at each inside cell.

    Strengths are omega0(cell centre) * cell area, rescaled so that each patch
    carries exactly its total_mass.  In even mode only one patch of each
    (c, -c) pair is discretised and its particles are mirrored.
    """
    patches = tuple(patches)
    for p in patches:
        check_patch(spec, p)
    if even_symmetric:
        if not _symmetric_patch_set(patches):
            raise ValueError("even_symmetric mode requires a patch set symmetric under x -> -x")
        kept, remaining = [], list(patches)
        while remaining:
            p = remaining.pop(0)
            remaining.remove(p.mirrored())
            kept.append(p)
        parts = [_patch_particles(p) for p in kept]
        pos = np.concatenate([q for q, _ in parts])
        gam = np.concatenate([g for _, g in parts])
        return VortexEnsemble(np.concatenate([pos, -pos]), np.concatenate([gam, gam]),
                              blob_delta, True)
    parts = [_patch_particles(p) for p in patches]
    return VortexEnsemble(np.concatenate([q for q, _ in parts]),
                          np.concatenate([g for _, g in parts]), blob_delta, False)


def alpha_of(config: SimulationConfig, ensemble: VortexEnsemble) -> float:
    """Harmonic-part coefficient: boundary circulation plus total vorticity."""
    return float(config.boundary_circulation + math.fsum(ensemble.strengths))


def _mapped_checked(ctx: KernelContext, z: np.ndarray):
    if ctx.map.is_identity:
        r2 = z.real * z.real + z.imag * z.imag
        if not r2.min() > 1.0:
            bad = np.flatnonzero(~(r2 > 1.0))
            raise BoundaryPenetrationError(int(bad[0]))
        return z, np.ones_like(z)
    try:
        w, tp = mapped(ctx, z)
    except DomainError as exc:
        idx = int(np.flatnonzero(z == exc.point)[0]) if exc.point is not None else -1
        raise BoundaryPenetrationError(idx) from None
    bad = np.flatnonzero(~(np.abs(w) > 1.0))
    if bad.size:
        raise BoundaryPenetrationError(int(bad[0]))
    return w, tp


def rk4_step(ctx: KernelContext, ensemble: VortexEnsemble, dt: float) -> VortexEnsemble:
    """One classical RK4 step of dX_i/dt = u(X_i) with self free-space term skipped.

    All stage velocities are evaluated against a frozen snapshot of the stage
    positions.  In even mode only the first half is integrated; the second
    half is set to its exact mirror.  Negative dt integrates backwards.
    """
    if not (dt != 0 and np.isfinite(dt)):
        raise ValueError("dt must be a nonzero finite number")
    gam = ensemble.strengths
    n = len(ensemble)
    if n == 0:
        return ensemble
    pos = ensemble.positions
    z0 = pos[:, 0] + 1j * pos[:, 1]
    even = ensemble.even_symmetric
    n_move = n // 2 if even else n
    skip = np.arange(n_move, dtype=np.int64)
    delta2 = float(ctx.blob_delta) ** 2
    alpha = float(ctx.alpha)

    def rates(z):
        w, tp = _mapped_checked(ctx, z)
        return _induced(w[:n_move], tp[:n_move], skip, w, gam, delta2, alpha)

    def full(zp):
        return np.concatenate([zp, -zp]) if even else zp

    zp0 = z0[:n_move]
    k1 = rates(z0)
    k2 = rates(full(zp0 + 0.5 * dt * k1))
    k3 = rates(full(zp0 + 0.5 * dt * k2))
    k4 = rates(full(zp0 + dt * k3))
    zp1 = zp0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    z1 = full(zp1)
    if not np.all(np.isfinite(z1)):
        raise SimulationError("non-finite particle position")
    _mapped_checked(ctx, z1)
    return ensemble._moved(np.column_stack([z1.real, z1.imag]))


Observer = Callable[[int, float, VortexEnsemble], None]


def run(config: SimulationConfig, observer: Observer | None = None):
    """Integrate from t = 0 to t_end and collect diagnostics.

    Returns ``(records, final_ensemble)``.  A record is taken at every step
    index divisible by ``diagnostic_stride`` (t = 0 included).  ``observer``,
    if given, is called after every step.  On failure a
    :class:`SimulationError` is raised carrying the records so far.
    """
    from .diagnostics import make_record

    ens = discretize(config.map, config.patches, config.blob_delta, config.even_symmetric)
    ctx = KernelContext(config.map, alpha_of(config, ens), config.blob_delta)
    records = [make_record(ctx, ens, 0.0)]
    for k in range(1, config.n_steps + 1):
        t = k * config.dt
        try:
            ens = rk4_step(ctx, ens, config.dt)
        except SimulationError as exc:
            raise SimulationError(f"{exc} (at t={t!r})", records, ens, t) from exc
        if observer is not None:
            observer(k, t, ens)
        if k % config.diagnostic_stride == 0:
            records.append(make_record(ctx, ens, t))
    return records, ens
