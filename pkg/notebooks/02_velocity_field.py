"""
Velocity of a vortex ensemble outside an obstacle
==================================================

Each blob induces a free-space term and an image term in the mapped plane;
the harmonic field carries the circulation around the obstacle.
"""

import numpy as np

from exflow import ExteriorMapSpec, KernelContext, VortexEnsemble, stream_at, velocity

disk = ExteriorMapSpec.disk()
ens = VortexEnsemble([[2.0, 0.0]], [2 * np.pi])

# a single vortex is carried by its image only
ctx = KernelContext(disk, alpha=0.0)
print("self-induced velocity:", velocity(ctx, ens, [2.0, 0.0], skip=0))

# adding circulation 2pi around the disk
ctx = KernelContext(disk, alpha=2 * np.pi)
print("with harmonic part:  ", velocity(ctx, ens, [2.0, 0.0], skip=0))

# on the ellipse the flow is tangent to the boundary
ellipse = ExteriorMapSpec.ellipse(0.5)
ctx = KernelContext(ellipse, alpha=1.0, blob_delta=0.05)
blobs = VortexEnsemble([[0.3, 2.0], [-0.4, 2.5]], [1.0, 0.5])
theta = np.linspace(0, 2 * np.pi, 6, endpoint=False)
on_gamma = ellipse.S(1.0001 * np.exp(1j * theta))
u = velocity(ctx, blobs, np.column_stack([on_gamma.real, on_gamma.imag]))
normal = ellipse.dS(np.exp(1j * theta)) * np.exp(1j * theta)
normal /= np.abs(normal)
print("normal component near the boundary:", np.round(u[:, 0] * normal.real + u[:, 1] * normal.imag, 5))

# the stream function vanishes on the boundary
print("psi on the boundary:", np.round(stream_at(ctx, blobs, np.column_stack([on_gamma.real, on_gamma.imag])), 5))
