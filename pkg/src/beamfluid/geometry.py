"""Subgraph geometry: the fiber map (x,z) -> (x, h(x)z) and its algebra.

The fluid domain under the beam graph is flattened onto the reference
rectangle by the vertical fiber map chi_h.  Everything the transformed
equations need is carried by the cofactor matrix B_h of grad(chi_h) and the
symmetric matrix A_h = (1/h) B_h^T B_h:

    B_h = [[h, -h'z], [0, 1]],    A_h = [[h, -h'z], [-h'z, (1+(h'z)^2)/h]]

with det grad(chi_h) = h, so positivity of h is exactly invertibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContactError, InvalidArgumentError
from .fields import (
    PeriodicGrid1D,
    ReferenceGrid2D,
    ScalarField1D,
    ScalarField2D,
    VectorField2D,
    d_dx_2d,
    d_dz,
    derivative,
    integrate_2d,
    sobolev_norm,
)

__all__ = [
    "DeformationMap",
    "build_deformation",
    "coefficient_matrices",
    "FiberField",
    "to_reference",
    "from_reference",
    "piola_residual",
    "a_eigenvalue_range",
]


@dataclass(frozen=True)
class DeformationMap:
    """The fiber map for a fixed positive height profile h.

    Spectral derivatives of h are cached; r0 is the regularity budget
    ||h; H^2|| + ||1/h; Linf|| that all continuity constants depend on.
    """

    h: ScalarField1D
    h_x: ScalarField1D
    h_xx: ScalarField1D
    r0: float

    @property
    def grid(self) -> PeriodicGrid1D:
        return self.h.grid

    @property
    def min_h(self) -> float:
        return float(np.min(self.h.values))

    def coefficient_fields(self, grid: ReferenceGrid2D):
        """A_h entries sampled on a reference grid: (A11, A12, A22)."""
        h = self.h.values[:, None]
        hx = self.h_x.values[:, None]
        z = grid.z_nodes[None, :]
        a11 = np.broadcast_to(h, grid.shape).copy()
        a12 = -hx * z
        a22 = (1.0 + (hx * z) ** 2) / h
        return a11, a12, a22

    def jacobian_weights(self, grid: ReferenceGrid2D) -> np.ndarray:
        """det grad(chi_h) = h broadcast over the reference grid."""
        return np.broadcast_to(self.h.values[:, None], grid.shape).copy()


def build_deformation(h: ScalarField1D) -> DeformationMap:
    """Build the map, caching h', h'' and the regularity budget r0."""
    min_h = float(np.min(h.values))
    if min_h <= 0.0:
        raise ContactError(f"height must be strictly positive (min h = {min_h})")
    r0 = sobolev_norm(h, 2) + float(np.max(1.0 / h.values))
    return DeformationMap(h=h, h_x=derivative(h, 1), h_xx=derivative(h, 2), r0=r0)


def coefficient_matrices(map_: DeformationMap, x_index: int, z: float):
    """Pointwise (A_h, B_h) at sample x_index and height fraction z in [0,1]."""
    if not 0.0 <= z <= 1.0:
        raise InvalidArgumentError(f"z must lie in [0,1], got {z}")
    h = map_.h.values[x_index]
    hx = map_.h_x.values[x_index]
    b = np.array([[h, -hx * z], [0.0, 1.0]])
    a = np.array([[h, -hx * z], [-hx * z, 1.0 / h + (hx * z) ** 2 / h]])
    return a, b


def a_eigenvalue_range(map_: DeformationMap, grid: ReferenceGrid2D):
    """Min and max eigenvalue of A_h over all samples (2x2 closed form)."""
    a11, a12, a22 = map_.coefficient_fields(grid)
    mean = 0.5 * (a11 + a22)
    rad = np.sqrt((0.5 * (a11 - a22)) ** 2 + a12**2)
    return float(np.min(mean - rad)), float(np.max(mean + rad))


@dataclass(frozen=True)
class FiberField:
    """Samples along vertical fibers of a subgraph domain.

    Fiber j holds n_y samples at heights y = h(x_j) * m/(n_y-1); heights
    stores h(x_j) so the field is self-describing.
    """

    grid_x: PeriodicGrid1D
    heights: np.ndarray
    values: np.ndarray  # shape (n, n_y)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        heights = np.asarray(self.heights, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "heights", heights)
        if values.ndim != 2 or values.shape[0] != self.grid_x.n:
            raise InvalidArgumentError("fiber values must have shape (n, n_y)")
        if heights.shape != (self.grid_x.n,):
            raise InvalidArgumentError("heights must have one entry per fiber")

    @property
    def n_y(self) -> int:
        return self.values.shape[1]

    def y_nodes(self, j: int) -> np.ndarray:
        return np.linspace(0.0, self.heights[j], self.n_y)

    def evaluate(self, j: int, y) -> np.ndarray:
        """Cubic interpolation along fiber j."""
        spline = CubicSpline(self.y_nodes(j), self.values[j])
        return spline(np.asarray(y, dtype=float))


def to_reference(f, map_: DeformationMap, grid: ReferenceGrid2D) -> ScalarField2D:
    """Pull a physical-domain field back to the reference rectangle.

    f may be a callable f(x, y) (evaluated exactly at the fiber points) or a
    FiberField (resampled by vertical cubic interpolation).
    """
    h = map_.h.values
    z = grid.z_nodes
    if callable(f):
        x = map_.grid.nodes[:, None]
        y = h[:, None] * z[None, :]
        return ScalarField2D(grid, f(np.broadcast_to(x, grid.shape), y))
    if isinstance(f, FiberField):
        out = np.empty(grid.shape)
        for j in range(grid.grid_x.n):
            out[j] = f.evaluate(j, h[j] * z)
        return ScalarField2D(grid, out)
    raise InvalidArgumentError("f must be callable or a FiberField")


def from_reference(fhat: ScalarField2D, map_: DeformationMap, n_y: int | None = None) -> FiberField:
    """Push a reference-domain field to fiber samples on the subgraph domain.

    With n_y equal to the reference n_z the values transfer directly (the
    reference nodes are the fiber points); otherwise each fiber is resampled
    by cubic interpolation in z.
    """
    h = map_.h.values
    n_z = fhat.grid.n_z
    if n_y is None or n_y == n_z:
        return FiberField(map_.grid, h.copy(), fhat.values.copy())
    z_src = fhat.grid.z_nodes
    z_dst = np.linspace(0.0, 1.0, n_y)
    out = np.empty((map_.grid.n, n_y))
    for j in range(map_.grid.n):
        out[j] = CubicSpline(z_src, fhat.values[j])(z_dst)
    return FiberField(map_.grid, h.copy(), out)


def piola_residual(v: VectorField2D, map_: DeformationMap) -> float:
    """L2 mismatch between div(B_h^T v) and the contraction B_h^T : grad v.

    Both sides are evaluated with the same discrete operators (spectral in
    x, 2nd-order FD in z); the residual is pure product-rule truncation and
    vanishes identically when B is constant.
    """
    grid = v.grid
    L = grid.grid_x.length
    dz = grid.dz
    h = map_.h.values[:, None]
    hx = map_.h_x.values[:, None]
    z = grid.z_nodes[None, :]

    # div(B^T v) = d/dx(h v1) + d/dz(-h' z v1 + v2)
    divergence = d_dx_2d(h * v.u1, L) + d_dz(-hx * z * v.u1 + v.u2, dz)
    # B^T : grad v = h dx(v1) - h' z dz(v1) + dz(v2)
    contraction = h * d_dx_2d(v.u1, L) - hx * z * d_dz(v.u1, dz) + d_dz(v.u2, dz)
    return float(np.sqrt(integrate_2d((divergence - contraction) ** 2, grid)))
