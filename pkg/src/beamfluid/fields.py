"""Periodic sampled fields and their spectral / finite-difference calculus.

The horizontal direction x is L-periodic and all x-calculus is done through
the FFT (exact for band-limited data).  The vertical direction z covers the
unit interval with walls at z=0 and z=1 and uses centered finite differences,
one-sided at the walls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "PeriodicGrid1D",
    "ScalarField1D",
    "ReferenceGrid2D",
    "ScalarField2D",
    "VectorField2D",
    "derivative",
    "integrate",
    "project_zero_mean",
    "sobolev_norm",
    "fractional_sobolev_norm",
    "d_dz",
    "d_dx_2d",
    "integrate_2d",
    "trapezoid_weights_z",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PeriodicGrid1D:
    """Uniform grid on [0, L) with periodic wrap; n is a power of two."""

    length: float
    n: int

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidArgumentError(f"grid length must be positive, got {self.length}")
        if self.n < 8 or not _is_power_of_two(self.n):
            raise InvalidArgumentError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers 2*pi*k/L for the rfft half-spectrum."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)


@dataclass(frozen=True)
class ScalarField1D:
    """Real samples of an L-periodic function at the grid nodes."""

    grid: PeriodicGrid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n,):
            raise InvalidArgumentError(
                f"values shape {values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field values must be finite")

    @classmethod
    def from_function(cls, grid: PeriodicGrid1D, fn) -> "ScalarField1D":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def __add__(self, other):
        if isinstance(other, ScalarField1D):
            return ScalarField1D(self.grid, self.values + other.values)
        return ScalarField1D(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField1D):
            return ScalarField1D(self.grid, self.values - other.values)
        return ScalarField1D(self.grid, self.values - other)

    def __mul__(self, scalar: float):
        return ScalarField1D(self.grid, self.values * scalar)

    __rmul__ = __mul__


def derivative(f: ScalarField1D, order: int) -> ScalarField1D:
    """Spectral x-derivative of the given order (1..4).

    Odd orders drop the Nyquist mode, the usual convention keeping real
    output symmetric; exact for band-limited fields.
    """
    if not isinstance(order, (int, np.integer)) or order < 1 or order > 4:
        raise InvalidArgumentError(f"derivative order must be an integer in 1..4, got {order}")
    coeffs = np.fft.rfft(f.values)
    k = f.grid.wavenumbers
    coeffs = coeffs * (1j * k) ** order
    if order % 2 == 1:
        coeffs[-1] = 0.0
    return ScalarField1D(f.grid, np.fft.irfft(coeffs, n=f.grid.n))


def integrate(f: ScalarField1D) -> float:
    """Integral over one period: L * mean (trapezoid rule, exact mean)."""
    return f.grid.length * float(np.mean(f.values))


def project_zero_mean(f: ScalarField1D) -> ScalarField1D:
    """Orthogonal projection onto zero-mean fields: subtract the mean."""
    return ScalarField1D(f.grid, f.values - np.mean(f.values))


def _mode_power(f: ScalarField1D) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode squared amplitudes |c_k|^2 with multiplicity weights."""
    c = np.fft.rfft(f.values) / f.grid.n
    mult = np.full(c.shape, 2.0)
    mult[0] = 1.0
    if f.grid.n % 2 == 0:
        mult[-1] = 1.0
    return np.abs(c) ** 2, mult


def sobolev_norm(f: ScalarField1D, m: int) -> float:
    """Periodic H^m norm (sum of L2 norms of derivatives 0..m), via Parseval."""
    if m not in (0, 1, 2, 3):
        raise InvalidArgumentError(f"sobolev order must be in 0..3, got {m}")
    power, mult = _mode_power(f)
    k = f.grid.wavenumbers
    total = 0.0
    for j in range(m + 1):
        kj = k ** (2 * j)
        if j % 2 == 1 and f.grid.n % 2 == 0:
            kj = kj.copy()
            kj[-1] = 0.0  # consistent with derivative() dropping Nyquist
        total += float(np.sum(mult * kj * power))
    return float(np.sqrt(f.grid.length * total))


def fractional_sobolev_norm(f: ScalarField1D, s: float) -> float:
    """Spectral H^s norm (sum over modes of (1+k^2)^s |c_k|^2)."""
    power, mult = _mode_power(f)
    k = f.grid.wavenumbers
    return float(np.sqrt(f.grid.length * np.sum(mult * (1.0 + k**2) ** s * power)))


@dataclass(frozen=True)
class ReferenceGrid2D:
    """Tensor grid on the reference rectangle (0,L) x (0,1).

    x is periodic (grid_x), z has n_z uniformly spaced nodes including both
    walls z=0 and z=1.
    """

    grid_x: PeriodicGrid1D
    n_z: int

    def __post_init__(self):
        if self.n_z < 8:
            raise InvalidArgumentError(f"n_z must be >= 8, got {self.n_z}")

    @property
    def dz(self) -> float:
        return 1.0 / (self.n_z - 1)

    @property
    def z_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_z)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_x.n, self.n_z)


@dataclass(frozen=True)
class ScalarField2D:
    """Samples on a ReferenceGrid2D, indexed [j, k] = (x_j, z_k)."""

    grid: ReferenceGrid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise InvalidArgumentError(
                f"values shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field values must be finite")


@dataclass(frozen=True)
class VectorField2D:
    """Two-component field on a ReferenceGrid2D."""

    grid: ReferenceGrid2D
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        for name in ("u1", "u2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != self.grid.shape:
                raise InvalidArgumentError(f"{name} shape {arr.shape} != grid {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"{name} must be finite")


# FD stencils in z.  Rows of `values` are x, columns are z.

_ONESIDED_1ST_ACC2 = np.array([-1.5, 2.0, -0.5])
_ONESIDED_1ST_ACC4 = np.array([-25.0 / 12, 4.0, -3.0, 4.0 / 3, -0.25])
_CENTERED_1ST_ACC4 = np.array([1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12])


def d_dz(values: np.ndarray, dz: float, acc: int = 2) -> np.ndarray:
    """First z-derivative: centered interior, one-sided at walls."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    if acc == 2:
        out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2 * dz)
        out[:, 0] = values[:, :3] @ _ONESIDED_1ST_ACC2 / dz
        out[:, -1] = -(values[:, -3:][:, ::-1] @ _ONESIDED_1ST_ACC2) / dz
    elif acc == 4:
        nz = values.shape[1]
        if nz < 7:
            raise InvalidArgumentError("acc=4 z-derivative needs at least 7 nodes")
        out[:, 2:-2] = (
            values[:, :-4] * _CENTERED_1ST_ACC4[0]
            + values[:, 1:-3] * _CENTERED_1ST_ACC4[1]
            + values[:, 3:-1] * _CENTERED_1ST_ACC4[3]
            + values[:, 4:] * _CENTERED_1ST_ACC4[4]
        ) / dz
        for k in (0, 1):
            out[:, k] = values[:, k : k + 5] @ _ONESIDED_1ST_ACC4 / dz
        for k in (nz - 2, nz - 1):
            out[:, k] = -(values[:, k - 4 : k + 1][:, ::-1] @ _ONESIDED_1ST_ACC4) / dz
    else:
        raise InvalidArgumentError(f"unsupported accuracy {acc}")
    return out


def d_dz2(values: np.ndarray, dz: float) -> np.ndarray:
    """Second z-derivative, 2nd-order centered with one-sided walls."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[:, 1:-1] = (values[:, 2:] - 2 * values[:, 1:-1] + values[:, :-2]) / dz**2
    st = np.array([2.0, -5.0, 4.0, -1.0])
    out[:, 0] = values[:, :4] @ st / dz**2
    out[:, -1] = values[:, -4:][:, ::-1] @ st / dz**2
    return out


def d_dx_2d(values: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    """Spectral x-derivative applied along axis 0 of a 2D sample array."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    coeffs = np.fft.rfft(values, axis=0)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    coeffs *= ((1j * k) ** order)[:, None]
    if order % 2 == 1:
        coeffs[-1, :] = 0.0
    return np.fft.irfft(coeffs, n=n, axis=0)


def trapezoid_weights_z(n_z: int) -> np.ndarray:
    w = np.full(n_z, 1.0 / (n_z - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate_2d(values: np.ndarray, grid: ReferenceGrid2D) -> float:
    """Integral over the reference rectangle: exact mean in x, trapezoid in z."""
    wz = trapezoid_weights_z(grid.n_z)
    return float(grid.grid_x.spacing * np.sum(values @ wz))
