"""Positivity inequalities, the explicit floor function, and the stream multiplier.

Three families live here:

* ratio evaluators for the weighted gradient inequality
  int |eta_x|^4 / eta^{4a} <= C ||eta_xx||^2 ||eta||_inf^{2(1-2a)}
  and the pointwise bounds |eta_x|^2 <= C ||eta_xx||^{1/2} ||eta_xxx||^{1/2} eta
  and |eta_x|^2 <= C ||eta_xxx|| eta.  The universal constants are
  non-constructive, so operations return both sides and their ratio; tests
  assert finiteness, scaling laws and refinement stability, never a value of C.

* d_min: the continuous function bounding sup(1/eta) by ||1/eta||_L1 and
  ||eta||_H2, the computational heart of the no-contact certificate.  The
  increasing profile phi(sigma) = int_0^{L sigma} dz/(1+z^{3/2}) is evaluated
  by adaptive quadrature.

* the stream multiplier psi = h_x * chi0(y/h) with chi0(z) = z^2 (3-2z),
  whose curl has top trace h_xx * e2 and which generates the pressure
  surrogate q_s(x) = 6 [1/h(0)^2 - 1/h(x)^2].  All partial derivatives are
  closed-form, so the identities can be checked analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .beam import BeamState
from .errors import ContactError, InvalidArgumentError
from .fields import PeriodicGrid1D, ScalarField1D, derivative, sobolev_norm

__all__ = [
    "inequality_A1_ratio",
    "pointwise_gradient_bounds",
    "phi_profile",
    "d_min",
    "StreamFunction",
    "build_stream_function",
    "stream_norm_estimates",
    "random_positive_fields",
]


def _require_positive(eta: ScalarField1D):
    if float(np.min(eta.values)) <= 0.0:
        raise ContactError("field must be strictly positive")


def inequality_A1_ratio(eta: ScalarField1D, alpha: float, oversample: int = 1):
    """Both sides of the weighted gradient bound and their ratio.

    Returns (lhs, rhs_core, ratio) where rhs_core omits the unknown
    constant.  `oversample` spectrally refines the quadrature grid (used by
    the dense-quadrature oracle tests).
    """
    if not (0.0 < alpha < 0.5) or alpha == 0.25:
        raise InvalidArgumentError(f"alpha must be in (0, 1/2) minus 1/4, got {alpha}")
    _require_positive(eta)

    values = eta.values
    grid = eta.grid
    if oversample > 1:
        n_fine = grid.n * oversample
        values = _spectral_resample(values, n_fine)
        grid = PeriodicGrid1D(grid.length, n_fine)
        eta_fine = ScalarField1D(grid, values)
    else:
        eta_fine = eta

    ex = derivative(eta_fine, 1).values
    lhs = grid.length * float(np.mean(ex**4 / values ** (4 * alpha)))
    rhs_core = (
        sobolev_norm(derivative(eta_fine, 2), 0) ** 2
        * float(np.max(values)) ** (2 * (1 - 2 * alpha))
    )
    ratio = 0.0 if lhs == 0.0 else lhs / rhs_core
    return lhs, rhs_core, ratio


def _spectral_resample(values: np.ndarray, n_fine: int) -> np.ndarray:
    """Zero-padded FFT interpolation onto a finer power-of-two grid."""
    n = values.size
    coeffs = np.fft.rfft(values) / n
    out = np.zeros(n_fine // 2 + 1, dtype=complex)
    out[: coeffs.size] = coeffs
    if n % 2 == 0:
        out[n // 2] *= 0.5  # split the Nyquist mode symmetrically
    return np.fft.irfft(out * n_fine, n=n_fine)


def pointwise_gradient_bounds(eta: ScalarField1D):
    """Sup over samples of |eta_x|^2 / (norms * eta) for the two variants."""
    _require_positive(eta)
    ex = derivative(eta, 1).values
    nxx = sobolev_norm(derivative(eta, 2), 0)
    nxxx = sobolev_norm(derivative(eta, 3), 0)
    num = ex**2
    if float(np.max(num)) == 0.0:
        return 0.0, 0.0
    ratio_interp = float(np.max(num / (np.sqrt(nxx * nxxx) * eta.values)))
    ratio_plain = float(np.max(num / (nxxx * eta.values)))
    return ratio_interp, ratio_plain


def phi_profile(sigma: float, length: float = 1.0) -> float:
    """Increasing profile int_0^{L sigma} dz / (1 + z^(3/2)), quad to 1e-10."""
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0.0:
        return 0.0
    value, _ = quad(lambda z: 1.0 / (1.0 + z**1.5), 0.0, length * sigma,
                    epsabs=1e-12, epsrel=1e-10, limit=200)
    return float(value)


def d_min(l1_inv: float, h2: float, length: float = 1.0) -> float:
    """Explicit upper bound for sup(1/eta) given ||1/eta||_L1 and ||eta||_H2.

    The curvature scale is M = h2/sqrt(3), the constant the Taylor-remainder
    derivation actually yields; the bound is non-decreasing in M, so feeding
    the full H2 norm is safe.  h2 = 0 reduces to the constant-profile branch
    l1_inv / L.
    """
    if l1_inv <= 0:
        raise InvalidArgumentError(f"l1_inv must be positive, got {l1_inv}")
    if h2 < 0:
        raise InvalidArgumentError(f"h2 must be non-negative, got {h2}")
    if h2 == 0.0:
        return l1_inv / length
    m = h2 / np.sqrt(3.0)
    sigma = (m * l1_inv / length) ** (2.0 / 3.0)
    return m**2 * l1_inv**3 / phi_profile(sigma, length) ** 3


_CHI0 = np.polynomial.Polynomial([0.0, 0.0, 3.0, -2.0])  # z^2 (3 - 2z)
_CHI0_D1 = _CHI0.deriv(1)
_CHI0_D2 = _CHI0.deriv(2)
_CHI0_D3 = _CHI0.deriv(3)


@dataclass(frozen=True)
class StreamFunction:
    """Closed-form evaluators for psi = h_x * chi0(y/h) and its curl.

    h and its first three spectral derivatives are sampled; the y-dependence
    is the cubic profile chi0 so every partial derivative is analytic.
    Boundary identities: psi(x,0)=0, psi(x,h)=h_x, dpsi/dy(x,h)=0, and
    w = curl(psi) satisfies w(x,0)=0, w(x,h)=h_xx e2.
    """

    grid: PeriodicGrid1D
    h: np.ndarray
    hx: np.ndarray
    hxx: np.ndarray
    hxxx: np.ndarray
    qs: ScalarField1D

    def _z(self, j, y):
        return np.asarray(y, dtype=float) / self.h[j]

    def psi(self, j, y):
        return self.hx[j] * _CHI0(self._z(j, y))

    def psi_x(self, j, y):
        z = self._z(j, y)
        return self.hxx[j] * _CHI0(z) - (self.hx[j] ** 2 * z / self.h[j]) * _CHI0_D1(z)

    def psi_y(self, j, y):
        return (self.hx[j] / self.h[j]) * _CHI0_D1(self._z(j, y))

    def psi_xy(self, j, y):
        z = self._z(j, y)
        return (self.hxx[j] / self.h[j]) * _CHI0_D1(z) - (
            self.hx[j] ** 2 / self.h[j] ** 2
        ) * (_CHI0_D1(z) + z * _CHI0_D2(z))

    def psi_yy(self, j, y):
        return (self.hx[j] / self.h[j] ** 2) * _CHI0_D2(self._z(j, y))

    def psi_yyy(self, j, y):
        return (self.hx[j] / self.h[j] ** 3) * _CHI0_D3(self._z(j, y))

    def psi_xx(self, j, y):
        z = self._z(j, y)
        h, hx, hxx, hxxx = self.h[j], self.hx[j], self.hxx[j], self.hxxx[j]
        return (
            hxxx * _CHI0(z)
            - (3.0 * hx * hxx * z / h) * _CHI0_D1(z)
            + (2.0 * hx**3 * z / h**2) * _CHI0_D1(z)
            + (hx**3 * z**2 / h**2) * _CHI0_D2(z)
        )

    def w(self, j, y):
        """The divergence-free multiplier (-psi_y, psi_x)."""
        return -self.psi_y(j, y), self.psi_x(j, y)

    def q(self, j, y):
        """The matched pressure q_s(x) + psi_xy."""
        return self.qs.values[j] + self.psi_xy(j, y)

    def div_w_mismatch(self, j, y):
        """Independent evaluation of div w = -d/dx(psi_y) + d/dy(psi_x).

        Both mixed derivatives are formed from separate closed-form
        expressions; the return is their difference (identically zero up to
        rounding when the implementation is correct).
        """
        z = self._z(j, y)
        h, hx, hxx = self.h[j], self.hx[j], self.hxx[j]
        dx_of_psiy = (hxx / h - hx**2 / h**2) * _CHI0_D1(z) - (
            hx**2 * z / h**2
        ) * _CHI0_D2(z)
        dy_of_psix = self.psi_xy(j, y)
        return dy_of_psix - dx_of_psiy


def build_stream_function(beam: BeamState) -> StreamFunction:
    """Assemble the evaluators and the sampled q_s from the current height."""
    h = beam.h.values
    if float(np.min(h)) <= 0.0:
        raise ContactError("stream function needs a strictly positive height", time=beam.t)
    grid = beam.h.grid
    qs = 6.0 * (1.0 / h[0] ** 2 - 1.0 / h**2)
    return StreamFunction(
        grid=grid,
        h=h,
        hx=derivative(beam.h, 1).values,
        hxx=derivative(beam.h, 2).values,
        hxxx=derivative(beam.h, 3).values,
        qs=ScalarField1D(grid, qs),
    )


def _fluid_quadrature(sf: StreamFunction, fn, n_z: int = 65) -> float:
    """integral over the subgraph domain of fn(j, y)^2, trapezoid in y."""
    total = 0.0
    dx = sf.grid.spacing
    for j in range(sf.grid.n):
        y = np.linspace(0.0, sf.h[j], n_z)
        total += dx * np.trapezoid(fn(j, y) ** 2, y)
    return total


def stream_norm_estimates(states: list[BeamState], n_z: int = 65) -> dict:
    """Empirical ratios for the five stream-function estimates.

    The pointwise gradient bound and the two per-time L2 bounds are reported
    as the max ratio over the slice; the two space-time bounds integrate over
    the slice (trapezoid in t).  Right-hand sides take the unknown universal
    constant as 1.
    """
    if not states:
        raise InvalidArgumentError("need at least one state")
    point_ratios, dy_ratios, dx_ratios = [], [], []
    dtpsi_sq, dxxpsi_sq, rhs_dt_sq, rhs_dxx_sq, times = [], [], [], [], []

    for state in states:
        sf = build_stream_function(state)
        h = sf.h
        hsup = float(np.max(h))
        nxx = sobolev_norm(derivative(state.h, 2), 0)
        nxxx = sobolev_norm(derivative(state.h, 3), 0)
        inv_h_l1 = state.h.grid.length * float(np.mean(1.0 / h))

        # pointwise |grad psi| <= C [ |hxx| + |hx|/h + |hx|^2/h ]
        best = 0.0
        lhs_seen = False
        for j in range(sf.grid.n):
            y = np.linspace(0.0, h[j], 17)
            lhs = np.hypot(sf.psi_x(j, y), sf.psi_y(j, y))
            rhs = abs(sf.hxx[j]) + abs(sf.hx[j]) / h[j] + sf.hx[j] ** 2 / h[j]
            if rhs > 1e-14:
                best = max(best, float(np.max(lhs)) / rhs)
                lhs_seen = lhs_seen or float(np.max(lhs)) > 0
        point_ratios.append(best)

        lhs_dy = np.sqrt(_fluid_quadrature(sf, sf.psi_y, n_z))
        rhs_dy = hsup**0.25 * nxx**0.5 * inv_h_l1**0.25
        dy_ratios.append(lhs_dy / rhs_dy if rhs_dy > 0 else 0.0)

        lhs_dx = np.sqrt(_fluid_quadrature(sf, sf.psi_x, n_z))
        rhs_dx = hsup**0.5 * nxx
        dx_ratios.append(lhs_dx / rhs_dx if rhs_dx > 0 else 0.0)

        # space-time integrands
        hdot = state.hdot
        hdotx = derivative(hdot, 1).values
        ht = hdot.values

        def dtpsi(j, y):
            z = y / h[j]
            return hdotx[j] * _CHI0(z) - (sf.hx[j] * ht[j] * z / h[j]) * _CHI0_D1(z)

        dtpsi_sq.append(_fluid_quadrature(sf, dtpsi, n_z))
        dxxpsi_sq.append(_fluid_quadrature(sf, sf.psi_xx, n_z))
        rhs_dt_sq.append(
            hsup * sobolev_norm(derivative(hdot, 1), 0) ** 2
            + sobolev_norm(hdot, 0) ** 2 * nxxx
        )
        rhs_dxx_sq.append(hsup * nxxx**2 + nxx**1.5 * nxxx**1.5)
        times.append(state.t)

    report = {
        "pointwise_gradient": max(point_ratios),
        "dpsi_dy_l2": max(dy_ratios),
        "dpsi_dx_l2": max(dx_ratios),
    }
    if len(states) >= 2:
        t = np.asarray(times)
        lhs_dt = np.sqrt(np.trapezoid(dtpsi_sq, t))
        rhs_dt = np.sqrt(np.trapezoid(rhs_dt_sq, t))
        lhs_dxx = np.sqrt(np.trapezoid(dxxpsi_sq, t))
        rhs_dxx = np.sqrt(np.trapezoid(rhs_dxx_sq, t))
        report["dpsi_dt_l2"] = lhs_dt / rhs_dt if rhs_dt > 0 else 0.0
        report["dpsi_dxx_l2"] = lhs_dxx / rhs_dxx if rhs_dxx > 0 else 0.0
    for value in report.values():
        if not np.isfinite(value):
            raise InvalidArgumentError("stream estimate ratio is not finite")
    return report


def random_positive_fields(grid: PeriodicGrid1D, count: int, seed: int,
                           decay: float = 2.0, margin: float = 0.5,
                           max_mode: int | None = None):
    """Reproducible ensemble of smooth positive fields.

    Mode amplitudes fall like (1+k^2)^(-decay) with uniform random phases;
    positivity is enforced by shifting each sample up by its max amplitude
    plus the margin.
    """
    rng = np.random.default_rng(seed)
    k_max = max_mode if max_mode is not None else min(grid.n // 4, 32)
    fields = []
    for _ in range(count):
        coeffs = np.zeros(grid.n // 2 + 1, dtype=complex)
        modes = np.arange(1, k_max + 1)
        amp = (1.0 + modes.astype(float) ** 2) ** (-decay)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=k_max)
        coeffs[1 : k_max + 1] = amp * np.exp(1j * phase)
        raw = np.fft.irfft(coeffs * grid.n, n=grid.n)
        shifted = raw + np.max(np.abs(raw)) + margin
        fields.append(ScalarField1D(grid, shifted))
    return fields
