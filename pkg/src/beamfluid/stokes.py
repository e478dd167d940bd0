"""Stokes flow on a deforming subgraph domain, solved in the reference rectangle.

The physical problem

    -mu Lap(u) + grad p0 = f,   div u = g   in the subgraph domain,
    u = etadot e2 on the top wall, u = 0 on the bottom wall, x-periodic,

is transported through the fiber map onto (0,L) x (0,1), where it becomes a
variable-coefficient saddle system with matrices A_h, B_h:

    -mu div(A_h grad u_i) + (B_h grad p)_i = h f_i,   div(B_h^T u) = h g.

Discretization: velocity at nodes, pressure at cell centers (staggered in
both directions).  The viscous block is the Q1 bilinear stiffness with
cell-centered coefficients (symmetric PSD, reproduces quadratic channel flow
exactly at nodes); the divergence is the conservative cell-centered stencil
and the discrete gradient is exactly its negative transpose, so pressure
does no work on discretely divergence-free fields.  The gradient kernel
(constants and the diagonal checkerboard) is removed by two Lagrange gauge
constraints, and the final pressure is re-projected to zero mean over the
physical domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson
from scipy.sparse.linalg import splu

from .errors import InvalidDataError, ResolutionError, SolverFailureError
from .fields import (
    ReferenceGrid2D,
    ScalarField1D,
    ScalarField2D,
    VectorField2D,
    d_dx_2d,
    d_dz,
    fractional_sobolev_norm,
    integrate,
    integrate_2d,
    trapezoid_weights_z,
)
from .geometry import DeformationMap

__all__ = [
    "StokesProblem",
    "StokesSolution",
    "StokesAssembly",
    "solve_stokes",
    "surface_load",
    "divergence_lifting",
    "divergence_lifting_residual",
    "empirical_elliptic_constant",
    "physical_h1_norm",
    "physical_h2_norm",
    "physical_l2_norm",
]

_S1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
_M1 = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
_C1 = np.array([[-0.5, -0.5], [0.5, 0.5]])  # int X'_p X_q


@dataclass(frozen=True)
class StokesProblem:
    """Problem data transported to the reference rectangle.

    f holds the physical momentum source sampled at fiber points (the hat
    transform of f); g likewise for the divergence data.  Compatibility
    requires int(etadot) = int_domain(g), with both sides essentially zero
    for the mean-free data this solver accepts.
    """

    map: DeformationMap
    f: VectorField2D
    g: ScalarField2D
    etadot: ScalarField1D
    mu: float = 1.0

    def __post_init__(self):
        if self.mu <= 0:
            raise InvalidDataError(f"viscosity must be positive, got {self.mu}")
        grid = self.f.grid
        if self.g.grid != grid or self.etadot.grid != grid.grid_x:
            raise InvalidDataError("problem fields must share one reference grid")
        g_tilde = self.map.jacobian_weights(grid) * self.g.values
        flux_top = integrate(self.etadot)
        flux_bulk = integrate_2d(g_tilde, grid)
        scale = max(1.0, float(np.max(np.abs(self.etadot.values))), float(np.max(np.abs(g_tilde))))
        if abs(flux_top - flux_bulk) > 1e-10 * scale:
            raise InvalidDataError(
                f"incompatible data: boundary flux {flux_top:.3e} != volume source {flux_bulk:.3e}"
            )


@dataclass(frozen=True)
class StokesSolution:
    """Velocity and zero-mean pressure, with the traction-derived constant."""

    u: VectorField2D
    p0: ScalarField2D
    p0_cells: np.ndarray
    load: ScalarField1D
    c: float
    divergence_residual: float


class StokesAssembly:
    """Discrete operators shared by the Stokes and coupled solvers.

    Velocity DOFs live at nodes (both components), pressure at cell centers.
    Exposes the Q1 viscous stiffness per component, the conservative cell
    divergence of B_h^T u, its negative transpose as the weak pressure
    gradient, node quadrature weights, and the two pressure gauge vectors.
    """

    def __init__(self, map_: DeformationMap, grid: ReferenceGrid2D):
        if map_.grid != grid.grid_x:
            raise InvalidDataError("map and grid disagree on the periodic direction")
        if map_.min_h < grid.dz:
            raise ResolutionError(
                f"min h = {map_.min_h:.3e} under one cell height {grid.dz:.3e}"
            )
        self.map = map_
        self.grid = grid
        self.n = grid.grid_x.n
        self.nz = grid.n_z
        self.dx = grid.grid_x.spacing
        self.dz = grid.dz
        self.nvel = self.n * self.nz
        self.ncell = self.n * (self.nz - 1)
        self._build_weights()
        self._build_divergence()
        self._build_stiffness()

    # node/cell indexing: node (j, k) -> j*nz + k, cell (j, c) -> j*(nz-1) + c

    def node_ids(self):
        j, k = np.meshgrid(np.arange(self.n), np.arange(self.nz), indexing="ij")
        return j, k

    def _build_weights(self):
        wz = trapezoid_weights_z(self.nz) * (self.nz - 1) * self.dz  # plain trapezoid in z
        w = np.tile(wz, self.n) * self.dx
        self.w_node = w  # length nvel, per scalar component
        self.w_cell = self.dx * self.dz

    def _build_divergence(self):
        n, nz = self.n, self.nz
        h = self.map.h.values
        hx = self.map.h_x.values
        z = self.grid.z_nodes
        rows, cols, vals = [], [], []

        def nid(j, k):
            return (j % n) * nz + k

        cells_j, cells_c = np.meshgrid(np.arange(n), np.arange(nz - 1), indexing="ij")
        cj = cells_j.ravel()
        cc = cells_c.ravel()
        cid = cj * (nz - 1) + cc
        jp = (cj + 1) % n

        # d/dx of the z-averaged h*u1
        for dj, sign in ((0, -1.0), (1, 1.0)):
            jj = (cj + dj) % n
            for dc in (0, 1):
                rows.append(cid)
                cols.append(jj * nz + (cc + dc))
                vals.append(sign * h[jj] / (2.0 * self.dx))
        # d/dz of the x-averaged (-h' z u1 + u2): u1 part
        for dc, sign in ((0, -1.0), (1, 1.0)):
            zz = z[cc + dc]
            for jj in (cj, jp):
                rows.append(cid)
                cols.append(jj * nz + (cc + dc))
                vals.append(sign * (-hx[jj] * zz) / (2.0 * self.dz))
        div_u1 = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.ncell, self.nvel),
        ).tocsr()

        rows, cols, vals = [], [], []
        for dc, sign in ((0, -1.0), (1, 1.0)):
            for jj in (cj, jp):
                rows.append(cid)
                cols.append(jj * nz + (cc + dc))
                vals.append(np.full(cid.shape, sign / (2.0 * self.dz)))
        div_u2 = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.ncell, self.nvel),
        ).tocsr()

        self.div = sp.hstack([div_u1, div_u2]).tocsr()  # cells x 2*nvel, strong form
        # weak gradient: <v, G p> = -(D v, p) * cell area
        self.grad_w = (-self.div.T * self.w_cell).tocsr()  # 2*nvel x cells

    def _cell_coefficients(self):
        h = self.map.h.values
        hx = self.map.h_x.values
        hc = 0.5 * (h + np.roll(h, -1))
        hxc = 0.5 * (hx + np.roll(hx, -1))
        zc = 0.5 * (self.grid.z_nodes[:-1] + self.grid.z_nodes[1:])
        a11 = np.repeat(hc, self.nz - 1)
        slope = hxc[:, None] * zc[None, :]
        a12 = (-slope).ravel()
        a22 = ((1.0 + slope**2) / hc[:, None]).ravel()
        return a11, a12, a22

    def _build_stiffness(self):
        n, nz, dx, dz = self.n, self.nz, self.dx, self.dz
        kxx = np.kron(_S1, _M1) * (dz / dx)
        kzz = np.kron(_M1, _S1) * (dx / dz)
        m1 = np.zeros((4, 4))
        m2 = np.zeros((4, 4))
        # local node (a, b): a in x, b in z; flat index 2a + b
        for pa in range(2):
            for pb in range(2):
                for qa in range(2):
                    for qb in range(2):
                        m1[2 * pa + pb, 2 * qa + qb] = _C1[pa, qa] * _C1[qb, pb]
        m2 = m1.T
        kxz = m1 + m2

        a11, a12, a22 = self._cell_coefficients()
        ncell = self.ncell
        local = (
            a11[:, None, None] * kxx[None] + a12[:, None, None] * kxz[None] + a22[:, None, None] * kzz[None]
        )
        cells_j, cells_c = np.meshgrid(np.arange(n), np.arange(nz - 1), indexing="ij")
        cj = cells_j.ravel()
        cc = cells_c.ravel()
        corner = np.empty((ncell, 4), dtype=np.int64)
        corner[:, 0] = (cj % n) * nz + cc          # (0, 0)
        corner[:, 1] = (cj % n) * nz + cc + 1      # (0, 1)
        corner[:, 2] = ((cj + 1) % n) * nz + cc    # (1, 0)
        corner[:, 3] = ((cj + 1) % n) * nz + cc + 1
        rows = np.repeat(corner, 4, axis=1).ravel()
        cols = np.tile(corner, (1, 4)).ravel()
        self.stiffness = sp.coo_matrix(
            (local.ravel(), (rows, cols)), shape=(self.nvel, self.nvel)
        ).tocsr()

    def gauge_vectors(self) -> np.ndarray:
        """Constant and diagonal-checkerboard kernel vectors on cells."""
        j, c = np.meshgrid(np.arange(self.n), np.arange(self.nz - 1), indexing="ij")
        cb = ((-1.0) ** (j + c)).ravel()
        ones = np.ones(self.ncell)
        return np.stack([ones, cb], axis=1)

    def pin_constraints(self) -> sp.csr_matrix:
        """Sparse rank-2 gauge fixing: pin the pressure at cells (0,0), (0,1).

        The pinned cells straddle the two checkerboard colors, so the Gram
        matrix against the kernel {1, cb} is nonsingular.  Dense mean
        constraints would poison the sparse ordering (measured 25x slower
        factorizations); the minimal-norm gauge representative is restored
        afterwards by projecting the kernel modes out of the solution.
        """
        return sp.coo_matrix(
            (np.full(2, self.w_cell), ([0, 1], [0, 1])), shape=(self.ncell, 2)
        ).tocsr()

    def project_out_kernel(self, p_cells: np.ndarray) -> np.ndarray:
        """Remove the constant and checkerboard gauge components."""
        out = p_cells.copy()
        for vec in self.gauge_vectors().T:
            out -= (out @ vec) / (vec @ vec) * vec
        return out

    def cell_average(self, node_values: np.ndarray) -> np.ndarray:
        """Four-point average of node samples onto cell centers."""
        v = node_values
        vr = np.roll(v, -1, axis=0)
        return 0.25 * (v[:, :-1] + v[:, 1:] + vr[:, :-1] + vr[:, 1:])

    def cells_to_nodes(self, cell_values: np.ndarray) -> np.ndarray:
        """Average cell-centered samples back to nodes (one-sided at walls)."""
        n, nz = self.n, self.nz
        padded = np.empty((n, nz + 1))
        padded[:, 1:-1] = cell_values
        padded[:, 0] = 1.5 * cell_values[:, 0] - 0.5 * cell_values[:, 1]
        padded[:, -1] = 1.5 * cell_values[:, -1] - 0.5 * cell_values[:, -2]
        mid = 0.5 * (padded[:, :-1] + padded[:, 1:])
        return 0.5 * (mid + np.roll(mid, 1, axis=0))

    def cell_jacobian(self) -> np.ndarray:
        h = self.map.h.values
        hc = 0.5 * (h + np.roll(h, -1))
        return np.repeat(hc, self.nz - 1)


def _interior_mask(assembly: StokesAssembly, free_top_u2: bool = False) -> np.ndarray:
    """Boolean mask of velocity unknowns (True = solve for it)."""
    n, nz = assembly.n, assembly.nz
    mask = np.ones((2, n, nz), dtype=bool)
    mask[:, :, 0] = False
    mask[0, :, -1] = False
    mask[1, :, -1] = free_top_u2
    return mask.reshape(2 * n * nz)


def solve_stokes(problem: StokesProblem, grid: ReferenceGrid2D | None = None) -> StokesSolution:
    """Direct solve of the transformed saddle system.

    Inhomogeneous Dirichlet data are eliminated: boundary node values are
    fixed to (0, etadot) at the top and zero at the bottom, their couplings
    moved to the right-hand side, so the discrete solution satisfies the
    divergence equation exactly (residual at solver precision).
    """
    grid = grid or problem.f.grid
    asm = StokesAssembly(problem.map, grid)
    n, nz = asm.n, asm.nz
    h_nodes = problem.map.jacobian_weights(grid)

    f_tilde_1 = (h_nodes * problem.f.u1).reshape(-1)
    f_tilde_2 = (h_nodes * problem.f.u2).reshape(-1)
    g_tilde_cells = asm.cell_average(h_nodes * problem.g.values).reshape(-1)

    mask = _interior_mask(asm)
    nfree = int(mask.sum())

    # boundary values: u = 0 at z=0, u = etadot e2 at z=1
    u_bound = np.zeros(2 * asm.nvel)
    top = np.arange(n) * nz + (nz - 1)
    u_bound[asm.nvel + top] = problem.etadot.values

    mu = problem.mu
    K = sp.block_diag([asm.stiffness, asm.stiffness]).tocsr() * mu
    Gw = asm.grad_w
    D = asm.div
    Wc = asm.w_cell
    w_vec = np.concatenate([asm.w_node, asm.w_node])

    rhs_mom = w_vec * np.concatenate([f_tilde_1, f_tilde_2]) - K @ u_bound
    rhs_div = Wc * (g_tilde_cells - D @ u_bound)

    K_ii = K[mask][:, mask]
    G_i = Gw[mask]
    D_i = (D[:, mask] * Wc).tocsr()
    Cg = asm.pin_constraints()

    top_rows = sp.hstack([K_ii, G_i, sp.csr_matrix((nfree, 2))])
    mid_rows = sp.hstack([D_i, sp.csr_matrix((asm.ncell, asm.ncell)), Cg])
    bot_rows = sp.hstack(
        [sp.csr_matrix((2, nfree)), Cg.T, sp.csr_matrix((2, 2))]
    )
    system = sp.vstack([top_rows, mid_rows, bot_rows]).tocsc()
    rhs = np.concatenate([rhs_mom[mask], rhs_div, np.zeros(2)])

    try:
        lu = splu(system)
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise SolverFailureError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SolverFailureError("stokes solve returned non-finite values")

    u_full = u_bound.copy()
    u_full[mask] = sol[:nfree]
    p_cells = asm.project_out_kernel(sol[nfree : nfree + asm.ncell])

    # gauge: re-project the pressure to zero mean over the physical domain
    jac = asm.cell_jacobian()
    p_cells = p_cells - np.sum(p_cells * jac) / np.sum(jac)

    u1 = u_full[: asm.nvel].reshape(n, nz)
    u2 = u_full[asm.nvel :].reshape(n, nz)
    div_res = D @ u_full - g_tilde_cells
    div_norm = float(np.sqrt(np.sum(div_res**2) * Wc))

    u_field = VectorField2D(grid, u1, u2)
    p_grid = ScalarField2D(grid, asm.cells_to_nodes(p_cells.reshape(n, nz - 1)))
    phi, c = surface_load_from_arrays(u1, u2, p_cells.reshape(n, nz - 1), problem.map, grid, mu)
    return StokesSolution(
        u=u_field,
        p0=p_grid,
        p0_cells=p_cells.reshape(n, nz - 1),
        load=phi,
        c=c,
        divergence_residual=div_norm,
    )


def surface_load_from_arrays(u1, u2, p_cells, map_: DeformationMap, grid: ReferenceGrid2D,
                             mu: float) -> tuple[ScalarField1D, float]:
    """Traction extraction at the top wall by one-sided differences.

    phi_raw = mu h' (dx u2 - (h'/h) dz u2 + (1/h) dz u1) - (2 mu / h) dz u2 + p(z=1),
    all in reference coordinates; the returned load is the zero-mean part and
    c = -(mean of phi_raw), the Lagrange multiplier of the mean constraint.
    """
    dz = grid.dz
    h = map_.h.values
    hx = map_.h_x.values
    L = grid.grid_x.length

    def dz_top(v):
        return (3.0 * v[:, -1] - 4.0 * v[:, -2] + v[:, -3]) / (2.0 * dz)

    du1_dz = dz_top(u1)
    du2_dz = dz_top(u2)
    du2_dx = d_dx_2d(u2[:, -1][:, None], L)[:, 0]
    p_top_half = 1.5 * p_cells[:, -1] - 0.5 * p_cells[:, -2]
    p_top = 0.5 * (p_top_half + np.roll(p_top_half, 1))  # cells straddle the nodes

    phi_raw = (
        mu * hx * (du2_dx - hx / h * du2_dz + du1_dz / h)
        - 2.0 * mu / h * du2_dz
        + p_top
    )
    c = -float(np.mean(phi_raw))
    phi = ScalarField1D(grid.grid_x, phi_raw + c)
    return phi, c


def surface_load(solution: StokesSolution, map_: DeformationMap, mu: float = 1.0):
    """Zero-mean surface load and pressure constant for a computed solution."""
    grid = solution.u.grid
    return surface_load_from_arrays(
        solution.u.u1, solution.u.u2, solution.p0_cells, map_, grid, mu
    )


_CUT = np.polynomial.Polynomial([0.0, 0.0, 3.0, -2.0])  # smooth 0 -> 1 ramp
_CUT_D = _CUT.deriv(1)


def divergence_lifting(chi: ScalarField2D, map_: DeformationMap) -> VectorField2D:
    """Field w vanishing on both walls with div(B_h^T w) = chi.

    Flat-domain construction: v2 collects the running z-integral of chi minus
    a smooth ramp carrying each column's total, v1 distributes those totals
    through the spectral antiderivative; then w = B_h^{-T} v, which preserves
    the divergence identically by the Piola identity.
    """
    grid = chi.grid
    scale = max(1.0, float(np.max(np.abs(chi.values))))
    if abs(integrate_2d(chi.values, grid)) > 1e-10 * scale:
        raise InvalidDataError("divergence data must have zero mean over the rectangle")

    z = grid.z_nodes
    length = grid.grid_x.length
    column = np.trapezoid(chi.values, z, axis=1)  # per-column total
    running = cumulative_simpson(chi.values, x=z, axis=1, initial=0.0)

    # spectral antiderivative of the (mean-zero) column totals
    coeffs = np.fft.rfft(column)
    k = grid.grid_x.wavenumbers
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(k > 0, coeffs / (1j * k), 0.0)
    anti[0] = 0.0
    x_primitive = np.fft.irfft(anti, n=grid.grid_x.n)

    ramp = _CUT(z)[None, :]
    ramp_d = _CUT_D(z)[None, :]
    v1 = ramp_d * x_primitive[:, None]
    v2 = running - ramp * column[:, None]

    h = map_.h.values[:, None]
    hx = map_.h_x.values[:, None]
    w1 = v1 / h
    w2 = hx * z[None, :] * v1 / h + v2
    return VectorField2D(grid, w1, w2)


def divergence_lifting_residual(w: VectorField2D, chi: ScalarField2D, map_: DeformationMap) -> float:
    """Relative L2 defect of div(B_h^T w) - chi, 4th-order z-differences."""
    grid = w.grid
    h = map_.h.values[:, None]
    hx = map_.h_x.values[:, None]
    z = grid.z_nodes[None, :]
    bt_w_1 = h * w.u1
    bt_w_2 = -hx * z * w.u1 + w.u2
    div = d_dx_2d(bt_w_1, grid.grid_x.length) + d_dz(bt_w_2, grid.dz, acc=4)
    num = np.sqrt(integrate_2d((div - chi.values) ** 2, grid))
    den = np.sqrt(integrate_2d(chi.values**2, grid))
    return float(num / den) if den > 0 else float(num)


def _physical_gradient(values: np.ndarray, map_: DeformationMap, grid: ReferenceGrid2D):
    """(d/dx, d/dy) in physical coordinates of a reference-domain sample."""
    h = map_.h.values[:, None]
    hx = map_.h_x.values[:, None]
    z = grid.z_nodes[None, :]
    vz = d_dz(values, grid.dz)
    vx = d_dx_2d(values, grid.grid_x.length) - z * hx / h * vz
    vy = vz / h
    return vx, vy


def physical_l2_norm(values: np.ndarray, map_: DeformationMap, grid: ReferenceGrid2D) -> float:
    jac = map_.jacobian_weights(grid)
    return float(np.sqrt(integrate_2d(jac * values**2, grid)))


def physical_h1_norm(values: np.ndarray, map_: DeformationMap, grid: ReferenceGrid2D) -> float:
    vx, vy = _physical_gradient(values, map_, grid)
    jac = map_.jacobian_weights(grid)
    return float(np.sqrt(integrate_2d(jac * (values**2 + vx**2 + vy**2), grid)))


def physical_h2_norm(values: np.ndarray, map_: DeformationMap, grid: ReferenceGrid2D) -> float:
    vx, vy = _physical_gradient(values, map_, grid)
    vxx, vxy = _physical_gradient(vx, map_, grid)
    vyx, vyy = _physical_gradient(vy, map_, grid)
    jac = map_.jacobian_weights(grid)
    total = values**2 + vx**2 + vy**2 + vxx**2 + vxy**2 + vyx**2 + vyy**2
    return float(np.sqrt(integrate_2d(jac * total, grid)))


def empirical_elliptic_constant(problems: list[StokesProblem]) -> dict:
    """Solve an ensemble and report solution/data norm ratios bucketed by r0.

    ratio = (|u|_H2 + |p0|_H1) / (|f|_L2 + |g|_H1 + |etadot|_H3/2), all norms
    over the physical domain.  The report carries per-problem ratios and the
    max per r0 bucket; finiteness is the only hard assertion here.
    """
    if len(problems) < 1:
        raise InvalidDataError("need at least one problem")
    entries = []
    for problem in problems:
        grid = problem.f.grid
        solution = solve_stokes(problem)
        map_ = problem.map
        u_norm = np.sqrt(
            physical_h2_norm(solution.u.u1, map_, grid) ** 2
            + physical_h2_norm(solution.u.u2, map_, grid) ** 2
        )
        p_norm = physical_h1_norm(solution.p0.values, map_, grid)
        f_norm = np.sqrt(
            physical_l2_norm(problem.f.u1, map_, grid) ** 2
            + physical_l2_norm(problem.f.u2, map_, grid) ** 2
        )
        g_norm = physical_h1_norm(problem.g.values, map_, grid)
        eta_norm = fractional_sobolev_norm(problem.etadot, 1.5)
        data = f_norm + g_norm + eta_norm
        if data == 0.0:
            continue
        ratio = (u_norm + p_norm) / data
        if not np.isfinite(ratio):
            raise SolverFailureError("elliptic ratio is not finite")
        entries.append({"r0": map_.r0, "ratio": float(ratio)})
    buckets: dict = {}
    for entry in entries:
        key = round(entry["r0"], 1)
        buckets.setdefault(key, []).append(entry["ratio"])
    return {
        "count": len(entries),
        "entries": entries,
        "bucket_max": {k: max(v) for k, v in sorted(buckets.items())},
    }
