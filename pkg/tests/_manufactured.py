"""Shared symbolic oracle for the transformed Stokes system.

Chosen fields: u* = curl(sin(2 pi x) z^2 (1-z)^2), p* = cos(2 pi x)(z - 1/2),
h = 1 + 0.2 sin(2 pi x).  All data (f, g, etadot) follow by exact symbolic
differentiation of the transformed equations; the boundary velocity is zero
because the stream function has a double root at z = 1.
"""

from functools import lru_cache

import numpy as np
import sympy as sym

from beamfluid.fields import PeriodicGrid1D, ReferenceGrid2D, ScalarField1D, ScalarField2D, VectorField2D
from beamfluid.geometry import build_deformation
from beamfluid.stokes import StokesProblem


@lru_cache(maxsize=1)
def manufactured_callables():
    x, z = sym.symbols("x z", real=True)
    h = 1 + sym.Rational(1, 5) * sym.sin(2 * sym.pi * x)
    hp = sym.diff(h, x)
    psi = sym.sin(2 * sym.pi * x) * z**2 * (1 - z) ** 2
    u1 = -sym.diff(psi, z)
    u2 = sym.diff(psi, x)
    p = sym.cos(2 * sym.pi * x) * (z - sym.Rational(1, 2))

    a11, a12, a22 = h, -hp * z, (1 + (hp * z) ** 2) / h

    def div_a(u):
        return sym.diff(a11 * sym.diff(u, x) + a12 * sym.diff(u, z), x) + sym.diff(
            a12 * sym.diff(u, x) + a22 * sym.diff(u, z), z
        )

    f1 = -div_a(u1) + (h * sym.diff(p, x) - hp * z * sym.diff(p, z))
    f2 = -div_a(u2) + sym.diff(p, z)
    g_tilde = sym.diff(h * u1, x) + sym.diff(-hp * z * u1 + u2, z)

    # physical surface load at the moving wall (reference coordinates, z = 1)
    du1_dz = sym.diff(u1, z)
    du2_dz = sym.diff(u2, z)
    du2_dx = sym.diff(u2, x)
    phi_raw = (
        hp * (du2_dx - hp / h * du2_dz + du1_dz / h) - 2 / h * du2_dz + p
    ).subs(z, 1)

    names = dict(u1=u1, u2=u2, p=p, f1=f1, f2=f2, g_tilde=g_tilde, h=h)
    out = {k: sym.lambdify((x, z), v, "numpy") for k, v in names.items()}
    out["phi_raw"] = sym.lambdify(x, phi_raw, "numpy")
    return out


def manufactured_problem(n: int, n_z: int):
    """Problem, exact fields and map at the requested resolution."""
    fn = manufactured_callables()
    gx = PeriodicGrid1D(1.0, n)
    grid = ReferenceGrid2D(gx, n_z)
    h_values = fn["h"](gx.nodes, 0.0) * np.ones(n)
    map_ = build_deformation(ScalarField1D(gx, h_values))
    x = gx.nodes[:, None]
    z = grid.z_nodes[None, :]
    h_col = h_values[:, None]
    problem = StokesProblem(
        map=map_,
        f=VectorField2D(
            grid,
            fn["f1"](x, z) / h_col * np.ones_like(z),
            fn["f2"](x, z) / h_col,
        ),
        g=ScalarField2D(grid, fn["g_tilde"](x, z) / h_col),
        etadot=ScalarField1D(gx, np.zeros(n)),
    )
    exact = {
        "u1": fn["u1"](x, z) * np.ones((n, n_z)),
        "u2": fn["u2"](x, z),
        "p_cells": fn["p"]((gx.nodes + gx.spacing / 2)[:, None],
                           (0.5 * (grid.z_nodes[:-1] + grid.z_nodes[1:]))[None, :]),
        "phi_raw": fn["phi_raw"](gx.nodes),
    }
    return problem, exact, map_, grid
