"""Manufactured solutions shared by the operator tests and the acceptance suite."""

import numpy as np
import sympy as sp

from lagwave.grid import AcousticMedium, ElasticMedium, build_grid
from lagwave.krylov import KrylovConfig, gmres_k, pcg
from lagwave.operators import AcousticOperator, ElasticOperator
from lagwave.precond import build_acoustic_preconditioner, build_elastic_preconditioner

L1, L2, H = 1.0, 1.0, 4.0
r, z = sp.symbols("r z", positive=True)


def wall(g):
    """The zero-flux face beyond the last z node, where the discrete far wall sits."""
    return sp.Float(g.l2 + 0.5 * g.h_z, 30)


def _f(expr):
    fn = sp.lambdify((r, z), expr, "numpy")
    return lambda a, b: np.broadcast_to(fn(a, b), np.broadcast(a, b).shape) * 1.0


def acoustic_problem(top=L2):
    u = sp.cos(sp.pi * r / (2 * L1)) * sp.cos(sp.pi * z / top)
    kappa = 1 + r**2 / 2 + z / 3
    rho = 1 + z**2
    lhs = -(sp.diff(r * kappa * sp.diff(u, r), r) + sp.diff(r * kappa * sp.diff(u, z), z)) + r * rho * H**2 / 4 * u
    return AcousticMedium(_f(kappa), _f(rho)), _f(u), _f(sp.simplify(lhs / r))


def acoustic_error(n):
    g = build_grid(L1, L2, n, n)
    medium, u, f = acoustic_problem(wall(g))
    op = AcousticOperator.from_medium(g, medium, H)
    P = build_acoustic_preconditioner(g, medium, H)
    R, Z = g.r[:, None], g.z[None, :]
    # M y = -r phi with phi = -f reproduces M u = r f
    b = op.system_rhs(-f(R, Z))
    y, _ = pcg(op.apply, P.apply_inverse, b, KrylovConfig(tol=1e-13))
    return g.h_r, float(np.abs(y - u(R, Z)).max())


def elastic_problem(top=L2):
    lam = 2 + r**2 / 2
    mu = sp.Integer(1)
    rho = 1 + z / 2
    A = r * (L1**2 - r**2) ** 2
    B = -lam * (sp.diff(A, r) + A / r) * top / (sp.pi * (lam + 2 * mu))
    Q = A * sp.cos(sp.pi * z / top)
    U = B * sp.sin(sp.pi * z / top)
    s_rr = (lam + 2 * mu) * sp.diff(Q, r) + lam * (Q / r + sp.diff(U, z))
    s_tt = (lam + 2 * mu) * Q / r + lam * (sp.diff(Q, r) + sp.diff(U, z))
    s_zz = (lam + 2 * mu) * sp.diff(U, z) + lam * (sp.diff(Q, r) + Q / r)
    t_rz = mu * (sp.diff(Q, z) + sp.diff(U, r))
    eq_q = sp.diff(r * s_rr, r) + sp.diff(r * t_rz, z) - s_tt - r * rho * H**2 / 4 * Q
    eq_u = sp.diff(r * t_rz, r) + sp.diff(r * s_zz, z) - r * rho * H**2 / 4 * U
    medium = ElasticMedium(_f(lam), _f(mu), _f(rho))
    return medium, (_f(Q), _f(U)), (_f(sp.simplify(eq_q / r)), _f(sp.simplify(eq_u / r)))


def elastic_error(n):
    g = build_grid(L1, L2, n, n)
    medium, (Q, U), (fq, fu) = elastic_problem(wall(g))
    op = ElasticOperator.from_medium(g, medium, H)
    K = build_elastic_preconditioner(g, medium, H)
    R, Z = g.r[:, None], g.z[None, :]
    # -(L x) = -r phi  <=>  L x = r phi, so phi is the continuous residual itself
    b = op.system_rhs(np.stack([fq(R, Z), fu(R, Z)]))
    x, _ = gmres_k(op.apply, K.apply_inverse, b, KrylovConfig(tol=1e-12, max_iters=5000))
    exact = np.stack([Q(R, Z), U(R, Z)])
    return g.h_r, float(np.abs(x - exact).max() / np.abs(exact).max())


def observed_order(errors):
    (h1, e1), (h2, e2) = errors
    return float(np.log(e1 / e2) / np.log(h1 / h2))
