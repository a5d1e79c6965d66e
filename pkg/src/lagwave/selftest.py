"""Small embedded oracle checks, runnable from the command line.

Every check is deterministic for a given seed and prints no timings, so the
report text is identical between runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import laguerre
from .grid import AcousticMedium, Constant, ElasticMedium, Layered, build_grid
from .krylov import KrylovConfig, gmres_k, pcg
from .laguerre import ConvolutionAccumulators, LaguerreBasis
from .operators import AcousticOperator, ElasticOperator
from .precond import build_acoustic_preconditioner, build_elastic_preconditioner
from .tridiag import TridiagonalMatrix, factor, solve_batched, thomas_solve

__all__ = ["CheckResult", "CHECKS", "run_selftest", "format_report"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, value, limit, fmt="{:.2e}"):
    ok = bool(np.isfinite(value) and value <= limit)
    return CheckResult(name, ok, f"{fmt.format(value)} <= {fmt.format(limit)}")


def check_laguerre_orthonormality(rng, conv_weight):
    basis = LaguerreBasis(9, 1.0, 21)
    # Gauss-Laguerre nodes integrate the polynomial part exactly
    x, w = np.polynomial.laguerre.laggauss(80)
    phi = laguerre.eval_kernel_functions(basis, x, 20)
    G = (phi * (w * np.exp(x) * x**9)) @ phi.T
    return _check("laguerre_orthonormality", float(np.abs(G - np.eye(21)).max()), 1e-10)


def check_laguerre_roundtrip(rng, conv_weight):
    basis = LaguerreBasis(9, 400.0, 800)
    f = lambda t: laguerre.source_time_function(t, 30.0, 0.2, 4.0)  # noqa: E731
    series = laguerre.forward_transform(f, basis, 1e-4, 0.6)
    t = np.linspace(0.0, 0.6, 601)
    err = float(np.abs(laguerre.inverse_series(series, basis, t) - f(t)).max())
    return _check("laguerre_roundtrip", err, 1e-6)


def check_accumulators(rng, conv_weight):
    alpha, n = 9, 60
    R = rng.standard_normal((n, 4))
    acc = ConvolutionAccumulators.zeros(alpha, (4,))
    worst = 0.0
    for m in range(n):
        if m > 0:
            direct = sum(conv_weight(m, k, alpha) * R[k] for k in range(m))
            fast = laguerre.norm_factor(m, alpha) * acc.sum(m)
            worst = max(worst, float(np.abs(fast - direct).max() / max(np.abs(direct).max(), 1e-300)))
        acc.step(R[m], m)
    return _check("convolution_accumulators", worst, 1e-12)


def check_tridiagonal(rng, conv_weight):
    n, k = 3000, 16
    lower, upper = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.5, 1.5, n)
    T = TridiagonalMatrix(lower, diag, upper)
    F = rng.standard_normal((n, k))
    ref = thomas_solve(T, F)
    worst = 0.0
    for workers in (1, 2, 4):
        X = solve_batched(factor(T, workers), F, parallel=False)
        worst = max(worst, float(np.abs(X - ref).max() / np.abs(ref).max()))
    return _check("tridiagonal_vs_thomas", worst, 1e-12)


def check_preconditioner(rng, conv_weight):
    g = build_grid(100.0, 80.0, 24, 20)
    med = AcousticMedium(Layered((0.0, 40.0), (1.0, 2.0)), Constant(1.0))
    P = build_acoustic_preconditioner(g, med, 10.0)
    y = rng.standard_normal(g.shape)
    err_a = float(np.abs(P.apply_inverse(P.apply(y)) - y).max() / np.abs(y).max())
    em = ElasticMedium.from_velocities(Constant(2.0), Constant(1.0), Constant(1.0))
    K = build_elastic_preconditioner(g, em, 10.0)
    x = rng.standard_normal((2,) + g.shape)
    err_e = float(np.abs(K.apply_inverse(K.apply(x)) - x).max() / np.abs(x).max())
    return _check("preconditioner_roundtrip", max(err_a, err_e), 1e-10)


def check_operator_adjointness(rng, conv_weight):
    g = build_grid(1.0, 1.0, 12, 10)
    med = AcousticMedium(Layered((0.0, 0.3), (1.0, 3.0)), Layered((0.0, 0.6), (1.0, 2.0)))
    op = AcousticOperator.from_medium(g, med, 5.0)
    x, y = rng.standard_normal((2,) + g.shape)
    x[-1] = y[-1] = 0.0
    lhs, rhs = float(np.vdot(op.apply(x), y)), float(np.vdot(x, op.apply(y)))
    asym = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    positive = float(np.vdot(op.apply(x), x)) > 0
    res = _check("acoustic_operator_adjointness", asym, 1e-12)
    return CheckResult(res.name, res.passed and positive, res.detail + ("" if positive else ", not positive"))


def check_pcg_dense(rng, conv_weight):
    g = build_grid(1.0, 1.0, 16, 16)
    med = AcousticMedium(Layered((0.0, 0.5), (1.0, 2.0)), Constant(1.0))
    op = AcousticOperator.from_medium(g, med, 5.0)
    P = build_acoustic_preconditioner(g, med, 5.0)
    b = op.system_rhs(rng.standard_normal(g.shape))
    n = b.size
    A = np.column_stack([op.apply(e.reshape(g.shape)).ravel() for e in np.eye(n)])
    ref = np.linalg.solve(A, b.ravel()).reshape(g.shape)
    x, _ = pcg(op.apply, P.apply_inverse, b, KrylovConfig(tol=1e-10))
    return _check("pcg_dense_oracle", float(np.abs(x - ref).max() / np.abs(ref).max()), 1e-8)


def check_gmres_dense(rng, conv_weight):
    C = 4.0 * np.eye(20) + 0.5 * rng.standard_normal((20, 20))
    b = rng.standard_normal(20)
    x, _ = gmres_k(lambda v: C @ v, lambda v: v.copy(), b, KrylovConfig(tol=1e-10, restart_k=5))
    ref = np.linalg.solve(C, b)
    return _check("gmres_dense_oracle", float(np.abs(x - ref).max() / np.abs(ref).max()), 1e-8)


def check_elastic_gmres(rng, conv_weight):
    g = build_grid(50.0, 50.0, 20, 20)
    em = ElasticMedium.from_velocities(Layered((0.0, 10.0), (1500.0, 3000.0)),
                                       Layered((0.0, 10.0), (800.0, 1700.0)), Constant(2000.0))
    op = ElasticOperator.from_medium(g, em, 600.0)
    K = build_elastic_preconditioner(g, em, 600.0)
    b = op.system_rhs(rng.standard_normal(op.shape))
    x, stats = gmres_k(op.apply, K.apply_inverse, b, KrylovConfig(tol=1e-10))
    mono = bool(np.all(np.diff(stats.cycle_residuals) <= 0))
    res = float(np.linalg.norm(op.apply(x) - b) / np.linalg.norm(b))
    out = _check("elastic_gmres_residual", res, 1e-9)
    return CheckResult(out.name, out.passed and mono, out.detail + ("" if mono else ", restart residuals increased"))


CHECKS: list[Callable] = [
    check_laguerre_orthonormality,
    check_laguerre_roundtrip,
    check_accumulators,
    check_tridiagonal,
    check_preconditioner,
    check_operator_adjointness,
    check_pcg_dense,
    check_gmres_dense,
    check_elastic_gmres,
]


def run_selftest(seed: int = 0, conv_weight: Callable = laguerre.conv_weight) -> list[CheckResult]:
    """Run every check with its own generator seeded from ``seed``.

    ``conv_weight`` is the weight the accumulator check compares against;
    tests pass a perturbed one to confirm the suite notices.
    """
    results = []
    for k, check in enumerate(CHECKS):
        rng = np.random.default_rng([seed, k])
        try:
            results.append(check(rng, conv_weight))
        except Exception as exc:  # a crashing check is a failing check
            results.append(CheckResult(check.__name__.removeprefix("check_"), False, f"raised {exc!r}"))
    return results


def format_report(results) -> str:
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results]
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} checks passed"
                 + (f"; failed: {', '.join(failed)}" if failed else ""))
    return "\n".join(lines)


def perturbed_conv_weight(m: int, k: int, alpha: int) -> float:
    """Fault-injection stand-in: the true weight off by one part in a million."""
    return laguerre.conv_weight(m, k, alpha) * (1.0 + 1e-6 * math.cos(k))
