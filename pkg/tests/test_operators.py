import math

import numpy as np
import pytest

import mms
from lagwave.grid import AcousticMedium, Constant, ElasticMedium, Layered, build_grid, sample_acoustic
from lagwave.laguerre import ConvolutionAccumulators, norm_factor
from lagwave.operators import (
    AcousticOperator,
    ElasticOperator,
    SourceKind,
    SourceSpec,
    build_acoustic_rhs,
    discretize_source,
)


def dense(apply, shape):
    n = int(np.prod(shape))
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols.append(apply(e.reshape(shape)).ravel())
    return np.column_stack(cols)


def interior(shape, ncomp=1):
    """Indices of unknowns off the Dirichlet wall."""
    nr, nz = shape
    base = np.arange((nr - 1) * nz)
    return np.concatenate([base + c * nr * nz for c in range(ncomp)])


def hand_assembled_acoustic(g, a1, a2, w):
    """Five-point matrix written out entry by entry."""
    nr, nz = g.shape
    idx = lambda i, k: i * nz + k  # noqa: E731
    M = np.zeros((nr * nz, nr * nz))
    for i in range(nr):
        for k in range(nz):
            p = idx(i, k)
            if i == nr - 1:
                M[p, p] = 1.0
                continue
            M[p, p] += w[i, k]
            if i > 0:
                c = a1[i - 1, k] / g.h_r**2
                M[p, p] += c
                M[p, idx(i - 1, k)] -= c
            c = a1[i, k] / g.h_r**2
            M[p, p] += c
            if i + 1 < nr - 1:
                M[p, idx(i + 1, k)] -= c
            if k > 0:
                c = a2[i, k - 1] / g.h_z**2
                M[p, p] += c
                M[p, idx(i, k - 1)] -= c
            if k < nz - 1:
                c = a2[i, k] / g.h_z**2
                M[p, p] += c
                M[p, idx(i, k + 1)] -= c
    return M


@pytest.fixture
def layered_acoustic():
    g = build_grid(1.0, 1.0, 8, 8)
    med = AcousticMedium(Layered((0.0, 0.4), (1.0, 3.0)), Layered((0.0, 0.7), (2.0, 1.0)))
    return g, med


def test_acoustic_matches_hand_assembly(layered_acoustic):
    g, med = layered_acoustic
    op = AcousticOperator.from_medium(g, med, 5.0)
    A = dense(op.apply, g.shape)
    ref = hand_assembled_acoustic(g, *sample_acoustic(med, g, 5.0))
    np.testing.assert_allclose(A, ref, rtol=1e-13, atol=1e-12)


def test_acoustic_symmetric_positive_definite(layered_acoustic):
    g, med = layered_acoustic
    A = dense(AcousticOperator.from_medium(g, med, 5.0).apply, g.shape)
    keep = interior(g.shape)
    Ai = A[np.ix_(keep, keep)]
    assert np.abs(Ai - Ai.T).max() <= 1e-12 * np.abs(Ai).max()
    assert np.linalg.eigvalsh(Ai).min() > 0


def test_acoustic_constant_field_sees_mass_only():
    g = build_grid(2.0, 1.0, 9, 7)
    op = AcousticOperator.from_medium(g, AcousticMedium(Constant(3.0), Constant(2.0)), 4.0)
    y = np.ones(g.shape)
    y[-1] = 0.0
    out = op.apply(y)
    # interior rows away from the Dirichlet neighbour reduce to w
    np.testing.assert_allclose(out[:-2], op.w[:-2], rtol=1e-13)


def test_acoustic_shape_check():
    g = build_grid(1.0, 1.0, 6, 6)
    op = AcousticOperator.from_medium(g, AcousticMedium(Constant(1.0), Constant(1.0)), 1.0)
    with pytest.raises(ValueError):
        op.apply(np.zeros((5, 6)))


def test_elastic_positive_definite_6x6():
    g = build_grid(60.0, 60.0, 6, 6)
    em = ElasticMedium.from_velocities(Layered((0.0, 25.0), (1500.0, 3000.0)),
                                       Layered((0.0, 25.0), (800.0, 1700.0)),
                                       Layered((0.0, 25.0), (1800.0, 2200.0)))
    op = ElasticOperator.from_medium(g, em, 600.0)
    E = dense(op.apply, op.shape)
    keep = interior(g.shape, 2)
    Ei = E[np.ix_(keep, keep)]
    sym = 0.5 * (Ei + Ei.T)
    assert np.linalg.eigvalsh(sym).min() > 0


def test_elastic_is_nonsymmetric_but_blocks_match_constant_preconditioner():
    from lagwave.precond import build_elastic_preconditioner

    g = build_grid(60.0, 60.0, 6, 6)
    em = ElasticMedium.from_velocities(Constant(3000.0), Constant(1700.0), Constant(2200.0))
    op = ElasticOperator.from_medium(g, em, 600.0)
    E = dense(op.apply, op.shape)
    K = dense(build_elastic_preconditioner(g, em, 600.0).apply, op.shape)
    n = g.N_r * g.N_z
    scale = np.abs(K).max()
    assert np.abs(E[:n, :n] - K[:n, :n]).max() <= 1e-12 * scale
    assert np.abs(E[n:, n:] - K[n:, n:]).max() <= 1e-12 * scale
    assert np.abs(E - E.T).max() > 1e-6 * scale


def test_elastic_needs_three_cells():
    g = build_grid(1.0, 1.0, 2, 4)
    em = ElasticMedium(Constant(1.0), Constant(1.0), Constant(1.0))
    with pytest.raises(ValueError):
        ElasticOperator.from_medium(g, em, 1.0)


def test_acoustic_mms_second_order():
    errs = [mms.acoustic_error(n) for n in (16, 32, 64)]
    assert 1.7 <= mms.observed_order(errs[1:]) <= 2.3


def test_elastic_mms_second_order():
    errs = [mms.elastic_error(n) for n in (32, 64)]
    assert 1.7 <= mms.observed_order(errs) <= 2.3


def test_monopole_load():
    g = build_grid(3.5, 3.5, 4, 4)
    phi = discretize_source(SourceSpec(SourceKind.MONOPOLE, 0.0, 0.0), g, 1.0)
    expected = np.zeros((4, 4))
    expected[0, 0] = -1.0 / (2 * math.pi * 0.5 * 1.0 * 1.0)
    np.testing.assert_array_equal(phi, expected)
    # the r-weighted cell integral equals the delta strength
    assert -(g.r[0] * phi[0, 0]) * g.h_r * g.h_z * 2 * math.pi == pytest.approx(1.0)


def test_source_linear_in_amplitude():
    g = build_grid(10.0, 10.0, 11, 11)
    s1 = SourceSpec("center_of_pressure", 0.0, 5.0, amplitude=1.0)
    s2 = SourceSpec("center_of_pressure", 0.0, 5.0, amplitude=2.5)
    np.testing.assert_array_equal(discretize_source(s2, g, 1.0, "elastic"),
                                  2.5 * discretize_source(s1, g, 1.0, "elastic"))


def test_center_of_pressure_structure():
    g = build_grid(10.0, 10.0, 11, 11)
    F = discretize_source(SourceSpec("center_of_pressure", 0.0, 5.0), g, 1.0, "elastic")
    j0 = g.nearest_cell(0.0, 5.0)[1]
    assert np.count_nonzero(F[0]) == 1 and F[0, 0, j0] != 0
    assert F[1, 0, j0 - 1] == -F[1, 0, j0 + 1] != 0
    assert np.count_nonzero(F[1]) == 2


def test_source_errors():
    g = build_grid(10.0, 10.0, 11, 11)
    with pytest.raises(ValueError):
        discretize_source(SourceSpec("monopole", 20.0, 0.0), g)
    with pytest.raises(ValueError):
        discretize_source(SourceSpec("center_of_pressure", 0.0, 0.0), g)
    with pytest.raises(ValueError):
        discretize_source(SourceSpec("center_of_pressure", 3.0, 5.0), g, physics="elastic")
    with pytest.raises(ValueError):
        discretize_source(SourceSpec("center_of_pressure", 0.0, 0.0), g, physics="elastic")


def test_rhs_first_harmonic_is_pure_source():
    g = build_grid(3.5, 3.5, 4, 4)
    unit = discretize_source(SourceSpec(), g)
    acc = ConvolutionAccumulators.zeros(9, g.shape)
    phi = build_acoustic_rhs(0, 0.7, unit, acc, np.ones(g.shape), 400.0)
    np.testing.assert_array_equal(phi, 0.7 * unit)


def test_rhs_tail_uses_accumulators():
    g = build_grid(3.5, 3.5, 4, 4)
    unit = np.zeros(g.shape)
    acc = ConvolutionAccumulators.zeros(9, g.shape)
    R0 = np.full(g.shape, 2.0)
    acc.step(R0, 0)
    rho = np.full(g.shape, 3.0)
    phi = build_acoustic_rhs(1, 0.0, unit, acc, rho, 10.0)
    # S_1 = w_0 R_0 and the tail is rho h^2 sqrt(1!/10!) sqrt(9!/0!) R_0
    np.testing.assert_allclose(phi, 3.0 * 100.0 * norm_factor(1, 9) * math.sqrt(math.factorial(9)) * R0)
    with pytest.raises(ValueError):
        build_acoustic_rhs(2, 0.0, unit, acc, rho, 10.0)
