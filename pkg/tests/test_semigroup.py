import math

import numpy as np
import pytest

from gribov_lab import (
    ConvergenceError,
    GribovParams,
    ParameterError,
    Truncation,
    build_diag_power,
    build_hamiltonian,
    build_interaction,
    matrix_exp,
)
from gribov_lab.fock_ops import falling_factorial
from gribov_lab.linalg import schatten_norm, singular_values
from gribov_lab.semigroup import (
    DYSON_CAP,
    diag_semigroup,
    dyson_block_generator,
    dyson_sum_report,
    dyson_term,
    dyson_terms,
    i1_closed_form,
    i2_bound_report,
    i2_remainder,
    loglog_slope,
    schatten_profile,
    trace_asymptotics_report,
    trotter_report,
)

from oracles import duhamel_first_order_by_quadrature, dyson_terms_by_cauchy

MILD = GribovParams(lambda_cubic=0.2, lambda_quartic=0.5, mu=0.3, lambda_triple=0.1)
FREE = GribovParams(lambda_cubic=1.0, lambda_quartic=1.0)


def _x(trunc, params):
    return params.lambda_cubic * falling_factorial(trunc.indices, 3)


def test_diag_semigroup_example():
    e = diag_semigroup(build_diag_power(Truncation(4), 3), 1.0, 1.0).entries
    np.testing.assert_allclose(np.diag(e), [1, 1, 1, math.exp(-6)], rtol=1e-15)


def test_diag_semigroup_kernel_trace():
    g = build_diag_power(Truncation(30), 3)
    traces = [np.trace(diag_semigroup(g, 1.0, t).entries).real for t in (0.01, 0.1, 1, 10, 100)]
    assert all(tr >= 3 for tr in traces)
    assert all(a >= b for a, b in zip(traces, traces[1:])) and traces[0] > traces[2]
    assert traces[-1] == pytest.approx(3.0, abs=1e-200)


def test_diag_semigroup_rejects_negative_time():
    with pytest.raises(ParameterError):
        diag_semigroup(build_diag_power(Truncation(4), 3), 1.0, -0.1)


def test_i1_matches_duhamel_quadrature():
    trunc = Truncation(10)
    for t in (0.05, 0.5):
        ref = duhamel_first_order_by_quadrature(
            _x(trunc, MILD), np.array(build_interaction(trunc, MILD).entries), t
        )
        np.testing.assert_allclose(i1_closed_form(t, trunc, MILD).entries, ref, atol=1e-12)


def test_i1_equal_eigenvalue_branch():
    # x_0 = x_1 = x_2 = 0: the diagonal entries at n <= 2 use the limit t*H
    trunc = Truncation(5)
    h = build_interaction(trunc, MILD).entries
    i1 = i1_closed_form(0.7, trunc, MILD).entries
    np.testing.assert_allclose(i1[:3, :3], 0.7 * h[:3, :3], rtol=1e-15)


def test_i1_trace_example():
    p = GribovParams(lambda_cubic=1.0, mu=1.0)
    tr = np.trace(i1_closed_form(1.0, Truncation(4), p).entries)
    assert tr.real == pytest.approx(3 + 3 * math.exp(-6), rel=1e-14)
    assert tr.real == pytest.approx(3.0074362565, rel=1e-10)


def test_i1_trace_identity_random_params(rng):
    for _ in range(5):
        p = GribovParams(lambda_cubic=rng.uniform(0.1, 2), mu=rng.uniform(0.01, 1), lambda_triple=rng.uniform(0, 1))
        trunc = Truncation(40)
        t = rng.uniform(1e-3, 1)
        tr = np.trace(i1_closed_form(t, trunc, p).entries)
        n = trunc.indices
        ref = t * np.sum(p.mu * n * np.exp(-t * _x(trunc, p)))
        assert abs(tr - ref) <= 1e-12 * abs(ref)


def test_i1_small_t_limit():
    p = GribovParams(lambda_cubic=1.0, mu=0.5)
    trunc = Truncation(8)
    target = np.sum(0.5 * trunc.indices)
    ratios = [schatten_norm(i1_closed_form(t, trunc, p), 1) / t for t in (1e-4, 1e-6, 1e-8)]
    assert abs(ratios[-1] - target) < 1e-5 * target
    assert abs(ratios[0] - target) > abs(ratios[-1] - target)


def test_i1_rejects_nonpositive_t():
    with pytest.raises(ParameterError):
        i1_closed_form(0.0, Truncation(4), MILD)


def test_dyson_k0_is_diag_semigroup():
    trunc = Truncation(8)
    s0 = dyson_term(0, 0.3, trunc, MILD)
    ref = diag_semigroup(build_diag_power(trunc, 3), MILD.lambda_cubic, 0.3)
    np.testing.assert_array_equal(s0.entries, ref.entries)


def test_dyson_k1_is_minus_i1():
    trunc = Truncation(12)
    t = 0.4
    ref = duhamel_first_order_by_quadrature(_x(trunc, MILD), np.array(build_interaction(trunc, MILD).entries), t)
    np.testing.assert_allclose(dyson_term(1, t, trunc, MILD).entries, -ref, atol=1e-12)


def test_dyson_terms_match_cauchy_oracle():
    trunc = Truncation(8)
    t = 0.3
    terms = dyson_terms(5, t, trunc, MILD)
    ref = dyson_terms_by_cauchy(_x(trunc, MILD), np.array(build_interaction(trunc, MILD).entries), t, 5)
    for k in range(6):
        np.testing.assert_allclose(terms[k].entries, ref[k], atol=1e-12)


def test_dyson_quadrature_agrees_with_exact():
    trunc = Truncation(6)
    for k in (1, 2, 3):
        exact = dyson_term(k, 0.2, trunc, MILD).entries
        quad = dyson_term(k, 0.2, trunc, MILD, quad_order=8, method="quadrature").entries
        np.testing.assert_allclose(quad, exact, atol=1e-11)


def test_dyson_quadrature_flags_stiff_window():
    p = GribovParams(lambda_cubic=1.0, mu=0.1, lambda_triple=0.05)
    with pytest.raises(ConvergenceError) as info:
        dyson_term(1, 1.0, Truncation(20), p, quad_order=4, method="quadrature")
    assert info.value.diagnostics["quad_order"] == 4


def test_dyson_zero_interaction():
    trunc = Truncation(8)
    for s in dyson_terms(4, 0.3, trunc, FREE)[1:]:
        assert not np.any(s.entries)
    assert all(d == 0 for _, d in dyson_sum_report(4, 0.3, trunc, FREE))


def test_dyson_sign_alternation():
    # mu = 0, pure triple coupling: the k-th term carries (-1)^k on its leading entry
    p = GribovParams(lambda_cubic=1.0, lambda_triple=0.1)
    terms = dyson_terms(4, 1e-3, Truncation(8), p)
    h = build_interaction(Truncation(8), p).entries
    for k in range(1, 5):
        lead = terms[k].entries[1 + k, 1]
        walk = np.prod([h[j + 1, j] for j in range(1, 1 + k)])
        ratio = lead / walk
        assert ratio.real * (-1) ** k > 0
        assert abs(ratio.imag) < 1e-6 * abs(ratio)


def test_dyson_block_generator_shape():
    b = dyson_block_generator(Truncation(3), MILD, 2)
    assert b.shape == (9, 9)
    assert not np.any(np.tril(b, -1))


def test_dyson_parameter_guards():
    trunc = Truncation(4)
    with pytest.raises(ParameterError):
        dyson_term(DYSON_CAP + 1, 0.1, trunc, MILD)
    with pytest.raises(ParameterError):
        dyson_term(1, 0.1, trunc, MILD, quad_order=3)
    with pytest.raises(ParameterError):
        dyson_term(1, 0.1, trunc, MILD, method="euler")
    with pytest.raises(ParameterError):
        dyson_term(6, 0.1, trunc, MILD, quad_order=8, method="quadrature")
    with pytest.raises(ParameterError):
        dyson_sum_report(0, 0.1, trunc, MILD)


def test_dyson_partial_sums_converge(p_star):
    rows = dyson_sum_report(8, 0.05, Truncation(32), p_star)
    ds = [d for _, d in rows]
    assert ds[-1] < 1e-6 and ds[-1] < ds[0]


def test_exact_split_identity():
    trunc = Truncation(16)
    for t in (0.01, 0.3):
        e = matrix_exp(build_hamiltonian(trunc, MILD), t).entries
        e0 = np.diag(np.exp(-t * _x(trunc, MILD)))
        i1 = i1_closed_form(t, trunc, MILD).entries
        i2 = i2_remainder(t, trunc, MILD)
        assert np.max(np.abs(e - e0 + i1 - i2)) < 1e-14
        # I2 is the second-order tail of the Dyson series
        tail = sum(s.entries for s in dyson_terms(12, t, trunc, MILD)[2:])
        np.testing.assert_allclose(i2, tail, atol=1e-12)


def test_i2_zero_without_interaction():
    i2, bound = i2_bound_report(0.1, Truncation(10), FREE)
    assert i2 == 0 and bound == 0


def test_i2_bound_guards():
    with pytest.raises(ParameterError):
        i2_bound_report(0.0, Truncation(10), MILD)
    with pytest.raises(ParameterError):
        i2_bound_report(0.1, Truncation(10), MILD, delta=0.4)


def test_i2_bound_holds(p_star):
    for t in (1e-3, 1e-2, 1e-1):
        i2, bound = i2_bound_report(t, Truncation(48), p_star)
        assert i2 <= bound


def test_asymptotics_rows(p_star):
    rows = trace_asymptotics_report([1e-3, 1e-2, 1e-1], Truncation(48), p_star)
    for r in rows:
        assert abs(r.full_gap - r.i1_trace_norm) <= r.i2_trace_norm + 1e-10
        assert r.power_shift == "G+I"
        assert r.delta == 0.5
    # trace and trace norm of I1 differ for the non-normal interaction
    assert any(abs(r.i1_trace - r.i1_trace_norm) > 1e-6 * r.i1_trace_norm for r in rows)


def test_full_gap_leading_slope_one():
    p = GribovParams(lambda_cubic=1.0, mu=0.1, lambda_triple=0.05)
    ts = np.logspace(-7, -5, 5)
    rows = trace_asymptotics_report(ts, Truncation(12), p)
    assert abs(loglog_slope(ts, [r.full_gap for r in rows]) - 1) < 0.02


def test_asymptotics_grid_guard():
    with pytest.raises(ParameterError):
        trace_asymptotics_report([0.1, 0.01], Truncation(8), MILD)
    with pytest.raises(ParameterError):
        trace_asymptotics_report([], Truncation(8), MILD)


def test_loglog_slope_of_power_law():
    x = np.logspace(-3, 0, 7)
    assert loglog_slope(x, 5 * x**2.5) == pytest.approx(2.5, rel=1e-12)


def test_trotter_zero_interaction():
    rep = trotter_report(1.0, [2, 4, 8], Truncation(12), FREE)
    assert all(d < 1e-14 for _, d in rep.rows)


def test_trotter_deviation_decreases(p_star):
    rep = trotter_report(1.0, [2, 4, 8, 16, 32], Truncation(32), p_star)
    ds = [d for _, d in rep.rows]
    assert all(a > b for a, b in zip(ds, ds[1:]))
    assert rep.constant > 0 and rep.residual >= 0
    assert len(rep.constants_by_n) == 5


def test_trotter_cubic_variant(p_star):
    rep = trotter_report(0.1, [2, 4, 8], Truncation(16), p_star, regularizer="cubic")
    ds = [d for _, d in rep.rows]
    assert ds[0] > ds[-1]


def test_trotter_guards(p_star):
    with pytest.raises(ParameterError):
        trotter_report(1.0, [4, 2], Truncation(8), p_star)
    with pytest.raises(ParameterError):
        trotter_report(1.0, [1, 2], Truncation(8), p_star)
    with pytest.raises(ParameterError):
        trotter_report(1.0, [2, 4], Truncation(8), p_star, regularizer="sextic")


def test_schatten_profile_g_semigroup():
    trunc = Truncation(60)
    ts = [0.01, 0.1, 1.0]
    table = schatten_profile(ts, [0.25, 1, 2], trunc, FREE)
    for p in (0.25, 1, 2):
        vals = [table[(t, p)] for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))
    assert np.isfinite(table[(0.1, 0.25)])
    x = falling_factorial(trunc.indices, 3)
    assert table[(0.1, 0.25)] == pytest.approx(np.sum(np.exp(-0.025 * x)) ** 4, rel=1e-12)


def test_h_semigroup_tail_decay(p_star):
    trunc = Truncation(64)
    s = singular_values(matrix_exp(build_hamiltonian(trunc, p_star), 0.1), ()).s_numbers
    n = np.arange(20, 33)
    assert np.all(s[20:33] < n.astype(float) ** -6)
    table = schatten_profile([0.1], [1], trunc, p_star, which="H-semigroup")
    assert table[(0.1, 1)] == pytest.approx(s.sum(), rel=1e-12)


def test_schatten_profile_guards():
    with pytest.raises(ParameterError):
        schatten_profile([0.0], [1], Truncation(4), FREE)
    with pytest.raises(ParameterError):
        schatten_profile([0.1], [1], Truncation(4), FREE, which="resolvent")
