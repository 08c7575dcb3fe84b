import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gribov_lab import (
    FockMatrix,
    GribovParams,
    ParameterError,
    Truncation,
    build_diag_power,
    build_hamiltonian,
    build_interaction,
    build_ladder,
    restrict_subspace,
)

couplings = st.floats(min_value=-5, max_value=5, allow_nan=False)


def test_annihilation_superdiagonal():
    a = build_ladder(Truncation(3), "annihilation").entries
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    expected[1, 2] = math.sqrt(2)
    np.testing.assert_array_equal(a, expected)


def test_creation_is_transpose():
    a = build_ladder(Truncation(3), "annihilation").entries
    c = build_ladder(Truncation(3), "creation").entries
    np.testing.assert_array_equal(c, a.T)


def test_ladder_offset_shifts_labels():
    a = build_ladder(Truncation(4, offset=1), "annihilation")
    np.testing.assert_allclose(np.diag(a.entries, 1), np.sqrt([2, 3, 4]))
    assert a.offset == 1


def test_truncated_commutator():
    # [a, a*] = I except in the top corner, where the window cuts the ladder
    n = 6
    a = build_ladder(Truncation(n), "annihilation").entries
    c = build_ladder(Truncation(n), "creation").entries
    comm = a @ c - c @ a
    expected = np.eye(n)
    expected[-1, -1] = 1 - n
    np.testing.assert_allclose(comm, expected, atol=1e-12)


def test_ladder_rejects_unknown_kind():
    with pytest.raises(ParameterError):
        build_ladder(Truncation(4), "raising")


@pytest.mark.parametrize(
    "order,trunc,expected",
    [
        (3, Truncation(5), [0, 0, 0, 6, 24]),
        (2, Truncation(5), [0, 0, 2, 6, 12]),
        (3, Truncation(3, offset=1), [0, 0, 6]),
    ],
)
def test_diag_power(order, trunc, expected):
    m = build_diag_power(trunc, order)
    np.testing.assert_array_equal(m.entries, np.diag(expected))
    assert np.all(np.imag(m.entries) == 0)


def test_diag_power_matches_ladder_products():
    n = 10
    a = build_ladder(Truncation(n + 3), "annihilation").entries
    c = a.T
    g = np.linalg.matrix_power(c, 3) @ np.linalg.matrix_power(a, 3)
    np.testing.assert_allclose(g[:n, :n], build_diag_power(Truncation(n), 3).entries, atol=1e-9)


@pytest.mark.parametrize("order", [0, 4, -1])
def test_diag_power_rejects_order(order):
    with pytest.raises(ParameterError):
        build_diag_power(Truncation(5), order)


def test_interaction_column_one():
    h = build_interaction(Truncation(4), GribovParams(mu=1.0, lambda_triple=1.0)).entries
    assert h[1, 1] == 1
    assert h[2, 1] == pytest.approx(1j * math.sqrt(2))
    assert h[0, 1] == 0


def test_interaction_column_two():
    h = build_interaction(Truncation(5), GribovParams(mu=1.0, lambda_triple=1.0)).entries
    assert h[1, 2] == pytest.approx(1j * math.sqrt(2))
    assert h[2, 2] == 2
    assert h[3, 2] == pytest.approx(2j * math.sqrt(3))


def test_interaction_without_triple_coupling_is_real_diagonal():
    h = build_interaction(Truncation(6), GribovParams(mu=0.7)).entries
    np.testing.assert_array_equal(h, np.diag(0.7 * np.arange(6)))


def test_interaction_matches_ladder_expression():
    # mu a*a + i lam a*(a + a*)a on a window large enough to avoid edge effects
    p = GribovParams(mu=0.3, lambda_triple=0.2)
    big = Truncation(14)
    a = build_ladder(big, "annihilation").entries
    c = a.T
    ref = p.mu * c @ a + 1j * p.lambda_triple * c @ (a + c) @ a
    n = 10
    np.testing.assert_allclose(build_interaction(Truncation(n), p).entries, ref[:n, :n], atol=1e-12)


def test_e0_is_null_vector():
    h = build_hamiltonian(Truncation(8), GribovParams(1.0, 1.0, 0.5, 0.3)).entries
    assert not np.any(h[:, 0]) and not np.any(h[0, :])


@pytest.mark.parametrize(
    "params,reg,dim,expected",
    [
        (GribovParams(lambda_cubic=1, mu=1), "cubic", 5, [0, 1, 2, 9, 28]),
        (GribovParams(), "cubic", 5, [0, 0, 0, 0, 0]),
        (GribovParams(lambda_quartic=1), "quartic", 4, [0, 0, 2, 6]),
    ],
)
def test_hamiltonian_diagonal_cases(params, reg, dim, expected):
    m = build_hamiltonian(Truncation(dim), params, reg)
    np.testing.assert_array_equal(m.entries, np.diag(expected))


def test_hamiltonian_none_is_interaction():
    p = GribovParams(2.0, 3.0, 0.4, 0.1)
    np.testing.assert_array_equal(
        build_hamiltonian(Truncation(7), p, "none").entries, build_interaction(Truncation(7), p).entries
    )


def test_hamiltonian_rejects_unknown_regularizer():
    with pytest.raises(ParameterError):
        build_hamiltonian(Truncation(5), GribovParams(), "sextic")


def test_restrict_subspace_gives_e0_representation():
    p = GribovParams(mu=0.4, lambda_triple=0.3)
    full = build_interaction(Truncation(9), p)
    sub = restrict_subspace(full, 1)
    direct = build_interaction(Truncation(8, offset=1), p)
    np.testing.assert_array_equal(sub.entries, direct.entries)
    assert sub.offset == 1


def test_restrict_zero_is_identity():
    m = build_interaction(Truncation(5), GribovParams(mu=1, lambda_triple=1))
    r = restrict_subspace(m, 0)
    np.testing.assert_array_equal(r.entries, m.entries)
    assert r.offset == m.offset


def test_restrict_g_drop_three():
    r = restrict_subspace(build_diag_power(Truncation(6), 3), 3)
    np.testing.assert_array_equal(r.entries, np.diag([6, 24, 60]))
    assert r.offset == 3


def test_restrict_rejects_full_drop():
    with pytest.raises(ParameterError):
        restrict_subspace(build_diag_power(Truncation(4), 3), 4)


def test_fock_matrix_is_read_only():
    m = build_interaction(Truncation(4), GribovParams(mu=1))
    with pytest.raises(ValueError):
        m.entries[0, 0] = 1.0


def test_fock_matrix_rejects_nonfinite():
    with pytest.raises(ParameterError):
        FockMatrix(np.array([[np.nan]]))


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), "1.0", True])
def test_params_reject_bad_values(bad):
    with pytest.raises(ParameterError):
        GribovParams(mu=bad)


def test_accretive_hypotheses():
    GribovParams(lambda_cubic=0.0, mu=0.1).require_accretive()
    with pytest.raises(ParameterError, match="mu"):
        GribovParams(mu=-1.0).require_accretive()
    with pytest.raises(ParameterError, match="lambda_cubic"):
        GribovParams(lambda_cubic=-1.0, mu=1.0).require_accretive()


@pytest.mark.parametrize("dim,offset", [(0, 0), (5, 2), (5, -1)])
def test_truncation_validation(dim, offset):
    with pytest.raises(ParameterError):
        Truncation(dim, offset)


@settings(max_examples=50, deadline=None)
@given(mu=couplings, lam=couplings, l3=couplings, dim=st.integers(2, 40), offset=st.integers(0, 1))
def test_interaction_complex_symmetric(mu, lam, l3, dim, offset):
    p = GribovParams(lambda_cubic=l3, mu=mu, lambda_triple=lam)
    h = build_interaction(Truncation(dim, offset), p).entries
    np.testing.assert_array_equal(h, h.T)
    h3 = build_hamiltonian(Truncation(dim, offset), p).entries
    np.testing.assert_array_equal(h3, h3.T)
    assert not np.any(np.triu(h3, 2))


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(min_value=1e-3, max_value=5), mu=couplings)
def test_interaction_not_normal(lam, mu):
    h = build_interaction(Truncation(8), GribovParams(mu=mu, lambda_triple=lam)).entries
    assert np.max(np.abs(h - h.conj().T)) > 0


def test_offdiagonal_growth_rate():
    lam = 0.7
    n = 100
    h = build_interaction(Truncation(n + 2), GribovParams(lambda_triple=lam)).entries
    ratio = abs(h[n + 1, n]) / (lam * n**1.5)
    assert abs(ratio - 1) < 0.01


def test_diagonal_growth_rate():
    # G_nn / n^3 = (1 - 1/n)(1 - 2/n): about 0.970 at n = 100, within 1% from n = 300
    g = np.diag(build_diag_power(Truncation(401), 3).entries).real
    assert g[100] / 100**3 == pytest.approx((1 - 1 / 100) * (1 - 2 / 100), rel=1e-14)
    assert abs(g[300] / 300**3 - 1) < 0.01
    assert abs(g[400] / 400**3 - 1) < abs(g[300] / 300**3 - 1)
