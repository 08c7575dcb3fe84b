"""Semigroups of the regularized Gribov operator and their perturbative pieces.

Notation: ``x_n = lambda_cubic * n(n-1)(n-2)`` are the eigenvalues of the
unperturbed generator, ``H`` is the tridiagonal interaction and
``I1(t) = int_0^t exp(-(t-s)x) H exp(-s x) ds``. The once-iterated Duhamel
identity reads ``exp(-tH3) = exp(-t x) - I1(t) + I2(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ParameterError
from .fock_ops import (
    FockMatrix,
    build_diag_power,
    build_hamiltonian,
    build_interaction,
    falling_factorial,
)
from .linalg import matrix_exp, operator_norm, schatten_norm, singular_values

DYSON_CAP = 12
QUAD_EVAL_BUDGET = 200_000


def diag_semigroup(g, scale, t):
    """``exp(-t*scale*G)`` for diagonal G, entrywise exact."""
    if not t >= 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    x = np.real(g.diagonal())
    return FockMatrix(np.diag(np.exp(-t * scale * x)), g.offset)


def _unperturbed(trunc, params):
    return params.lambda_cubic * falling_factorial(trunc.indices, 3)


def _exp_divided_difference(x, t):
    """``K[m,n] = int_0^t exp(-(t-s) x_m - s x_n) ds`` without cancellation."""
    lo = np.minimum(x[:, None], x[None, :])
    gap = np.abs(x[:, None] - x[None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(gap * t < 1e-300, t, -np.expm1(-t * gap) / np.where(gap == 0, 1.0, gap))
    return np.exp(-t * lo) * phi


def i1_closed_form(t, trunc, params):
    """Entrywise analytic value of ``I1(t)`` (tridiagonal)."""
    if not t > 0:
        raise ParameterError(f"t must be > 0, got {t}")
    x = _unperturbed(trunc, params)
    h = build_interaction(trunc, params).entries
    return FockMatrix(h * _exp_divided_difference(x, t), trunc.offset)


def dyson_block_generator(trunc, params, k_max):
    """Block upper-bidiagonal generator whose exponential holds all Dyson terms.

    ``exp(-t B)`` has ``S_k(t)`` in block position ``(0, k)``.
    """
    n = trunc.dim
    g = np.diag(_unperturbed(trunc, params)).astype(complex)
    h = np.array(build_interaction(trunc, params).entries)
    b = np.zeros(((k_max + 1) * n, (k_max + 1) * n), dtype=complex)
    for i in range(k_max + 1):
        b[i * n:(i + 1) * n, i * n:(i + 1) * n] = g
        if i < k_max:
            b[i * n:(i + 1) * n, (i + 1) * n:(i + 2) * n] = h
    return b


def dyson_terms(k_max, t, trunc, params):
    """``[S_0(t), ..., S_kmax(t)]`` from one block-triangular exponential."""
    if k_max < 0 or k_max > DYSON_CAP:
        raise ParameterError(f"k must lie in 0..{DYSON_CAP}, got {k_max}")
    if not t >= 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    n = trunc.dim
    e = scipy.linalg.expm(-t * dyson_block_generator(trunc, params, k_max))
    return [FockMatrix(e[:n, k * n:(k + 1) * n], trunc.offset) for k in range(k_max + 1)]


def _simplex_quadrature(k, t, x, h, order):
    """Iterated Gauss-Legendre over ``0 <= t_k <= ... <= t_1 <= t``.

    Level j integrates ``exp(-(tau - u) x) H R(u)`` over ``u in [0, tau]``
    with the nodes mapped to ``[0, tau]``, recursing into R.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights

    def level(depth, tau):
        if depth == k:
            return np.diag(np.exp(-tau * x))
        acc = np.zeros((len(x), len(x)), dtype=complex)
        for uq, wq in zip(u, w):
            s = tau * uq
            inner = level(depth + 1, s)
            acc += wq * (np.exp(-(tau - s) * x)[:, None] * (h @ inner))
        return tau * acc

    return level(0, t)


def dyson_term(k, t, trunc, params, quad_order=8, method="exact", tol=1e-10):
    """``S_k(t)``, the k-th successive approximation of ``exp(-tH3)``.

    ``method='exact'`` reads the term off a block-triangular exponential.
    ``method='quadrature'`` uses iterated Gauss-Legendre on the simplex and
    certifies it by doubling ``quad_order``; it is only practical for small
    k and mildly stiff windows (``t * max x`` of order 100 or less).
    """
    if k < 0 or k > DYSON_CAP:
        raise ParameterError(f"k must lie in 0..{DYSON_CAP}, got {k}")
    if quad_order < 4:
        raise ParameterError(f"quad_order must be >= 4, got {quad_order}")
    if k == 0:
        return diag_semigroup(build_diag_power(trunc, 3), params.lambda_cubic, t)
    if method == "exact":
        return dyson_terms(k, t, trunc, params)[k]
    if method != "quadrature":
        raise ParameterError(f"method must be 'exact' or 'quadrature', got {method!r}")
    if (2 * quad_order) ** k > QUAD_EVAL_BUDGET:
        raise ParameterError(
            f"quadrature needs {(2 * quad_order) ** k} leaf evaluations; budget is {QUAD_EVAL_BUDGET}"
        )
    x = _unperturbed(trunc, params)
    h = np.array(build_interaction(trunc, params).entries)
    sign = (-1) ** k
    coarse = sign * _simplex_quadrature(k, t, x, h, quad_order)
    fine = sign * _simplex_quadrature(k, t, x, h, 2 * quad_order)
    change = float(np.max(np.abs(fine - coarse)))
    scale = max(float(np.max(np.abs(fine))), 1e-300)
    if change > tol * max(scale, 1.0):
        raise ConvergenceError(
            "simplex quadrature did not converge under order doubling",
            {"k": k, "t": t, "quad_order": quad_order, "change": change, "scale": scale},
        )
    return FockMatrix(fine, trunc.offset)


def dyson_sum_report(K, t, trunc, params):
    """``[(k, ||sum_{j<=k} S_j(t) - exp(-tH3)||_1) for k in 0..K]``."""
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    terms = dyson_terms(K, t, trunc, params)
    target = matrix_exp(build_hamiltonian(trunc, params, "cubic"), t).entries
    partial = np.zeros_like(target)
    rows = []
    for k, s in enumerate(terms):
        partial = partial + s.entries
        rows.append((k, schatten_norm(partial - target, 1)))
    return rows


def _shifted_power(trunc, delta):
    return (falling_factorial(trunc.indices, 3) + 1.0) ** delta


def i2_remainder(t, trunc, params):
    """``exp(-tH3) - exp(-t x) + I1(t)``, the double-integral remainder."""
    h3 = build_hamiltonian(trunc, params, "cubic")
    e = matrix_exp(h3, t).entries
    e0 = np.diag(np.exp(-t * _unperturbed(trunc, params)))
    return e - e0 + i1_closed_form(t, trunc, params).entries


def i2_bound_report(t, trunc, params, delta=0.5):
    """Trace norm of the I2 remainder and its subordination bound.

    The bound is ``||H (G+I)^-delta||^2 * t^2 * w`` where ``w`` is the larger
    of ``||(G+I)^delta exp(-(t/3) x)||_1`` and the same weight with the full
    semigroup ``exp(-(t/3) H3)``: the integration variable whose interval
    exceeds t/3 may sit on either kind of factor.
    """
    if not t > 0:
        raise ParameterError(f"t must be > 0, got {t}")
    if delta < 0.5:
        raise ParameterError(f"delta must be >= 1/2, got {delta}")
    i2 = schatten_norm(i2_remainder(t, trunc, params), 1)
    return i2, _i2_bound(t, trunc, params, delta)


def _i2_bound(t, trunc, params, delta):
    pw = _shifted_power(trunc, delta)
    h = build_interaction(trunc, params).entries
    sub = operator_norm(h / pw[None, :])
    w_g = float(np.sum(pw * np.exp(-(t / 3) * _unperturbed(trunc, params))))
    e_h = matrix_exp(build_hamiltonian(trunc, params, "cubic"), t / 3).entries
    w_h = schatten_norm(pw[:, None] * e_h, 1)
    return sub**2 * t**2 * max(w_g, w_h)


@dataclass
class AsymptoticsRow:
    t: float
    full_gap: float
    i1_trace_norm: float
    i1_trace: float
    first_order: float
    i2_trace_norm: float
    i2_bound: float
    weight: float
    delta: float
    power_shift: str = "G+I"


def trace_asymptotics_report(t_grid, trunc, params, delta=0.5):
    """One :class:`AsymptoticsRow` per t of the small-time expansion."""
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(t <= 0 for t in t_grid) or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ParameterError("t_grid must be positive and strictly ascending")
    x = _unperturbed(trunc, params)
    h = build_interaction(trunc, params).entries
    h3 = build_hamiltonian(trunc, params, "cubic")
    rows = []
    for t in t_grid:
        e0 = np.exp(-t * x)
        e = matrix_exp(h3, t).entries
        i1 = h * _exp_divided_difference(x, t)
        i2 = e - np.diag(e0) + i1
        # (lambda_cubic G)^delta needs no shift: positive powers vanish on ker G
        weight = float(np.sum(np.abs(x) ** delta * np.exp(-(t / 3) * x)))
        rows.append(AsymptoticsRow(
            t=t,
            full_gap=schatten_norm(e - np.diag(e0), 1),
            i1_trace_norm=schatten_norm(i1, 1),
            i1_trace=abs(complex(np.trace(i1))),
            first_order=t * schatten_norm(e0[:, None] * h, 1),
            i2_trace_norm=schatten_norm(i2, 1),
            i2_bound=_i2_bound(t, trunc, params, delta),
            weight=weight,
            delta=delta,
        ))
    return rows


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


@dataclass
class TrotterReport:
    t: float
    regularizer: str
    rows: list
    constant: float
    residual: float
    constants_by_n: list = field(default_factory=list)

    def top_octave_spread(self):
        """Relative spread of ``dev*n/log n`` over ``n >= n_max/2``."""
        n_max = max(n for n, _ in self.rows)
        cs = [c for (n, _), c in zip(self.rows, self.constants_by_n) if n >= n_max / 2]
        return (max(cs) - min(cs)) / max(cs) if max(cs) > 0 else 0.0


def trotter_report(t, n_list, trunc, params, regularizer="quartic"):
    """Trace-norm error of the Trotter product against ``exp(-tH)``.

    The regularizer (``lambda_quartic*S`` or ``lambda_cubic*G``) and the
    interaction are exponentiated separately; the deviations are fitted to
    ``C log n / n``.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 2 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("n_list must be strictly ascending integers >= 2")
    if regularizer == "quartic":
        reg = params.lambda_quartic * falling_factorial(trunc.indices, 2)
    elif regularizer == "cubic":
        reg = params.lambda_cubic * falling_factorial(trunc.indices, 3)
    else:
        raise ParameterError(f"regularizer must be 'quartic' or 'cubic', got {regularizer!r}")
    h = build_interaction(trunc, params)
    target = matrix_exp(build_hamiltonian(trunc, params, regularizer), t).entries
    rows = []
    for n in n_list:
        step = np.exp(-(t / n) * reg)[:, None] * matrix_exp(h, t / n).entries
        rows.append((n, schatten_norm(np.linalg.matrix_power(step, n) - target, 1)))
    xs = np.array([math.log(n) / n for n in n_list])
    ys = np.array([d for _, d in rows])
    c = float(xs @ ys / (xs @ xs))
    return TrotterReport(
        t=t,
        regularizer=regularizer,
        rows=rows,
        constant=c,
        residual=float(np.linalg.norm(ys - c * xs)),
        constants_by_n=(ys / xs).tolist(),
    )


def schatten_profile(t_list, p_list, trunc, params, which="G-semigroup"):
    """``{(t, p): ||semigroup(t)||_p}`` for the G or the full semigroup."""
    if any(not t > 0 for t in t_list) or any(not p > 0 for p in p_list):
        raise ParameterError("all t and p must be > 0")
    table = {}
    for t in t_list:
        if which == "G-semigroup":
            m = diag_semigroup(build_diag_power(trunc, 3), 1.0, t)
        elif which == "H-semigroup":
            m = matrix_exp(build_hamiltonian(trunc, params, "cubic"), t)
        else:
            raise ParameterError(f"which must be 'G-semigroup' or 'H-semigroup', got {which!r}")
        report = singular_values(m, tuple(p_list))
        for p in p_list:
            table[(t, p)] = report.p_norms[p]
    return table
