"""Numerical checks of the operator inequalities behind the trace asymptotics.

Every inverse or fractional power of the singular operator G is taken of
the shift ``G + I``; ker G is spanned by e_0, e_1, e_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fock_ops import (
    Truncation,
    build_hamiltonian,
    build_interaction,
    falling_factorial,
)
from .linalg import eigen, matrix_exp, operator_norm, singular_values

DENSE_CAP = 2000


@dataclass
class BoundReport:
    epsilon: float
    constant: float
    trunc_dims: list
    constants_by_dim: list
    stabilized: bool
    kind: str = "relative"
    rel_tol: float = 0.01
    seed: int = 0
    n_starts: int = 32


def _unit(v):
    return v / np.linalg.norm(v, axis=0, keepdims=True)


def _relative_objective(h, g, phi):
    return np.linalg.norm(h @ phi, axis=0) - np.linalg.norm(g[:, None] * phi, axis=0)


def _relative_gradient(h, g, phi):
    hp = h @ phi
    gp = g[:, None] * phi
    nh = np.maximum(np.linalg.norm(hp, axis=0), 1e-300)
    ng = np.maximum(np.linalg.norm(gp, axis=0), 1e-300)
    return (h.conj().T @ hp) / nh - (g[:, None] * gp) / ng


def _form_objective(h, g, phi):
    q = np.einsum("ij,ij->j", phi.conj(), h @ phi)
    return np.abs(q) - np.real(np.einsum("ij,ij->j", phi.conj(), g[:, None] * phi))


def _form_gradient(h, g, phi):
    hp = h @ phi
    q = np.einsum("ij,ij->j", phi.conj(), hp)
    aq = np.maximum(np.abs(q), 1e-300)
    return (np.conj(q) * hp + q * (h.conj().T @ phi)) / aq - 2 * g[:, None] * phi


def _ascend(objective, gradient, h, g, phi, iters=1000, step0=None):
    """Projected gradient ascent on the unit sphere, one column per start.

    Each column keeps its own step size: accepted steps grow it, rejected
    steps halve it.
    """
    phi = _unit(phi.astype(complex))
    f = objective(h, g, phi)
    if step0 is None:
        step0 = 1.0 / max(np.abs(h).sum(axis=0).max(), np.abs(g).max(), 1.0)
    step = np.full(phi.shape[1], step0)
    for _ in range(iters):
        grad = gradient(h, g, phi)
        # tangent component: remove the radial part Re<phi, grad> phi
        radial = np.real(np.einsum("ij,ij->j", phi.conj(), grad))
        tangent = grad - radial * phi
        trial = _unit(phi + step * tangent)
        ft = objective(h, g, trial)
        better = ft > f
        phi = np.where(better, trial, phi)
        f = np.where(better, ft, f)
        step = np.where(better, step * 1.5, step * 0.5)
        if np.all(step < 1e-14 * step0):
            break
    return f, phi


def _sup_estimate(kind, epsilon, dim, params, n_starts, rng, warm=None):
    trunc = Truncation(dim)
    h = np.array(build_interaction(trunc, params).entries)
    g = epsilon * falling_factorial(trunc.indices, 3)
    if kind == "relative":
        obj, grad = _relative_objective, _relative_gradient
    else:
        obj, grad = _form_objective, _form_gradient
    starts = [np.eye(dim, dtype=complex)]
    if n_starts:
        # random starts concentrated on low modes, where the supremum lives
        decay = 1.0 / (1.0 + np.arange(dim))[:, None] ** 2
        z = rng.standard_normal((dim, n_starts)) + 1j * rng.standard_normal((dim, n_starts))
        starts.append(z * decay)
    if warm is not None:
        # nested windows: the previous maximiser, zero-padded, is feasible here
        pad = np.zeros((dim, 1), dtype=complex)
        pad[: len(warm), 0] = warm[:dim]
        starts.append(pad)
    phi0 = np.hstack(starts)
    f, phi = _ascend(obj, grad, h, g, phi0)
    best = int(np.argmax(f))
    return float(f[best]), phi[:, best]


def _bound(kind, epsilon, dims, params, n_starts, seed, rel_tol):
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    dims = [int(d) for d in dims]
    if not dims:
        raise ParameterError("dims must be non-empty")
    rng = np.random.default_rng(seed)
    consts = []
    warm = None
    for d in dims:
        c, warm = _sup_estimate(kind, epsilon, d, params, n_starts, rng, warm)
        consts.append(c)
    stabilized = len(consts) >= 2 and abs(consts[-1] - consts[-2]) <= rel_tol * (1 + abs(consts[-1]))
    return BoundReport(
        epsilon=epsilon, constant=consts[-1], trunc_dims=dims, constants_by_dim=consts,
        stabilized=bool(stabilized), kind=kind, rel_tol=rel_tol, seed=seed, n_starts=n_starts,
    )


def relative_bound(epsilon, dims, params, n_starts=32, seed=0, rel_tol=0.01):
    """Estimate ``C_eps = sup_|phi|=1 (||H phi|| - eps ||G phi||)`` per window."""
    return _bound("relative", epsilon, dims, params, n_starts, seed, rel_tol)


def form_bound(epsilon, dims, params, n_starts=32, seed=0, rel_tol=0.01):
    """Estimate ``sup_|phi|=1 (|<H phi, phi>| - eps <G phi, phi>)`` per window."""
    return _bound("form", epsilon, dims, params, n_starts, seed, rel_tol)


def bound_violations(report, params, n_samples=10_000, slack=1e-8, seed=1):
    """Count random unit vectors breaking the inequality certified by ``report``."""
    dim = report.trunc_dims[-1]
    trunc = Truncation(dim)
    h = np.array(build_interaction(trunc, params).entries)
    g = report.epsilon * falling_factorial(trunc.indices, 3)
    rng = np.random.default_rng(seed)
    count = 0
    for lo in range(0, n_samples, 2000):
        m = min(2000, n_samples - lo)
        phi = _unit(rng.standard_normal((dim, m)) + 1j * rng.standard_normal((dim, m)))
        # half the batch weighted towards low modes, where violations would show
        phi[:, : m // 2] = _unit(phi[:, : m // 2] / (1.0 + np.arange(dim))[:, None] ** 3)
        obj = _relative_objective if report.kind == "relative" else _form_objective
        count += int(np.sum(obj(h, g, phi) > report.constant + slack))
    return count


def accretivity_floor(trunc, params):
    """Smallest eigenvalue of the Hermitian part of ``lambda_cubic*G + H``."""
    params.require_accretive()
    m = build_hamiltonian(trunc, params, "cubic").entries
    herm = 0.5 * (m + m.conj().T)
    return float(eigen(herm, mode="hermitian", order="real").eigenvalues[0])


@dataclass
class SubordinationReport:
    delta: float
    rows: list
    trend: str


def subordination_norm(delta, dims, params, plateau_tol=0.01):
    """``||H (G+I)^-delta||`` per window and a plateau/growing verdict."""
    if not delta > 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    rows = []
    for d in dims:
        trunc = Truncation(int(d))
        h = build_interaction(trunc, params).entries
        pw = (falling_factorial(trunc.indices, 3) + 1.0) ** (-delta)
        rows.append((int(d), operator_norm(h * pw[None, :])))
    trend = "plateau"
    if len(rows) >= 2 and rows[-1][1] > (1 + plateau_tol) * rows[-2][1]:
        trend = "growing"
    return SubordinationReport(delta=delta, rows=rows, trend=trend)


@dataclass
class CarlemanFit:
    kind: str
    exponent: float | None
    r2: float | None
    violated_orders: list = field(default_factory=list)
    window: tuple = (20, 200)


def _fit_window_ok(window, dim):
    lo, hi = window
    if lo < 4 or hi <= lo or hi > dim // 2:
        raise ParameterError(
            f"fit window {window} must satisfy 4 <= lo < hi <= dim/2 = {dim // 2} (tail region)"
        )


def carleman_exponent_fit(kind, trunc, params, fit_window=(20, 200), t=0.1):
    """Decay of the s-numbers of shifted resolvents or semigroups.

    Resolvents ``(A+I)^-1``: least-squares slope of ``log s_n`` on ``log n``
    over the window (s-numbers indexed from n = 0). Semigroups: the orders
    p in 1..6 for which ``s_n <= n^-p`` fails somewhere in the window.
    """
    _fit_window_ok(fit_window, trunc.dim)
    if kind == "G-resolvent":
        x = falling_factorial(trunc.indices, 3) + 1.0
        s = np.sort(1.0 / x)[::-1]
    elif kind == "H-resolvent":
        m = build_hamiltonian(trunc, params, "cubic").entries + np.eye(trunc.dim)
        s = singular_values(np.linalg.inv(m), ()).s_numbers
    elif kind == "G-semigroup":
        s = np.sort(np.exp(-t * falling_factorial(trunc.indices, 3)))[::-1]
    elif kind == "H-semigroup":
        s = singular_values(matrix_exp(build_hamiltonian(trunc, params, "cubic"), t), ()).s_numbers
    else:
        raise ParameterError(f"unknown operator kind {kind!r}")
    lo, hi = fit_window
    n = np.arange(lo, hi + 1)
    tail = s[lo: hi + 1]
    if kind.endswith("resolvent"):
        coef = np.polyfit(np.log(n), np.log(tail), 1)
        pred = np.polyval(coef, np.log(n))
        resid = np.log(tail) - pred
        r2 = 1 - float(resid @ resid) / float(np.sum((np.log(tail) - np.log(tail).mean()) ** 2))
        return CarlemanFit(kind=kind, exponent=float(coef[0]), r2=r2, window=tuple(fit_window))
    violated = [p for p in range(1, 7) if np.any(tail > n.astype(float) ** (-p))]
    return CarlemanFit(kind=kind, exponent=None, r2=None, violated_orders=violated, window=tuple(fit_window))


def auto_dim(t, factor=4.0):
    """Window large enough that the maximiser of ``x exp(-x)`` is interior."""
    return int(math.ceil(factor * (1.0 / t) ** (1.0 / 3.0))) + 8


@dataclass
class SmallTRow:
    t: float
    dim: int
    scaled_generator_norm: float
    scaled_trace_norm: float
    trace_norm: float


def small_t_limits(t_grid, params=None, dense_cap=DENSE_CAP):
    """``t*||G exp(-tG)||`` and ``t^(1/3)*(||exp(-tG)||_1 - 3)`` per t.

    Both operators are diagonal and nonnegative, so the norms are a max and
    a sum over the window. ``params`` is accepted for interface symmetry;
    these quantities involve G alone.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(not t > 0 for t in t_grid):
        raise ParameterError("t_grid must contain positive values")
    rows = []
    for t in t_grid:
        dim = auto_dim(t)
        if dim > dense_cap:
            raise ParameterError(f"t={t} needs dim {dim} above the dense cap {dense_cap}")
        x = falling_factorial(np.arange(dim, dtype=float), 3)
        e = np.exp(-t * x)
        tr = float(e.sum())
        rows.append(SmallTRow(
            t=t, dim=dim,
            scaled_generator_norm=float(np.max(t * x * e)),
            scaled_trace_norm=t ** (1.0 / 3.0) * (tr - 3.0),
            trace_norm=tr,
        ))
    return rows
