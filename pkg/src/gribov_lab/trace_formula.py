"""Both sides of the regularized trace formula for ``lambda_cubic*G + H``.

Left side: ``sum_{k<=n} (sigma_k - lambda_cubic*lambda_k)`` over the
eigenvalues inside the circle of radius ``r_n``. Right side:

    -1/(2 pi i) * contour integral of
        sum_{j=1..4} (-1)^(j-1)/j * Tr[(H (lambda_cubic*G - sigma)^-1)^j] dsigma

evaluated with the trapezoidal rule on the circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ParameterError, PoleProximityError
from .fock_ops import Truncation, build_hamiltonian, falling_factorial, interaction_bands
from .linalg import eigen, polish_tridiagonal

DEFAULT_NODES = 512
MIN_NODES = 64
TAIL_TOL = 1e-14


def _lam(n):
    return n * (n - 1) * (n - 2)


@dataclass(frozen=True)
class ContourSpec:
    index: int
    radius: float
    nodes: int = DEFAULT_NODES
    center: complex = 0j
    scale: float = 1.0

    def __post_init__(self):
        if self.index < 2:
            raise ParameterError(
                f"contour index must be >= 2 (the three zero modes cannot be separated), got {self.index}"
            )
        if self.nodes < MIN_NODES:
            raise ParameterError(f"nodes must be >= {MIN_NODES}, got {self.nodes}")
        if self.center != 0:
            raise ParameterError("contours are centred at the origin")
        lo = self.scale * _lam(self.index)
        hi = self.scale * _lam(self.index + 1)
        if not lo < self.radius < hi:
            raise ParameterError(f"radius {self.radius} must lie strictly between {lo} and {hi}")
        margin = 0.25 * (hi - lo)
        if min(self.radius - lo, hi - self.radius) < margin:
            raise ParameterError(f"radius {self.radius} is closer than {margin} to an unperturbed eigenvalue")

    def points(self, nodes=None):
        """Quadrature nodes sigma_q and weights d sigma_q on the circle."""
        m = self.nodes if nodes is None else nodes
        theta = 2 * np.pi * np.arange(m) / m
        sigma = self.center + self.radius * np.exp(1j * theta)
        return sigma, 1j * (sigma - self.center) * (2 * np.pi / m)


def contour_for_index(n, params, nodes=DEFAULT_NODES):
    """Circle midway between ``lambda_cubic*lambda_n`` and the next eigenvalue."""
    if n < 2:
        raise ParameterError(
            f"n must be >= 2: lambda_0 = lambda_1 = lambda_2 = 0 cannot be separated by a circle (got {n})"
        )
    if not params.lambda_cubic > 0:
        raise ParameterError(f"lambda_cubic must be > 0 for the contours to grow, got {params.lambda_cubic}")
    r = params.lambda_cubic * (_lam(n) + _lam(n + 1)) / 2
    return ContourSpec(index=n, radius=r, nodes=nodes, scale=params.lambda_cubic)


def _band_product(a, b):
    """Product of two banded batches stored as ``{offset: array(..., N)}``.

    ``a[k][..., i]`` holds ``A[i, i+k]`` (zero-padded where the index leaves
    the matrix).
    """
    n = next(iter(a.values())).shape[-1]
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = ka + kb
            # C[i, i+k] += A[i, i+ka] * B[i+ka, i+ka+kb]
            shifted = np.zeros_like(vb)
            if ka >= 0:
                shifted[..., : n - ka] = vb[..., ka:]
            else:
                shifted[..., -ka:] = vb[..., : n + ka]
            term = va * shifted
            out[k] = out[k] + term if k in out else term
    return out


def _hr_bands(sigmas, trunc, params):
    """Bands of ``H R(sigma)`` for a batch of spectral parameters."""
    diag, off = interaction_bands(trunc, params)
    x = params.lambda_cubic * falling_factorial(trunc.indices, 3)
    den = x[None, :] - np.asarray(sigmas)[:, None]
    scale = np.maximum(1.0, np.abs(sigmas))[:, None]
    close = np.abs(den) <= 1e-8 * scale
    if np.any(close):
        q, i = np.argwhere(close)[0]
        raise PoleProximityError(f"sigma={sigmas[q]} hits the unperturbed eigenvalue {x[i]} (index {i})")
    r = 1.0 / den
    n = trunc.dim
    up = np.zeros_like(r)
    lo = np.zeros_like(r)
    # (HR)[i, i+1] = H[i, i+1] r[i+1];  (HR)[i, i-1] = H[i, i-1] r[i-1]
    up[:, : n - 1] = off[None, :] * r[:, 1:]
    lo[:, 1:] = off[None, :] * r[:, : n - 1]
    return {-1: lo, 0: diag[None, :] * r, 1: up}


def correction_traces(sigmas, trunc, params, jmax=4):
    """``Tr[(H R(sigma))^j]`` for j = 1..jmax; shape ``(len(sigmas), jmax)``.

    Also returns, per j, the largest modulus of the last diagonal entry of
    ``(HR)^j`` relative to the trace, the truncation tail indicator.
    """
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=complex))
    base = _hr_bands(sigmas, trunc, params)
    power = base
    traces = np.empty((len(sigmas), jmax), dtype=complex)
    tails = np.empty(jmax)
    for j in range(1, jmax + 1):
        if j > 1:
            power = _band_product(power, base)
        d = power[0]
        traces[:, j - 1] = d.sum(axis=1)
        ref = np.maximum(np.abs(traces[:, j - 1]), 1e-300)
        tails[j - 1] = float(np.max(np.abs(d[:, -1]) / ref))
    return traces, tails


def correction_integrand(sigma, j, trunc, params, adaptive=False, tail_tol=TAIL_TOL, max_dim=4096):
    """``Tr[(H (lambda_cubic*G - sigma)^-1)^j]`` at one spectral parameter.

    With ``adaptive=True`` the window is doubled until the last diagonal
    entry of ``(HR)^j`` is below ``tail_tol`` times the partial trace.
    """
    if not 1 <= j <= 6:
        raise ParameterError(f"j must lie in 1..6, got {j}")
    while True:
        traces, tails = correction_traces([sigma], trunc, params, j)
        if not adaptive or tails[j - 1] < tail_tol:
            return complex(traces[0, j - 1])
        if 2 * trunc.dim > max_dim:
            raise ConvergenceError(
                "integrand trace did not settle before the dimension cap",
                {"dim": trunc.dim, "tail": tails[j - 1], "tail_tol": tail_tol},
            )
        trunc = Truncation(2 * trunc.dim, trunc.offset)


def _contour_terms(c, trunc, params, jmax, nodes=None):
    sigma, dsigma = c.points(nodes)
    traces, _ = correction_traces(sigma, trunc, params, jmax)
    coeff = np.array([(-1) ** (j - 1) / j for j in range(1, jmax + 1)])
    integrals = (traces * dsigma[:, None]).sum(axis=0)
    return -coeff * integrals / (2j * np.pi)


def rhs_contour_sum(c, trunc, params, jmax=4, check_nodes=False, rtol=1e-10):
    """Trapezoidal contour integral; returns ``(total, per_j)``.

    ``per_j[j-1]`` is the contribution of the j-th correction. With
    ``check_nodes=True`` the node count is doubled and a relative change
    above ``rtol`` raises :class:`ConvergenceError`.
    """
    if not 1 <= jmax <= 6:
        raise ParameterError(f"jmax must lie in 1..6, got {jmax}")
    if trunc.offset != 0:
        raise ParameterError("the trace formula is stated on the full basis (offset 0)")
    per_j = _contour_terms(c, trunc, params, jmax)
    total = complex(per_j.sum())
    if check_nodes:
        fine = complex(_contour_terms(c, trunc, params, jmax, 2 * c.nodes).sum())
        change = abs(fine - total)
        if change > rtol * max(1.0, abs(fine)):
            raise ConvergenceError(
                "contour quadrature changed under node doubling",
                {"index": c.index, "nodes": c.nodes, "change": change},
            )
    return total, per_j


def lhs_eigen_sum(c, trunc, params):
    """``(sum of sigma_k - lambda_cubic*lambda_k inside the circle, count)``.

    The eigenvalues inside the contour are Newton-polished on the
    tridiagonal Hamiltonian before summation.
    """
    if trunc.offset != 0:
        raise ParameterError("the trace formula is stated on the full basis (offset 0)")
    if trunc.dim < 4 * (c.index + 1):
        raise ParameterError(f"dim must be >= 4*(n+1) = {4 * (c.index + 1)}, got {trunc.dim}")
    h3 = build_hamiltonian(trunc, params, "cubic")
    values = eigen(h3, "general").eigenvalues
    inside = values[np.abs(values) < c.radius]
    inside = polish_tridiagonal(h3, inside)
    unperturbed = params.lambda_cubic * sum(_lam(k) for k in range(c.index + 1))
    return complex(inside.sum() - unperturbed), int(len(inside))


@dataclass
class FormulaRow:
    index: int
    radius: float
    nodes: int
    lhs: complex
    rhs: complex
    per_j: list
    inside_count: int
    valid: bool
    imag_flag: bool = False
    notes: list = field(default_factory=list)

    @property
    def gap(self):
        return abs(self.lhs - self.rhs)


def formula_convergence_report(n_range, trunc, params, nodes=DEFAULT_NODES, jmax=4, imag_tol=1e-8):
    """Rows of lhs, rhs and their gap for each contour index in ``n_range``.

    One eigensolve serves all rows. Rows whose inside count differs from
    n+1 are kept with ``valid=False``.
    """
    n_range = [int(n) for n in n_range]
    if not n_range:
        raise ParameterError("n_range must be non-empty")
    for n in n_range:
        if trunc.dim < 4 * (n + 1):
            raise ParameterError(f"dim must be >= 4*(n+1) = {4 * (n + 1)} for n={n}, got {trunc.dim}")
    h3 = build_hamiltonian(trunc, params, "cubic")
    values = eigen(h3, "general").eigenvalues
    rows = []
    for n in n_range:
        c = contour_for_index(n, params, nodes)
        inside = polish_tridiagonal(h3, values[np.abs(values) < c.radius])
        unperturbed = params.lambda_cubic * sum(_lam(k) for k in range(n + 1))
        lhs = complex(inside.sum() - unperturbed)
        rhs, per_j = rhs_contour_sum(c, trunc, params, jmax)
        count = int(len(inside))
        notes = []
        valid = count == n + 1
        if not valid:
            notes.append(f"inside_count {count} != {n + 1}")
        imag_flag = abs(lhs.imag) > imag_tol or abs(rhs.imag) > imag_tol
        rows.append(FormulaRow(
            index=n, radius=c.radius, nodes=nodes, lhs=lhs, rhs=rhs,
            per_j=[complex(v) for v in per_j], inside_count=count,
            valid=valid, imag_flag=imag_flag, notes=notes,
        ))
    return rows
