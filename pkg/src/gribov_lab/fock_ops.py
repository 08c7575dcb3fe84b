"""Truncated Fock-basis matrices of the Gribov operator family.

All matrices are Galerkin compressions onto the window
``e_offset, ..., e_{offset+dim-1}`` of the orthonormal basis
``e_n(z) = z**n / sqrt(n!)``. Entry ``(m, n)`` is the coefficient of
``e_{m+offset}`` in the image of ``e_{n+offset}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

REGULARIZERS = ("cubic", "quartic", "none")


@dataclass(frozen=True)
class GribovParams:
    """Couplings of ``l3*a*^3a^3 + l2*a*^2a^2 + mu*a*a + i*lam*a*(a+a*)a``.

    lambda_cubic is the magic coupling, lambda_quartic the four coupling,
    mu the Pomeron intercept and lambda_triple the triple coupling.
    """

    lambda_cubic: float = 0.0
    lambda_quartic: float = 0.0
    mu: float = 0.0
    lambda_triple: float = 0.0

    def __post_init__(self):
        for name in ("lambda_cubic", "lambda_quartic", "mu", "lambda_triple"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))

    def require_accretive(self):
        """Reject couplings outside ``mu > 0, lambda_cubic >= 0``."""
        bad = []
        if not self.mu > 0:
            bad.append(f"mu must be > 0 (got {self.mu})")
        if self.lambda_cubic < 0:
            bad.append(f"lambda_cubic must be >= 0 (got {self.lambda_cubic})")
        if bad:
            raise ParameterError("accretivity hypotheses violated: " + "; ".join(bad))

    def as_dict(self):
        return {
            "lambda_cubic": self.lambda_cubic,
            "lambda_quartic": self.lambda_quartic,
            "mu": self.mu,
            "lambda_triple": self.lambda_triple,
        }


@dataclass(frozen=True)
class Truncation:
    """Basis window: ``dim`` vectors starting at ``e_offset``.

    offset 0 is the full space, offset 1 the subspace of functions
    vanishing at the origin.
    """

    dim: int
    offset: int = 0

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim!r}")
        if self.offset not in (0, 1):
            raise ParameterError(f"offset must be 0 or 1, got {self.offset!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def indices(self):
        return np.arange(self.offset, self.offset + self.dim, dtype=float)


@dataclass(frozen=True, eq=False)
class FockMatrix:
    """Immutable dense matrix tagged with its basis window."""

    entries: np.ndarray
    offset: int = 0
    dim: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"entries must be a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "dim", a.shape[0])
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def indices(self):
        """Absolute basis labels of the retained vectors."""
        return np.arange(self.offset, self.offset + self.dim, dtype=float)

    def is_diagonal(self):
        a = self.entries
        return not np.any(a - np.diag(np.diag(a)))

    def diagonal(self):
        return np.diag(self.entries).copy()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries.copy()
        return self.entries.astype(dtype)

    def __repr__(self):
        return f"FockMatrix(dim={self.dim}, offset={self.offset})"


def falling_factorial(n, k):
    """``n (n-1) ... (n-k+1)`` evaluated elementwise."""
    n = np.asarray(n, dtype=float)
    out = np.ones_like(n)
    for j in range(k):
        out = out * (n - j)
    return out


def build_ladder(trunc, kind="annihilation"):
    """Matrix of ``a`` or ``a*`` compressed to the window."""
    n = trunc.indices
    a = np.zeros((trunc.dim, trunc.dim), dtype=complex)
    # a e_n = sqrt(n) e_{n-1}; the image of the lowest vector leaves the window
    a[np.arange(trunc.dim - 1), np.arange(1, trunc.dim)] = np.sqrt(n[1:])
    if kind == "annihilation":
        return FockMatrix(a, trunc.offset)
    if kind == "creation":
        return FockMatrix(a.T, trunc.offset)
    raise ParameterError(f"kind must be 'annihilation' or 'creation', got {kind!r}")


def build_diag_power(trunc, order):
    """Diagonal of ``a*^k a^k``: ``n(n-1)...(n-k+1)``.

    ``order=3`` gives G, ``order=2`` gives S, ``order=1`` the number operator.
    """
    if order not in (1, 2, 3):
        raise ParameterError(f"order must be 1, 2 or 3, got {order!r}")
    return FockMatrix(np.diag(falling_factorial(trunc.indices, order)), trunc.offset)


def interaction_bands(trunc, params):
    """Diagonal and off-diagonal band of ``H_{mu,lambda}``.

    Returns ``(diag, off)`` with ``off[i]`` the (symmetric) coupling between
    window positions ``i`` and ``i+1``.
    """
    n = trunc.indices
    diag = (params.mu * n).astype(complex)
    off = 1j * params.lambda_triple * n[:-1] * np.sqrt(n[:-1] + 1.0)
    return diag, off


def build_interaction(trunc, params):
    """Tridiagonal complex-symmetric matrix of ``mu a*a + i lam a*(a+a*)a``."""
    diag, off = interaction_bands(trunc, params)
    m = np.diag(diag)
    m += np.diag(off, 1) + np.diag(off, -1)
    return FockMatrix(m, trunc.offset)


def build_hamiltonian(trunc, params, regularizer="cubic"):
    """``lambda_cubic*G + H``, ``lambda_quartic*S + H`` or ``H`` alone."""
    h = np.array(build_interaction(trunc, params).entries)
    if regularizer == "cubic":
        h += params.lambda_cubic * np.diag(falling_factorial(trunc.indices, 3))
    elif regularizer == "quartic":
        h += params.lambda_quartic * np.diag(falling_factorial(trunc.indices, 2))
    elif regularizer != "none":
        raise ParameterError(f"regularizer must be one of {REGULARIZERS}, got {regularizer!r}")
    return FockMatrix(h, trunc.offset)


def restrict_subspace(m, drop_lowest):
    """Delete the first ``drop_lowest`` rows and columns."""
    d = int(drop_lowest)
    if d < 0 or d >= m.dim:
        raise ParameterError(f"drop_lowest must satisfy 0 <= d < dim={m.dim}, got {drop_lowest}")
    return FockMatrix(m.entries[d:, d:], m.offset + d)
