"""Dense complex linear algebra on :class:`FockMatrix` values.

LAPACK (through numpy/scipy) does the heavy lifting: ``zgeev`` is a
Hessenberg reduction followed by shifted QR, ``zheevd`` handles the
Hermitian case and ``expm`` is Pade scaling-and-squaring. This module adds
the contracts around them: eigenpair residuals, ordering, defective-spectrum
detection, pole guards and Newton polishing of tridiagonal eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DefectiveSpectrumError, ParameterError, PoleProximityError
from .fock_ops import FockMatrix

RESIDUAL_RTOL = 1e-10
HERMITIAN_RTOL = 1e-12
EXP_NORM_CAP = 1e9


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    tolerance: float
    eigenvectors: np.ndarray | None = None

    @property
    def dim(self):
        return len(self.eigenvalues)


@dataclass
class SchattenReport:
    s_numbers: np.ndarray
    p_norms: dict = field(default_factory=dict)


def _entries(m):
    return m.entries if isinstance(m, FockMatrix) else np.asarray(m, dtype=complex)


def _wrap(a, like):
    return FockMatrix(a, like.offset if isinstance(like, FockMatrix) else 0)


def modulus_order(values):
    """Indices sorting by modulus ascending, then argument ascending."""
    values = np.asarray(values)
    # round moduli so that conjugate pairs tie and fall back to the argument
    mod = np.round(np.abs(values), 12)
    return np.lexsort((np.angle(values), mod))


def _check_not_defective(vectors, values):
    v = vectors / np.linalg.norm(vectors, axis=0)
    gram = np.abs(v.conj().T @ v)
    np.fill_diagonal(gram, 0.0)
    worst = float(gram.max()) if gram.size else 0.0
    if worst > 1.0 - 1e-10:
        i, j = np.unravel_index(np.argmax(gram), gram.shape)
        raise DefectiveSpectrumError(
            "eigenvectors are numerically parallel; the matrix looks defective",
            {"pair": (int(i), int(j)), "overlap": worst,
             "eigenvalues": (complex(values[i]), complex(values[j]))},
        )


def eigen(m, mode="general", want_vectors=False, order="modulus", refine=False):
    """Eigenvalues (and optionally eigenvectors) with residual norms.

    ``mode='hermitian'`` requires conjugate symmetry to within
    ``1e-12 * norm(M)`` and returns real eigenvalues. ``refine=True``
    polishes the eigenvalues of a tridiagonal input by Newton iteration on
    its determinant recurrence, which is accurate relative to the local
    entry scale rather than to ``norm(M)``.
    """
    a = _entries(m)
    scale = float(np.linalg.norm(a, 2)) if a.size else 0.0
    tol = RESIDUAL_RTOL * max(scale, np.finfo(float).tiny)
    try:
        if mode == "hermitian":
            dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
            if dev > HERMITIAN_RTOL * scale:
                raise ParameterError(
                    f"hermitian mode needs a Hermitian matrix; deviation {dev:.3e} "
                    f"exceeds {HERMITIAN_RTOL:g}*norm = {HERMITIAN_RTOL * scale:.3e}"
                )
            w, v = scipy.linalg.eigh(a)
            values = w.astype(float)
        elif mode == "general":
            values, v = scipy.linalg.eig(a)
        else:
            raise ParameterError(f"mode must be 'hermitian' or 'general', got {mode!r}")
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"LAPACK eigensolver did not converge: {exc}",
            {"dim": a.shape[0], "mode": mode, "norm": scale},
        ) from exc

    if mode == "general":
        _check_not_defective(v, values)
        if refine:
            values = polish_tridiagonal(a, values)

    res = np.linalg.norm(a @ v - v * values, axis=0) / np.linalg.norm(v, axis=0)
    bad = np.flatnonzero(res > tol)
    if bad.size:
        raise ConvergenceError(
            f"{bad.size} eigenpairs exceed residual tolerance {tol:.3e}",
            {"worst_residual": float(res.max()), "indices": bad[:10].tolist()},
        )

    if order == "modulus":
        idx = modulus_order(values)
    elif order == "real":
        idx = np.lexsort((np.imag(values), np.real(values)))
    elif order is None:
        idx = np.arange(len(values))
    else:
        raise ParameterError(f"unknown order {order!r}")
    return SpectralData(
        eigenvalues=np.asarray(values)[idx],
        residuals=res[idx],
        tolerance=tol,
        eigenvectors=v[:, idx] if want_vectors else None,
    )


def _is_tridiagonal(a):
    n = a.shape[0]
    if n < 3:
        return True
    band = np.triu(np.tril(a, 1), -1)
    return not np.any(a - band)


def _logdet_derivative(d, e2, s):
    """``d/ds log det(T - s)`` via the pivot recurrence of a tridiagonal T."""
    p = d[0] - s
    dp = -1.0
    if p == 0:
        p = np.finfo(float).eps * (1.0 + abs(s))
    acc = dp / p
    for i in range(1, len(d)):
        q = d[i] - s - e2[i - 1] / p
        dq = -1.0 + e2[i - 1] * dp / (p * p)
        if q == 0:
            q = np.finfo(float).eps * (1.0 + abs(s))
        p, dp = q, dq
        acc += dp / p
    return acc


def _newton_root(d, e2, s0, maxiter=60):
    s = complex(s0)
    for _ in range(maxiter):
        deriv = _logdet_derivative(d, e2, s)
        if deriv == 0 or not np.isfinite(deriv):
            return None
        step = 1.0 / deriv
        s = s - step
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(s)):
            return s
    return s


def polish_tridiagonal(a, values, max_shift=1e-6):
    """Newton-refine eigenvalues of a tridiagonal matrix.

    The matrix is split where ``a[i,i+1]*a[i+1,i] == 0``; each value is
    refined inside the block whose spectrum it belongs to. A refinement that
    moves a value by more than ``max_shift*(1+|value|)``, or lands on a root
    already claimed by another value, is discarded.
    """
    a = _entries(a)
    values = np.array(values, dtype=complex)
    if not _is_tridiagonal(a):
        raise ParameterError("polish_tridiagonal needs a tridiagonal matrix")
    n = a.shape[0]
    d = np.diag(a).astype(complex)
    e2 = np.diag(a, 1) * np.diag(a, -1) if n > 1 else np.zeros(0, complex)
    cuts = [0] + [i + 1 for i in np.flatnonzero(e2 == 0)] + [n]
    blocks = [(lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]

    # assign each value to the block whose own eigenvalues are nearest
    block_vals = [np.linalg.eigvals(a[lo:hi, lo:hi]) for lo, hi in blocks]
    out = values.copy()
    claimed = {b: [] for b in range(len(blocks))}
    for k, v in enumerate(values):
        dist = [np.min(np.abs(bv - v)) for bv in block_vals]
        b = int(np.argmin(dist))
        lo, hi = blocks[b]
        if hi - lo == 1:
            root = d[lo]
        else:
            root = _newton_root(d[lo:hi], e2[lo:hi - 1], v)
        if root is None or abs(root - v) > max_shift * (1 + abs(v)):
            continue
        if any(abs(root - c) <= 1e-12 * (1 + abs(c)) for c in claimed[b]):
            continue
        claimed[b].append(root)
        out[k] = root
    return out


def singular_values(m, p_list=(1, 2)):
    """s-numbers (descending) and the requested Schatten p-norms.

    Diagonal input is handled exactly; otherwise LAPACK's SVD is used.
    """
    a = _entries(m)
    if a.size and not np.any(a - np.diag(np.diag(a))):
        s = np.sort(np.abs(np.diag(a)))[::-1]
    else:
        try:
            s = scipy.linalg.svdvals(a)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge: {exc}", {"dim": a.shape[0]}) from exc
    return SchattenReport(s_numbers=s, p_norms={p: _pnorm(s, p) for p in p_list})


def singular_values_gram(m):
    """s-numbers as square roots of the eigenvalues of ``M^H M``."""
    a = _entries(m)
    w = eigen(a.conj().T @ a, mode="hermitian").eigenvalues
    return np.sort(np.sqrt(np.clip(np.real(w), 0.0, None)))[::-1]


def _pnorm(s, p):
    if not p > 0:
        raise ParameterError(f"Schatten exponent must be > 0, got {p}")
    s = np.asarray(s, dtype=float)
    top = s.max() if s.size else 0.0
    if top == 0:
        return 0.0
    # factor out the largest value so small p does not overflow
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def schatten_norm(m, p):
    """``(sum s_n^p)^(1/p)``; ``p=1`` is the trace norm."""
    if not p > 0:
        raise ParameterError(f"Schatten exponent must be > 0, got {p}")
    return _pnorm(singular_values(m, ()).s_numbers, p)


def trace_norm(m):
    return schatten_norm(m, 1)


def operator_norm(m):
    a = _entries(m)
    return float(singular_values(a, ()).s_numbers[0]) if a.size else 0.0


def matrix_exp(m, t, sign="negative", norm_cap=EXP_NORM_CAP):
    """``exp(-t M)`` by Pade scaling-and-squaring (exact for diagonal M)."""
    if sign != "negative":
        raise ParameterError("only sign='negative' (exp(-tM)) is supported")
    if not t >= 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    a = _entries(m)
    if t == 0:
        return _wrap(np.eye(a.shape[0], dtype=complex), m)
    if not np.any(a - np.diag(np.diag(a))):
        return _wrap(np.diag(np.exp(-t * np.diag(a))), m)
    size = t * float(np.linalg.norm(a, 1))
    if size > norm_cap:
        raise ParameterError(f"||tM||_1 = {size:.3e} exceeds the exponential cap {norm_cap:.1e}")
    return _wrap(scipy.linalg.expm(-t * a), m)


def exp_crosscheck(m, t, cond_cap=1e8):
    """Relative disagreement between ``matrix_exp`` and ``V exp(-tD) V^-1``.

    Returns None when the eigenvector matrix is too ill-conditioned for the
    reconstruction to mean anything.
    """
    a = _entries(m)
    values, v = scipy.linalg.eig(a)
    if np.linalg.cond(v) > cond_cap:
        return None
    recon = (v * np.exp(-t * values)) @ np.linalg.inv(v)
    direct = _entries(matrix_exp(a, t))
    return float(np.linalg.norm(direct - recon, 2) / max(np.linalg.norm(direct, 2), 1e-300))


def resolvent_diag(g, scale, sigma, tol_pole=None):
    """``(scale*G - sigma)^-1`` for diagonal G."""
    gd = np.real(np.diag(_entries(g)))
    sigma = complex(sigma)
    if tol_pole is None:
        tol_pole = 1e-8 * max(1.0, abs(sigma))
    den = scale * gd - sigma
    k = int(np.argmin(np.abs(den)))
    if abs(den[k]) <= tol_pole:
        raise PoleProximityError(
            f"sigma={sigma} lies within {tol_pole:.2e} of the eigenvalue {scale * gd[k]} (index {k})"
        )
    return _wrap(np.diag(1.0 / den), g)
