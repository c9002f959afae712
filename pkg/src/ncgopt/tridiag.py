"""Symmetric tridiagonal eigensolver by QL iteration with implicit shifts.

Used by the Lanczos minimum-eigenvalue oracle to extract Ritz pairs from the
growing tridiagonal matrix.  Eigenvalues come back unordered; callers pick
what they need.
"""
from __future__ import annotations

import math

import numpy as np

_MACHEPS = float(np.finfo(float).eps)
_MAX_SWEEPS = 50


def tridiag_eigh(
    diag: np.ndarray, offdiag: np.ndarray, vectors: bool = True
) -> tuple[np.ndarray, np.ndarray | None]:
    """Eigenvalues (and optionally eigenvectors) of a symmetric tridiagonal.

    ``diag`` has length k, ``offdiag`` length k - 1.  Returns ``(w, Z)`` with
    Z columns the eigenvectors of the corresponding eigenvalues, or ``(w,
    None)`` when ``vectors`` is False.
    """
    d = np.asarray(diag, dtype=float).copy()
    k = d.shape[0]
    if k == 0:
        raise ValueError("empty tridiagonal")
    e = np.zeros(k)
    if k > 1:
        e[: k - 1] = np.asarray(offdiag, dtype=float)
    z = np.eye(k) if vectors else None
    if k == 1:
        return d, z

    scale = max(float(np.max(np.abs(d))), float(np.max(np.abs(e))), 1.0)
    floor = _MACHEPS * scale

    for l in range(k):
        sweeps = 0
        while True:
            m = k - 1
            for cand in range(l, k - 1):
                dd = abs(d[cand]) + abs(d[cand + 1])
                if abs(e[cand]) <= _MACHEPS * dd + floor * _MACHEPS:
                    m = cand
                    break
            if m == l:
                break
            sweeps += 1
            if sweeps > _MAX_SWEEPS:
                raise RuntimeError("tridiagonal QL failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * col
                    z[:, i] = c * z[:, i] - s * col
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def smallest_eigenvalue(diag: np.ndarray, offdiag: np.ndarray) -> float:
    w, _ = tridiag_eigh(diag, offdiag, vectors=False)
    return float(np.min(w))


def smallest_eigenpair(
    diag: np.ndarray, offdiag: np.ndarray
) -> tuple[float, np.ndarray]:
    w, z = tridiag_eigh(diag, offdiag, vectors=True)
    idx = int(np.argmin(w))
    return float(w[idx]), z[:, idx].copy()
