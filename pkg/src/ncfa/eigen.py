"""Hermitian eigensolvers.

Two backends share one entry point, :func:`eigh`:

``"jacobi"``
    A self-contained cyclic Jacobi method for complex Hermitian matrices.
    Rotations are scheduled in round-robin order so that every round acts on
    disjoint index pairs and can be applied as a handful of vectorised numpy
    updates.
``"lapack"``
    ``numpy.linalg.eigh``. This is the default because the experiment drivers
    diagonalise thousands of matrices per run.

The backend is chosen by :func:`set_backend` or the ``NCFA_EIGENSOLVER``
environment variable.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["EigenSolverError", "eigh", "eigvalsh", "jacobi_eigh", "get_backend", "set_backend"]

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100

_BACKENDS = ("lapack", "jacobi")
_backend = os.environ.get("NCFA_EIGENSOLVER", "lapack").lower()
if _backend not in _BACKENDS:
    _backend = "lapack"


class EigenSolverError(RuntimeError):
    """Raised when the Jacobi iteration does not converge within the sweep cap."""


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select the eigensolver backend; returns the previous one."""
    global _backend
    name = name.lower()
    if name not in _BACKENDS:
        raise ValueError(f"unknown eigensolver backend {name!r}; expected one of {_BACKENDS}")
    previous, _backend = _backend, name
    return previous


def _round_robin(m: int):
    """Yield the m-1 rounds of a round-robin tournament on m (even) players."""
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        p = np.array(players[:half])
        q = np.array(players[::-1][:half])
        yield p, q
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a complex Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Hermitian matrix. Only Hermitian input is meaningful; the caller is
        responsible for that check.
    tol : float
        Convergence threshold on the off-diagonal Frobenius mass relative to
        the Frobenius norm of ``a``.
    max_sweeps : int
        Iteration cap. Exceeding it raises :class:`EigenSolverError`.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues in ascending order.
    v : ndarray, shape (n, n)
        Unitary matrix whose columns are the matching eigenvectors.
    """
    a = np.array(a, dtype=np.complex128)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("jacobi_eigh expects a square matrix")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), np.ones((1, 1), dtype=np.complex128)

    scale = np.linalg.norm(a)
    # pad odd sizes with a decoupled dummy index
    m = n + (n % 2)
    A = np.zeros((m, m), dtype=np.complex128)
    A[:n, :n] = (a + a.conj().T) / 2
    V = np.eye(m, dtype=np.complex128)
    if scale == 0.0:
        return np.zeros(n), V[:n, :n]

    rounds = list(_round_robin(m))
    offmask = ~np.eye(m, dtype=bool)
    for _sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A[offmask]) ** 2))
        if off < tol * scale:
            break
        for p, q in rounds:
            b = A[p, q]
            absb = np.abs(b)
            active = absb > 0.0
            if not active.any():
                continue
            p, q, b, absb = p[active], q[active], b[active], absb[active]
            app = A[p, p].real
            aqq = A[q, q].real
            phase = b / absb
            tau = (aqq - app) / (2.0 * absb)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # U = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
            cph = np.conj(phase)
            col_p, col_q = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * col_p - s * cph * col_q
            A[:, q] = s * col_p + c * cph * col_q
            row_p, row_q = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * row_p - (s * phase)[:, None] * row_q
            A[q, :] = s[:, None] * row_p + (c * phase)[:, None] * row_q
            A[p, q] = 0.0
            A[q, p] = 0.0
            v_p, v_q = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * v_p - s * cph * v_q
            V[:, q] = s * v_p + c * cph * v_q
    else:
        off = np.sqrt(np.sum(np.abs(A[offmask]) ** 2))
        if off >= tol * scale:
            raise EigenSolverError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(off-diagonal mass {off:.3e}, target {tol * scale:.3e})"
            )

    w = A.diagonal().real[:n]
    V = V[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigh(a):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    if _backend == "jacobi":
        return jacobi_eigh(a)
    w, v = np.linalg.eigh(a)
    return w, v


def eigvalsh(a):
    if _backend == "jacobi":
        return jacobi_eigh(a)[0]
    return np.linalg.eigvalsh(a)
