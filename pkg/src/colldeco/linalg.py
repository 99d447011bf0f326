"""Small dense linear-algebra helpers shared by the finite-dimensional modules."""

from __future__ import annotations

import numpy as np

from colldeco.errors import InputError

HERMITIAN_TOL = 1e-10


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)), initial=0.0))


def max_norm(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def psd_sqrt(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Square root of a positive semidefinite matrix by eigendecomposition.

    Eigenvalues in ``[-1e-10 * ||a||, 0)`` are clamped to zero; anything more
    negative raises ``NOT_PSD``.
    """
    if hermiticity_defect(a) > HERMITIAN_TOL * max(1.0, max_norm(a)):
        raise InputError("NOT_HERMITIAN", f"{what} is not Hermitian")
    w, v = np.linalg.eigh(hermitian_part(a))
    scale = max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
    if w.size and w.min() < -1e-10 * scale:
        raise InputError("NOT_PSD", f"{what} has eigenvalue {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def check_unitary(u: np.ndarray, tol: float = 1e-10, what: str = "S") -> None:
    n = u.shape[0]
    if u.shape != (n, n) or max_norm(dagger(u) @ u - np.eye(n)) > tol:
        raise InputError("NOT_UNITARY", f"{what} is not unitary within {tol:g}")


def check_density(rho: np.ndarray, tol: float = 1e-10, what: str = "state") -> None:
    """Hermitian, unit trace, positive semidefinite (all within ``tol``)."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InputError("STATE_INVALID", f"{what} must be a square matrix")
    if hermiticity_defect(rho) > tol:
        raise InputError("STATE_INVALID", f"{what} is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InputError("STATE_INVALID", f"{what} has trace {tr.real:.12g}")
    if np.linalg.eigvalsh(hermitian_part(rho)).min() < -tol:
        raise InputError("STATE_INVALID", f"{what} is not positive semidefinite")


def partial_trace_second(a: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Trace out the second tensor factor of an operator on C^d1 (x) C^d2."""
    return np.einsum("ikjk->ij", a.reshape(d1, d2, d1, d2))


def choi_matrix(apply, dim: int) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) L(|i><j|) of a linear map on dim x dim matrices."""
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            choi[i * dim : (i + 1) * dim, j * dim : (j + 1) * dim] = apply(e)
    return choi


def conditional_min_eigenvalue(choi: np.ndarray, dim: int) -> float:
    """Smallest eigenvalue of the Choi matrix projected orthogonally to the
    maximally entangled vector.

    A Hermiticity-preserving generator is conditionally completely positive
    (hence of Lindblad form) iff this number is non-negative.
    """
    omega = np.eye(dim).reshape(-1) / np.sqrt(dim)
    proj = np.eye(dim * dim) - np.outer(omega, omega)
    return float(np.linalg.eigvalsh(hermitian_part(proj @ choi @ proj)).min())


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return g @ dagger(g) / n


def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    a = random_psd(rng, n, rank)
    return hermitian_part(a / np.trace(a).real)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return hermitian_part(g)
