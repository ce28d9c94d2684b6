"""Dense factorization kernels: truncated SVD, mode-k unfolding and tprod.

Matrices and third-order tensors are plain ``numpy.ndarray`` objects. The
helpers below validate shape and finiteness at the boundary and otherwise
stay out of the way.

Unfolding convention (cyclic, 1-based mode numbers as in the literature):

* mode 1: rows ``i1``; column index ``i2 + I2*k``   (``i2`` fastest, then ``k``)
* mode 2: rows ``i2``; column index ``k + K*i1``    (``k`` fastest, then ``i1``)
* mode 3: rows ``k``;  column index ``i1 + I1*i2``  (``i1`` fastest, then ``i2``)

The mode-3 unfolding is therefore the transpose of the snapshot matrix whose
columns are column-major flattened frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TruncatedSVD",
    "as_real_matrix",
    "as_tensor3",
    "fold",
    "fix_signs",
    "tprod",
    "truncated_svd",
    "unfold",
]


def as_real_matrix(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_tensor3(T, name: str = "tensor") -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or min(T.shape) < 1:
        raise ValueError(f"{name} must be a non-empty 3-D array, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise ValueError(f"{name} contains non-finite entries")
    return T


@dataclass(frozen=True)
class TruncatedSVD:
    """``A ~= left @ diag(singular_values) @ right.T`` with ``rank`` columns kept.

    ``all_singular_values`` holds the full spectrum before truncation so that
    callers can report discarded energy.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    all_singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]

    @property
    def reduced(self) -> np.ndarray:
        """``diag(s) @ right.T``, the coordinates of the columns in ``left``."""
        return self.singular_values[:, None] * self.right.T

    def reconstruct(self) -> np.ndarray:
        return self.left @ self.reduced


def fix_signs(U: np.ndarray, V: np.ndarray | None = None):
    """Flip columns so the largest-magnitude entry of each column of ``U`` is positive.

    The matching columns of ``V`` are flipped too, leaving ``U S V^T`` unchanged.
    Ties in magnitude resolve to the first index.
    """
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if V is None:
        return U
    return U, V * signs


def _retained_rank(s: np.ndarray, eps_rel: float, shape: tuple[int, int]) -> int:
    # Numerically-zero singular values are never kept, whatever eps_rel says.
    floor = max(shape) * np.finfo(float).eps * s[0]
    keep = (s > eps_rel * s[0]) & (s > floor)
    return int(np.count_nonzero(keep))


def truncated_svd(
    A,
    eps_rel: float = 0.0,
    max_rank: int | None = None,
    method: str = "lapack",
) -> TruncatedSVD:
    """Thin SVD of ``A`` truncated by relative singular value.

    The retained rank ``N`` is the smallest value with
    ``s[N] / s[0] <= eps_rel`` (0-based ``s``), capped by ``max_rank`` and by
    the numerical rank. Columns are sign-normalized with :func:`fix_signs`.

    Parameters
    ----------
    A : array_like, shape (J, K)
    eps_rel : float
        Relative truncation tolerance in ``[0, 1)``.
    max_rank : int, optional
        Hard cap on the number of retained modes.
    method : {"lapack", "gram"}
        ``"gram"`` diagonalizes the ``K x K`` Gram matrix instead, which is
        cheaper when ``K << J``. Singular values below about
        ``sqrt(machine eps) * s[0]`` are not resolved by that route and the
        left vectors lose orthonormality roughly as ``eps * (s[0]/s[i])**2``,
        so it is only appropriate with a coarse ``eps_rel``.
    """
    A = as_real_matrix(A)
    if not 0.0 <= eps_rel < 1.0:
        raise ValueError(f"eps_rel must lie in [0, 1), got {eps_rel}")
    if method == "lapack":
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        V = Vt.T
    elif method == "gram":
        evals, V = np.linalg.eigh(A.T @ A)
        order = np.argsort(evals)[::-1]
        evals, V = evals[order], V[:, order]
        s = np.sqrt(np.clip(evals, 0.0, None))
        U = None
    else:
        raise ValueError(f"unknown SVD method {method!r}")

    if s.size == 0 or s[0] == 0.0:
        raise ValueError("zero matrix has no spectral content")

    n = _retained_rank(s, eps_rel, A.shape)
    if max_rank is not None:
        n = min(n, int(max_rank))
    if U is None:
        U = (A @ V[:, :n]) / s[:n]
    U, V = fix_signs(U[:, :n], V[:, :n])
    return TruncatedSVD(left=U, singular_values=s[:n].copy(), right=V, all_singular_values=s)


_PERMS = {1: (0, 1, 2), 2: (1, 2, 0), 3: (2, 0, 1)}


def unfold(T, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization (``mode`` in 1, 2, 3) with cyclic column order."""
    T = as_tensor3(T)
    if mode not in _PERMS:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    P = np.transpose(T, _PERMS[mode])
    return P.reshape(P.shape[0], -1, order="F")


def fold(M, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    if mode not in _PERMS:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    perm = _PERMS[mode]
    pshape = tuple(shape[p] for p in perm)
    P = np.asarray(M).reshape(pshape, order="F")
    return np.transpose(P, np.argsort(perm))


def tprod(core, U1, U2, U3) -> np.ndarray:
    """Multilinear product ``out[i,j,k] = sum core[a,b,c] U1[i,a] U2[j,b] U3[k,c]``.

    Works for real or complex operands.
    """
    core = np.asarray(core)
    if core.ndim != 3:
        raise ValueError(f"core must be 3-D, got shape {core.shape}")
    factors = [np.asarray(U) for U in (U1, U2, U3)]
    for k, U in enumerate(factors):
        if U.ndim != 2 or U.shape[1] != core.shape[k]:
            raise ValueError(
                f"factor {k + 1} has shape {U.shape}, needs {core.shape[k]} columns"
            )
    return np.einsum("abc,ia,jb,kc->ijk", core, *factors, optimize=True)
