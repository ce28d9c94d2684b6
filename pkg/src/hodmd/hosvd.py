"""Truncated higher order SVD (Tucker form) of a third-order tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_tensor3, tprod, truncated_svd, unfold

__all__ = ["HOSVDResult", "hosvd", "reconstruct_hosvd"]


@dataclass(frozen=True)
class HOSVDResult:
    """``T ~= tprod(core, factor1, factor2, temporal_factor)``.

    ``singular_values_per_mode`` holds the full spectrum of each unfolding
    (not only the retained part), which is what error bounds need.
    """

    core: np.ndarray
    factor1: np.ndarray
    factor2: np.ndarray
    temporal_factor: np.ndarray
    singular_values_per_mode: tuple

    @property
    def ranks(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.core.shape)

    @property
    def retained_singular_values(self) -> tuple:
        return tuple(s[:r] for s, r in zip(self.singular_values_per_mode, self.ranks))


def hosvd(T, eps_spatial: float, eps_temporal: float, max_rank: int | None = None) -> HOSVDResult:
    """Per-mode truncated SVDs of the unfoldings, core by projection.

    Modes 1 and 2 share ``eps_spatial``; mode 3 (time) uses ``eps_temporal``.
    The core is ``tprod(T, U1.T, U2.T, U3.T)``; no HOOI refinement.
    """
    T = as_tensor3(T)
    if not np.any(T):
        raise ValueError("zero tensor has no spectral content")
    svds = [
        truncated_svd(unfold(T, mode), eps, max_rank=max_rank)
        for mode, eps in ((1, eps_spatial), (2, eps_spatial), (3, eps_temporal))
    ]
    U1, U2, U3 = (s.left for s in svds)
    core = tprod(T, U1.T, U2.T, U3.T)
    return HOSVDResult(
        core=core,
        factor1=U1,
        factor2=U2,
        temporal_factor=U3,
        singular_values_per_mode=tuple(s.all_singular_values for s in svds),
    )


def reconstruct_hosvd(r: HOSVDResult) -> np.ndarray:
    return tprod(r.core, r.factor1, r.factor2, r.temporal_factor)
