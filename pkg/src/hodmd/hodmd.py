"""Higher order dynamic mode decomposition (DMD-d) of a snapshot matrix.

The pipeline, for snapshots ``V`` (J x K) and delay index ``d``:

1. truncated SVD ``V ~= W @ Vhat`` (``Vhat`` is the N x K reduced snapshot matrix);
2. delay-embed ``Vhat`` into a (d*N) x (K-d+1) block matrix and reduce it
   again by SVD to N' rows;
3. regress the one-step shift of the projected matrix onto itself to get
   the N' x N' Koopman matrix, whose eigenpairs give the continuous-time
   exponents ``delta + i*omega = log(mu) / dt`` and, through the first
   block of the lifted eigenvectors, the reduced spatial modes;
4. least-squares amplitudes over all K reduced snapshots, ordering by
   amplitude and truncation at ``a_m / a_1 < eps_dmd``.

``d = 1`` is classical (exact, rank-truncated) DMD.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .linalg import as_real_matrix, truncated_svd

__all__ = [
    "CalibrationRow",
    "DMDExpansion",
    "DMDMode",
    "EigenModes",
    "HODMDConfig",
    "ReconstructionReport",
    "build_stacked",
    "calibrate_d",
    "conjugate_partners",
    "default_d_candidates",
    "eigen_to_modes",
    "fit_amplitudes",
    "koopman_matrix",
    "reconstruct",
    "reduce_snapshots",
    "rrmse",
    "run_hodmd",
    "second_reduction",
    "stack_delays",
    "truncate_by_amplitude",
]

PAIR_TOL = 1e-8


@dataclass(frozen=True)
class HODMDConfig:
    """Tunable parameters. Defaults are the echocardiography regime
    (``eps_svd = eps_dmd = 5e-4``, ``dt = 4 ms``); ``d`` has no sensible
    default independent of K, see :func:`default_d`.

    ``pinv_eps`` is the cutoff used when inverting singular values in the
    Koopman regression and falls back to ``eps_svd``.
    """

    d: int
    eps_svd: float = 5e-4
    eps_dmd: float = 5e-4
    dt: float = 4e-3
    max_rank: int | None = None
    t1: float = 0.0
    pinv_eps: float | None = None

    def validate(self, num_snapshots: int) -> None:
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ValueError(f"delay index d must be a positive integer, got {self.d!r}")
        if self.d >= num_snapshots:
            raise ValueError(
                f"delay index exceeds snapshot count (d={self.d}, K={num_snapshots})"
            )
        if not self.dt > 0 or not np.isfinite(self.dt):
            raise ValueError(f"dt must be positive, got {self.dt}")
        for name in ("eps_svd", "eps_dmd"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")

    @property
    def koopman_cutoff(self) -> float:
        return self.eps_svd if self.pinv_eps is None else self.pinv_eps


def default_d(num_snapshots: int) -> int:
    """Starting delay for calibration, ``round(K / 10)`` clipped to ``[1, K-1]``."""
    return int(min(max(round(num_snapshots / 10), 1), max(num_snapshots - 1, 1)))


@dataclass(frozen=True)
class DMDMode:
    spatial: np.ndarray
    amplitude: float
    growth_rate: float
    frequency: float
    eigenvalue: complex


@dataclass(frozen=True)
class DMDExpansion:
    """``v(t) ~= sum_m amplitudes[m] * modes[:, m] * exp((delta_m + i omega_m)(t - t1))``.

    Columns of ``modes`` have unit Euclidean norm. Modes are sorted by
    amplitude (nonincreasing); a conjugate pair is stored as two adjacent
    columns with the ``omega > 0`` member first.
    """

    modes: np.ndarray
    amplitudes: np.ndarray
    growth_rates: np.ndarray
    frequencies: np.ndarray
    eigenvalues: np.ndarray
    dt: float
    t1: float = 0.0
    num_snapshots: int = 0

    @property
    def num_modes(self) -> int:
        return self.amplitudes.shape[0]

    def __len__(self) -> int:
        return self.num_modes

    def __getitem__(self, m: int) -> DMDMode:
        return DMDMode(
            spatial=self.modes[:, m],
            amplitude=float(self.amplitudes[m]),
            growth_rate=float(self.growth_rates[m]),
            frequency=float(self.frequencies[m]),
            eigenvalue=complex(self.eigenvalues[m]),
        )

    def __iter__(self):
        return (self[m] for m in range(self.num_modes))

    def select(self, index) -> "DMDExpansion":
        index = np.asarray(index, dtype=int)
        return DMDExpansion(
            modes=self.modes[:, index],
            amplitudes=self.amplitudes[index],
            growth_rates=self.growth_rates[index],
            frequencies=self.frequencies[index],
            eigenvalues=self.eigenvalues[index],
            dt=self.dt,
            t1=self.t1,
            num_snapshots=self.num_snapshots,
        )

    def representatives(self) -> np.ndarray:
        """Indices of the ``omega >= 0`` member of every pair, plus unpaired modes."""
        return np.flatnonzero(self.frequencies >= 0)

    def sample_times(self) -> np.ndarray:
        return self.t1 + self.dt * np.arange(self.num_snapshots)


@dataclass(frozen=True)
class ReconstructionReport:
    rrmse: float
    retained_spatial_rank: int
    retained_temporal_rank: int
    num_modes: int


@dataclass(frozen=True)
class EigenModes:
    """Eigen-data of the reduced Koopman matrix before the amplitude fit.

    ``reduced_modes`` are unit-norm N-vectors; ``modes`` are their images
    under the spatial basis, renormalized, with the norm lost in that step
    kept in ``basis_gain`` (1 for an orthonormal basis).
    """

    eigenvalues: np.ndarray
    growth_rates: np.ndarray
    frequencies: np.ndarray
    reduced_modes: np.ndarray
    modes: np.ndarray
    basis_gain: np.ndarray


def reduce_snapshots(V, eps_svd: float, max_rank: int | None = None):
    """Return ``(basis, reduced)`` with ``V ~= basis @ reduced``.

    ``basis`` (J x N) has orthonormal columns and ``reduced = diag(s) @ T.T``.
    """
    V = as_real_matrix(V, "snapshot matrix")
    if V.shape[1] < 2:
        raise ValueError("at least two snapshots are required")
    svd = truncated_svd(V, eps_svd, max_rank=max_rank)
    return svd.left, svd.reduced


def stack_delays(reduced, d: int) -> np.ndarray:
    """Delay-embedded matrix with K-d+1 columns; block ``i`` holds columns ``i .. i+K-d``."""
    reduced = np.asarray(reduced)
    K = reduced.shape[1]
    if d < 1:
        raise ValueError(f"delay index must be >= 1, got {d}")
    if d >= K:
        raise ValueError(f"delay index exceeds snapshot count (d={d}, K={K})")
    width = K - d + 1
    return np.vstack([reduced[:, i : i + width] for i in range(d)])


def build_stacked(reduced, d: int):
    """``(lagged, advanced)`` delay matrices, each with K-d columns.

    ``advanced`` is ``lagged`` shifted one snapshot ahead, so ``d = 1`` gives
    the classical DMD pair ``(V[:, :-1], V[:, 1:])``.
    """
    full = stack_delays(reduced, d)
    return full[:, :-1], full[:, 1:]


def second_reduction(stacked_full, eps_svd: float, max_rank: int | None = None):
    """SVD-truncate the delay matrix; return ``(basis2, projected)`` with
    ``stacked_full ~= basis2 @ projected``."""
    svd = truncated_svd(stacked_full, eps_svd, max_rank=max_rank)
    return svd.left, svd.reduced


def koopman_matrix(projected_lagged, projected_advanced, pinv_eps: float) -> np.ndarray:
    """Least-squares ``R`` with ``projected_advanced ~= R @ projected_lagged``.

    Singular values of ``projected_lagged`` with ``s_i / s_1 <= pinv_eps`` are
    dropped from the pseudoinverse.
    """
    T1 = np.asarray(projected_lagged, dtype=float)
    T2 = np.asarray(projected_advanced, dtype=float)
    if T1.shape != T2.shape:
        raise ValueError(f"shape mismatch {T1.shape} vs {T2.shape}")
    if T1.shape[1] < T1.shape[0]:
        warnings.warn(
            f"underdetermined Koopman regression: {T1.shape[1]} snapshot pairs "
            f"for {T1.shape[0]} unknowns per row",
            RuntimeWarning,
            stacklevel=2,
        )
    U, s, Vt = np.linalg.svd(T1, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("lagged matrix is numerically zero")
    floor = max(T1.shape) * np.finfo(float).eps * s[0]
    keep = (s > pinv_eps * s[0]) & (s > floor)
    return (T2 @ Vt[keep].T / s[keep]) @ U[:, keep].T


def _fix_phase(Q: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(Q), axis=0)
    lead = Q[idx, np.arange(Q.shape[1])]
    phase = np.ones_like(lead)
    nz = lead != 0
    phase[nz] = np.abs(lead[nz]) / lead[nz]
    return Q * phase


def eigen_to_modes(koopman, basis2, basis1, dt: float) -> EigenModes:
    """Eigen-decompose the reduced Koopman matrix and lift its eigenvectors.

    The reduced mode of each eigenpair is the first ``N = basis1.shape[1]``
    entries of ``basis2 @ q``; its spatial mode is ``basis1 @ reduced_mode``.
    """
    koopman = np.asarray(koopman)
    basis2 = np.asarray(basis2)
    basis1 = np.asarray(basis1)
    n_spatial = basis1.shape[1]
    if basis2.shape[0] % n_spatial:
        raise ValueError("basis2 rows must be a multiple of the spatial rank")

    mu, Q = np.linalg.eig(koopman)
    if Q.size and np.linalg.cond(Q) > 1e12:
        warnings.warn("Koopman matrix is close to defective", RuntimeWarning, stacklevel=2)
    scale = np.abs(mu).max() if mu.size else 0.0
    zero = np.abs(mu) <= max(mu.size * np.finfo(float).eps * scale, np.finfo(float).tiny)
    if np.any(zero):
        warnings.warn(
            f"discarding {int(zero.sum())} zero eigenvalue(s)", RuntimeWarning, stacklevel=2
        )
        mu, Q = mu[~zero], Q[:, ~zero]
    mu = mu.astype(complex)
    # A signed zero imaginary part would put a negative real eigenvalue at
    # omega = -pi/dt; keep it on the +pi/dt side of the branch cut.
    mu = np.where(mu.imag == 0, mu.real + 0j, mu)

    expo = np.log(mu) / dt
    reduced = (basis2 @ Q)[:n_spatial]
    norms = np.linalg.norm(reduced, axis=0)
    norms[norms == 0] = 1.0
    reduced = _fix_phase(reduced / norms)
    full = basis1 @ reduced
    gain = np.linalg.norm(full, axis=0)
    safe = np.where(gain > 0, gain, 1.0)
    return EigenModes(
        eigenvalues=mu,
        growth_rates=expo.real,
        frequencies=expo.imag,
        reduced_modes=reduced,
        modes=full / safe,
        basis_gain=gain,
    )


def _time_matrix(exponents: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    return np.exp(np.outer(exponents, offsets))


def fit_amplitudes(reduced, reduced_modes, growth_rates, frequencies, dt: float) -> np.ndarray:
    """Complex coefficients ``c`` minimizing
    ``sum_k || vhat_k - sum_m c_m u_m exp((delta_m + i omega_m) (k-1) dt) ||^2``.

    Solved by column-pivoted QR on the stacked (N*K) x M system. Columns
    beyond the numerical rank get a zero coefficient, with a warning.
    """
    reduced = np.asarray(reduced, dtype=float)
    U = np.asarray(reduced_modes, dtype=complex)
    N, K = reduced.shape
    M = U.shape[1]
    if M == 0:
        return np.zeros(0, dtype=complex)
    expo = np.asarray(growth_rates) + 1j * np.asarray(frequencies)
    E = _time_matrix(expo, dt * np.arange(K))  # M x K
    # Row (k, n) of L is E[m, k] * U[n, m]; K-major stacking matches reduced.T.ravel().
    L = (E.T[:, None, :] * U[None, :, :]).reshape(K * N, M)
    b = reduced.T.reshape(-1).astype(complex)
    if not np.any(b):
        return np.zeros(M, dtype=complex)

    # Plain QR of the tall system first (BLAS-3), then pivot only the small
    # triangular factor: L P = (Q0 Q1) R.
    Q0, R0 = np.linalg.qr(L)
    Q1, R, piv = scipy.linalg.qr(R0, pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(L.shape) * np.finfo(float).eps * diag[0] if diag.size else 0.0
    r = int(np.count_nonzero(diag > tol))
    if r < M:
        warnings.warn(
            f"amplitude fit is rank deficient ({r} of {M} columns); "
            "dropping indeterminate modes",
            RuntimeWarning,
            stacklevel=2,
        )
    c = np.zeros(M, dtype=complex)
    if r:
        y = Q1[:, :r].conj().T @ (Q0.conj().T @ b)
        c[piv[:r]] = scipy.linalg.solve_triangular(R[:r, :r], y)
    return c


def conjugate_partners(eigenvalues, tol: float = PAIR_TOL) -> np.ndarray:
    """``partner[i]`` is the index of the conjugate of eigenvalue ``i`` or -1.

    Only eigenvalues with nonzero imaginary part are paired; matching is
    greedy nearest-neighbour within ``tol * max(1, |mu|)``.
    """
    mu = np.asarray(eigenvalues, dtype=complex)
    partner = np.full(mu.shape[0], -1, dtype=int)
    upper = [i for i in range(mu.shape[0]) if mu[i].imag > 0]
    lower = {i for i in range(mu.shape[0]) if mu[i].imag < 0}
    for i in upper:
        if not lower:
            break
        cand = np.array(sorted(lower))
        dist = np.abs(mu[cand] - np.conj(mu[i]))
        j = int(cand[np.argmin(dist)])
        if dist.min() <= tol * max(1.0, abs(mu[i])):
            partner[i], partner[j] = j, i
            lower.discard(j)
    return partner


def _assemble(eig: EigenModes, coeffs: np.ndarray, dt: float, t1: float, K: int) -> DMDExpansion:
    """Fold coefficient phases into the modes, enforce exact conjugate pairs, sort."""
    mu = eig.eigenvalues.copy()
    growth = eig.growth_rates.copy()
    freq = eig.frequencies.copy()
    modes = eig.modes.copy()
    c = coeffs * eig.basis_gain

    partner = conjugate_partners(mu)
    for i in np.flatnonzero(partner >= 0):
        j = partner[i]
        if freq[i] <= 0:
            continue
        # Real data: the exact solution has conjugate members; remove roundoff.
        avg_c = 0.5 * (c[i] + np.conj(c[j]))
        c[i], c[j] = avg_c, np.conj(avg_c)
        mu[j] = np.conj(mu[i])
        growth[j], freq[j] = growth[i], -freq[i]
        modes[:, j] = np.conj(modes[:, i])

    amp = np.abs(c)
    phase = np.ones_like(c)
    nz = amp > 0
    phase[nz] = c[nz] / amp[nz]
    modes = modes * phase

    # Order pair groups by amplitude (stable), omega > 0 member first.
    groups = []
    seen = set()
    for i in range(mu.shape[0]):
        if i in seen:
            continue
        j = partner[i]
        if j >= 0:
            members = (i, j) if freq[i] > 0 else (j, i)
            seen.update(members)
        else:
            members = (i,)
            seen.add(i)
        groups.append(members)
    group_amp = np.array([amp[g[0]] for g in groups])
    order = np.argsort(-group_amp, kind="stable")
    index = np.array([m for gi in order for m in groups[gi]], dtype=int)

    return DMDExpansion(
        modes=modes[:, index],
        amplitudes=amp[index],
        growth_rates=growth[index],
        frequencies=freq[index],
        eigenvalues=mu[index],
        dt=float(dt),
        t1=float(t1),
        num_snapshots=int(K),
    )


def truncate_by_amplitude(expansion: DMDExpansion, eps_dmd: float) -> DMDExpansion:
    """Keep modes with ``a_m >= eps_dmd * a_1`` and ``a_m > 0``.

    Ties at the threshold are kept. Conjugate members share an amplitude and
    therefore survive or go together.
    """
    if expansion.num_modes == 0:
        return expansion
    a = expansion.amplitudes
    keep = (a > 0) & (a >= eps_dmd * a.max())
    return expansion.select(np.flatnonzero(keep))


def reconstruct(expansion: DMDExpansion, times, zero_growth: bool = False) -> np.ndarray:
    """Real part of the expansion evaluated at ``times`` (one column per time)."""
    times = np.asarray(times, dtype=float).reshape(-1)
    J = expansion.modes.shape[0]
    if expansion.num_modes == 0:
        return np.zeros((J, times.size))
    growth = np.zeros_like(expansion.growth_rates) if zero_growth else expansion.growth_rates
    E = _time_matrix(growth + 1j * expansion.frequencies, times - expansion.t1)
    Z = (expansion.modes * expansion.amplitudes) @ E
    peak = np.abs(Z.real).max()
    resid = np.abs(Z.imag).max()
    if resid > 1e-8 * max(peak, np.finfo(float).tiny):
        warnings.warn(
            f"reconstruction has imaginary residual {resid:.3g} (peak {peak:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return Z.real


def rrmse(original, reconstructed) -> float:
    """``sqrt(sum_k ||v_k - w_k||^2 / sum_k ||v_k||^2)``."""
    original = np.asarray(original, dtype=float)
    reconstructed = np.asarray(reconstructed, dtype=float)
    if original.shape != reconstructed.shape:
        raise ValueError(f"shape mismatch {original.shape} vs {reconstructed.shape}")
    denom = np.sum(original**2)
    if denom == 0:
        raise ValueError("relative error undefined for an all-zero original")
    return float(np.sqrt(np.sum((original - reconstructed) ** 2) / denom))


@dataclass(frozen=True)
class _ReducedFit:
    expansion: DMDExpansion
    temporal_rank: int


def dmd_on_reduced(reduced, basis, config: HODMDConfig) -> _ReducedFit:
    """Steps 2-4 on reduced snapshots; ``basis`` maps reduced to full space.

    Returns the untruncated expansion plus the second-reduction rank N'.
    """
    K = reduced.shape[1]
    config.validate(K)
    full = stack_delays(reduced, config.d)
    basis2, projected = second_reduction(full, config.eps_svd, config.max_rank)
    R = koopman_matrix(projected[:, :-1], projected[:, 1:], config.koopman_cutoff)
    eig = eigen_to_modes(R, basis2, basis, config.dt)
    coeffs = fit_amplitudes(reduced, eig.reduced_modes, eig.growth_rates, eig.frequencies, config.dt)
    expansion = _assemble(eig, coeffs, config.dt, config.t1, K)
    return _ReducedFit(expansion=expansion, temporal_rank=basis2.shape[1])


def run_hodmd(V, config: HODMDConfig, zero_growth: bool = False):
    """Full DMD-d run on a J x K snapshot matrix.

    Returns ``(expansion, report)``; the expansion is truncated by
    ``config.eps_dmd`` and ``report.rrmse`` measures it against ``V``.
    """
    V = as_real_matrix(V, "snapshot matrix")
    config.validate(V.shape[1])
    basis, reduced = reduce_snapshots(V, config.eps_svd, config.max_rank)
    fit = dmd_on_reduced(reduced, basis, config)
    expansion = truncate_by_amplitude(fit.expansion, config.eps_dmd)
    approx = reconstruct(expansion, expansion.sample_times(), zero_growth=zero_growth)
    report = ReconstructionReport(
        rrmse=rrmse(V, approx),
        retained_spatial_rank=basis.shape[1],
        retained_temporal_rank=fit.temporal_rank,
        num_modes=expansion.num_modes,
    )
    return expansion, report


def default_d_candidates(num_snapshots: int) -> list[int]:
    """``K/10`` up to ``0.4 K`` in steps of ``K/20`` (10, 15, ..., 40 for K = 100)."""
    K = num_snapshots
    step = max(1, round(K / 20))
    lo = default_d(K)
    hi = min(max(lo, round(0.4 * K)), K - 1)
    return list(range(lo, hi + 1, step))


@dataclass(frozen=True)
class CalibrationRow:
    d: int
    rrmse: float
    num_modes: int
    spatial_rank: int
    temporal_rank: int


def calibrate_d(V, config: HODMDConfig, candidates=None, tie_tol: float = 1e-12):
    """Run HODMD for each candidate delay and pick the lowest RRMSE.

    RRMSE values within ``tie_tol`` of the minimum count as ties, which go to
    the smaller ``d``. Returns ``(best_d, rows)`` with rows sorted by ``d``.
    """
    V = as_real_matrix(V, "snapshot matrix")
    if candidates is None:
        candidates = default_d_candidates(V.shape[1])
    candidates = sorted({int(d) for d in candidates})
    if not candidates:
        raise ValueError("no candidate delays given")
    rows = []
    for d in candidates:
        cfg = replace(config, d=d)
        _, report = run_hodmd(V, cfg)
        rows.append(
            CalibrationRow(
                d=d,
                rrmse=report.rrmse,
                num_modes=report.num_modes,
                spatial_rank=report.retained_spatial_rank,
                temporal_rank=report.retained_temporal_rank,
            )
        )
    floor = min(r.rrmse for r in rows) + tie_tol
    best = next(r for r in rows if r.rrmse <= floor)
    return best.d, rows
