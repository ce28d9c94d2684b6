"""Synthetic ground truth for testing: exponential-mode signals, noise, and spectrum matching.

Every spec with nonzero frequency contributes
``a e^{i phi} u e^{(delta + i omega) t}`` plus its complex conjugate, so a
correct decomposition recovers a conjugate pair of modes each carrying
amplitude ``a``. Zero-frequency specs contribute ``a cos(phi) u e^{delta t}``
with a real ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "MatchReport",
    "TwoBranchSurrogate",
    "bpm_to_rad",
    "disk_mask",
    "ModeSpec",
    "add_noise",
    "match_spectra",
    "smooth_field",
    "synth_matrix",
    "synth_video",
    "two_branch_video",
]


@dataclass(frozen=True)
class ModeSpec:
    amplitude: float
    frequency: float = 0.0
    growth_rate: float = 0.0
    phase: float = 0.0
    spatial: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amplitude}")

    def to_dict(self) -> dict:
        return {
            "amplitude": float(self.amplitude),
            "frequency": float(self.frequency),
            "growth_rate": float(self.growth_rate),
            "phase": float(self.phase),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModeSpec":
        return cls(
            amplitude=float(d["amplitude"]),
            frequency=float(d.get("frequency", 0.0)),
            growth_rate=float(d.get("growth_rate", 0.0)),
            phase=float(d.get("phase", 0.0)),
        )


def _random_spatial(specs, J: int, rng: np.random.Generator) -> list[np.ndarray]:
    # Orthonormal real columns; a pair mode uses two of them as (q1 + i q2)/sqrt(2),
    # which keeps u, conj(u) and every other mode mutually orthogonal.
    needed = sum(2 if s.frequency != 0 else 1 for s in specs if s.spatial is None)
    if needed > J:
        raise ValueError(f"{needed} orthogonal spatial vectors do not fit in dimension {J}")
    Q = np.linalg.qr(rng.standard_normal((J, max(needed, 1))))[0] if needed else None
    out, col = [], 0
    for s in specs:
        if s.spatial is not None:
            u = np.asarray(s.spatial, dtype=complex).reshape(-1)
            if u.shape[0] != J:
                raise ValueError(f"explicit spatial vector has length {u.shape[0]}, expected {J}")
            u = u / np.linalg.norm(u)
        elif s.frequency != 0:
            u = (Q[:, col] + 1j * Q[:, col + 1]) / np.sqrt(2.0)
            col += 2
        else:
            u = Q[:, col].astype(complex)
            col += 1
        out.append(u)
    return out


def _evaluate(specs, spatial, K: int, dt: float) -> np.ndarray:
    J = spatial[0].shape[0] if spatial else 0
    t = dt * np.arange(K)
    X = np.zeros((J, K))
    for s, u in zip(specs, spatial):
        coef = s.amplitude * np.exp(1j * s.phase)
        z = coef * np.outer(u, np.exp((s.growth_rate + 1j * s.frequency) * t))
        # z + conj(z) for a pair; the real part alone for an unpaired mode.
        X += 2.0 * z.real if s.frequency != 0 else z.real
    return X


def synth_matrix(specs, J: int, K: int, dt: float, seed=0) -> np.ndarray:
    """J x K real snapshot matrix sampled at ``t_k = (k-1) dt``."""
    if J < 1 or K < 1:
        raise ValueError("J and K must be positive")
    specs = list(specs)
    if not specs:
        return np.zeros((J, K))
    rng = np.random.default_rng(seed)
    spatial = _random_spatial(specs, J, rng)
    return _evaluate(specs, spatial, K, dt)


def smooth_field(I1: int, I2: int, rng: np.random.Generator, width: float | None = None) -> np.ndarray:
    """Complex low-pass random field, unit Frobenius norm."""
    width = max(I1, I2) / 8.0 if width is None else width
    re = gaussian_filter(rng.standard_normal((I1, I2)), width, mode="wrap")
    im = gaussian_filter(rng.standard_normal((I1, I2)), width, mode="wrap")
    f = re + 1j * im
    return f / np.linalg.norm(f)


def synth_video(specs, I1: int, I2: int, K: int, dt: float, seed=0) -> np.ndarray:
    """I1 x I2 x K tensor; frames are column-major reshapes of :func:`synth_matrix` columns.

    Specs without an explicit ``spatial`` field get a seeded smooth random
    field (real for zero-frequency specs).
    """
    if min(I1, I2, K) < 1:
        raise ValueError("dimensions must be positive")
    specs = list(specs)
    if not specs:
        return np.zeros((I1, I2, K))
    rng = np.random.default_rng(seed)
    spatial = []
    for s in specs:
        if s.spatial is not None:
            f = np.asarray(s.spatial, dtype=complex)
            if f.shape != (I1, I2):
                raise ValueError(f"explicit spatial field has shape {f.shape}, expected {(I1, I2)}")
        else:
            f = smooth_field(I1, I2, rng)
            if s.frequency == 0:
                f = f.real.astype(complex)
        u = f.reshape(-1, order="F")
        spatial.append(u / np.linalg.norm(u))
    X = _evaluate(specs, spatial, K, dt)
    return X.reshape(I1, I2, K, order="F")


def add_noise(data, sigma: float, seed=0) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    data = np.asarray(data, dtype=float)
    if sigma == 0:
        return data.copy()
    rng = np.random.default_rng(seed)
    return data + sigma * rng.standard_normal(data.shape)


@dataclass
class MatchReport:
    """Injective truth/recovered pairing.

    ``pairs`` holds ``(truth_spec, recovered_index, d_omega, d_delta,
    amplitude_rel_error)``; recovered indices refer to the ``omega >= 0``
    representatives passed in.
    """

    pairs: list = field(default_factory=list)
    unmatched_truth: list = field(default_factory=list)
    unmatched_recovered: list = field(default_factory=list)
    noise_floor: list = field(default_factory=list)

    @property
    def max_d_omega(self) -> float:
        return max((p[2] for p in self.pairs), default=0.0)

    @property
    def max_d_delta(self) -> float:
        return max((p[3] for p in self.pairs), default=0.0)

    @property
    def max_amplitude_error(self) -> float:
        return max((p[4] for p in self.pairs), default=0.0)

    @property
    def all_matched(self) -> bool:
        return not self.unmatched_truth


def match_spectra(truth, recovered, tol_omega: float, floor: float = 1e-3) -> MatchReport:
    """Greedy nearest-frequency matching of ground truth to recovered modes.

    ``recovered`` is anything with ``frequencies``, ``growth_rates`` and
    ``amplitudes`` arrays (e.g. a ``DMDExpansion``); only entries with
    ``omega >= 0`` take part. Candidate pairs are taken in order of
    increasing ``|d_omega|`` (ties by truth index) and accepted while within
    ``tol_omega``. Recovered modes below ``floor * a_1`` are reported as
    noise floor rather than candidates.
    """
    if not tol_omega > 0:
        raise ValueError("tol_omega must be positive")
    truth = list(truth)
    freq = np.asarray(recovered.frequencies, dtype=float)
    grow = np.asarray(recovered.growth_rates, dtype=float)
    amp = np.asarray(recovered.amplitudes, dtype=float)
    reps = [int(i) for i in np.flatnonzero(freq >= 0)]
    a1 = amp.max() if amp.size else 0.0
    floor_set = [i for i in reps if amp[i] < floor * a1]
    cands = [i for i in reps if i not in floor_set]

    # Order-invariance: sort truth canonically and map back at the end.
    key = sorted(range(len(truth)), key=lambda i: (abs(truth[i].frequency), truth[i].growth_rate, -truth[i].amplitude, i))
    edges = []
    for rank, ti in enumerate(key):
        w = abs(truth[ti].frequency)
        for ri in cands:
            edges.append((abs(freq[ri] - w), rank, ri, ti))
    edges.sort(key=lambda e: (e[0], e[1], e[2]))

    used_t, used_r, pairs = set(), set(), []
    for dw, _, ri, ti in edges:
        if dw > tol_omega:
            break
        if ti in used_t or ri in used_r:
            continue
        s = truth[ti]
        rel = abs(amp[ri] - s.amplitude) / s.amplitude if s.amplitude > 0 else abs(amp[ri])
        pairs.append((s, ri, float(dw), float(abs(grow[ri] - s.growth_rate)), float(rel)))
        used_t.add(ti)
        used_r.add(ri)

    pairs.sort(key=lambda p: p[1])
    return MatchReport(
        pairs=pairs,
        unmatched_truth=[truth[i] for i in key if i not in used_t],
        unmatched_recovered=[i for i in cands if i not in used_r],
        noise_floor=floor_set,
    )


def bpm_to_rad(bpm: float) -> float:
    return bpm * 2.0 * np.pi / 60.0


def disk_mask(I1: int, I2: int, center: tuple[float, float], radius: float) -> np.ndarray:
    yy, xx = np.mgrid[0:I1, 0:I2]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius**2


@dataclass
class TwoBranchSurrogate:
    """Echo-like test video: two periodic components on disjoint disks plus a static background."""

    tensor: np.ndarray
    specs: list
    regions: dict
    dt: float


def two_branch_video(
    I1: int = 64,
    I2: int = 64,
    K: int = 200,
    dt: float = 4e-3,
    upper_bpm: float = 633.0,
    lower_bpm: float = 208.0,
    harmonics: int = 1,
    decay: float = 0.5,
    background: float = 2.0,
    seed=0,
) -> TwoBranchSurrogate:
    """Noise-free two-branch surrogate.

    The upper branch lives on a disk in the upper-left part of the frame,
    the lower branch on a disk in the lower-right part. Each branch is one
    real smooth field modulated by a periodic waveform with ``harmonics``
    terms whose amplitudes fall off by ``decay``. Each disk covers more than
    10% of the frame.
    """
    rng = np.random.default_rng(seed)
    upper = disk_mask(I1, I2, (0.375 * I1, 0.375 * I2), 0.25 * min(I1, I2))
    lower = disk_mask(I1, I2, (0.75 * I1, 0.72 * I2), 0.2 * min(I1, I2))
    width = max(I1, I2) / 16.0
    specs = []
    for bpm, mask, a0 in ((upper_bpm, upper, 1.0), (lower_bpm, lower, 0.6)):
        field_ = np.abs(smooth_field(I1, I2, rng, width).real) * mask
        for h in range(1, harmonics + 1):
            specs.append(
                ModeSpec(
                    amplitude=a0 * decay ** (h - 1),
                    frequency=h * bpm_to_rad(bpm),
                    phase=float(rng.uniform(0, 2 * np.pi)),
                    spatial=field_,
                )
            )
    if background > 0:
        bg = np.abs(smooth_field(I1, I2, rng, max(I1, I2) / 6.0).real) + 0.05 / max(I1, I2)
        specs.append(ModeSpec(amplitude=background, spatial=bg))
    T = synth_video(specs, I1, I2, K, dt, seed=seed)
    return TwoBranchSurrogate(tensor=T, specs=specs, regions={"upper": upper, "lower": lower}, dt=dt)
