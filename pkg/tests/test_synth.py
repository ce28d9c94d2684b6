import numpy as np
import pytest

from hodmd.hodmd import HODMDConfig, run_hodmd
from hodmd.synth import (
    ModeSpec,
    add_noise,
    bpm_to_rad,
    match_spectra,
    synth_matrix,
    synth_video,
    two_branch_video,
)


class Recovered:
    def __init__(self, frequencies, growth_rates, amplitudes):
        self.frequencies = np.asarray(frequencies, float)
        self.growth_rates = np.asarray(growth_rates, float)
        self.amplitudes = np.asarray(amplitudes, float)


def test_modespec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        ModeSpec(-1.0)
    s = ModeSpec(0.5, 3.0, -0.1, 1.2)
    assert ModeSpec.from_dict(s.to_dict()) == s


def test_single_stationary_spec_is_constant():
    V = synth_matrix([ModeSpec(1.0)], 5, 7, 0.1, seed=0)
    np.testing.assert_allclose(V, np.tile(V[:, :1], (1, 7)), atol=1e-15)
    assert np.linalg.norm(V[:, 0]) == pytest.approx(1.0)


def test_empty_specs_give_zeros():
    np.testing.assert_array_equal(synth_matrix([], 4, 3, 0.1), np.zeros((4, 3)))
    np.testing.assert_array_equal(synth_video([], 2, 3, 4, 0.1), np.zeros((2, 3, 4)))


def test_column_norms_match_direct_formula():
    specs = [ModeSpec(1.5, 4.0, -0.3, 0.7), ModeSpec(0.8, 0.0, 0.2, 0.4)]
    dt, K = 0.05, 30
    V = synth_matrix(specs, 12, K, dt, seed=5)
    t = dt * np.arange(K)
    # Orthogonal spatial vectors: the oscillating pair contributes 2 a^2 e^{2 delta t},
    # the stationary mode (a cos(phi) e^{delta t})^2.
    expected = 2 * 1.5**2 * np.exp(-0.6 * t) + (0.8 * np.cos(0.4)) ** 2 * np.exp(0.4 * t)
    np.testing.assert_allclose(np.sum(V**2, axis=0), expected, rtol=1e-12)


def test_generators_deterministic():
    specs = [ModeSpec(1.0, 2.0), ModeSpec(0.5)]
    assert np.array_equal(synth_matrix(specs, 6, 9, 0.1, seed=3), synth_matrix(specs, 6, 9, 0.1, seed=3))
    assert not np.array_equal(synth_matrix(specs, 6, 9, 0.1, seed=3), synth_matrix(specs, 6, 9, 0.1, seed=4))
    assert np.array_equal(synth_video(specs, 4, 5, 6, 0.1, seed=1), synth_video(specs, 4, 5, 6, 0.1, seed=1))


def test_synth_video_shape_and_direct_sum():
    rng = np.random.default_rng(0)
    f1 = rng.standard_normal((6, 5)) + 1j * rng.standard_normal((6, 5))
    f0 = rng.standard_normal((6, 5))
    specs = [ModeSpec(1.0, 3.0, -0.1, 0.5, spatial=f1), ModeSpec(0.2, spatial=f0)]
    dt, K = 0.1, 8
    T = synth_video(specs, 6, 5, K, dt, seed=2)
    assert T.shape == (6, 5, K)
    u1, u0 = f1 / np.linalg.norm(f1), f0 / np.linalg.norm(f0)
    for k in range(K):
        t = k * dt
        frame = 2 * np.real(np.exp(0.5j) * u1 * np.exp((-0.1 + 3.0j) * t)) + 0.2 * u0
        np.testing.assert_allclose(T[:, :, k], frame, atol=1e-14)
    smooth = synth_video([ModeSpec(1.0, 3.0), ModeSpec(0.2)], 7, 4, 3, dt, seed=1)
    assert smooth.shape == (7, 4, 3)
    with pytest.raises(ValueError):
        synth_video([ModeSpec(1.0, spatial=np.ones((2, 2)))], 3, 3, 4, 0.1)


def test_add_noise_statistics():
    X = np.zeros((100, 100))
    np.testing.assert_array_equal(add_noise(X, 0.0, seed=1), X)
    a, b = add_noise(X, 0.3, seed=7), add_noise(X, 0.3, seed=7)
    assert np.array_equal(a, b)
    assert abs(a.std() - 0.3) < 0.05 * 0.3
    assert abs(a.mean()) < 0.01
    with pytest.raises(ValueError):
        add_noise(X, -1.0)


def test_match_exact_recovery():
    specs = [ModeSpec(1.0, 5.0, 0.0), ModeSpec(0.5, 12.5, -0.2), ModeSpec(0.25, 0.0, 0.05)]
    V = synth_matrix(specs, 32, 100, 0.05, seed=0)
    exp, _ = run_hodmd(V, HODMDConfig(d=10, eps_svd=1e-10, eps_dmd=1e-10, dt=0.05))
    rep = match_spectra(specs, exp, tol_omega=0.1)
    assert rep.all_matched and not rep.unmatched_recovered
    assert rep.max_d_omega < 1e-9 and rep.max_d_delta < 1e-9 and rep.max_amplitude_error < 1e-9


def test_match_empty_truth():
    rec = Recovered([1.0, -1.0, 0.0], [0, 0, 0], [1.0, 1.0, 0.5])
    rep = match_spectra([], rec, 0.1)
    assert rep.pairs == [] and sorted(rep.unmatched_recovered) == [0, 2]


def test_match_order_invariant():
    specs = [ModeSpec(1.0, 5.0), ModeSpec(0.5, 5.05), ModeSpec(0.3, 9.0), ModeSpec(0.2)]
    rec = Recovered([5.02, -5.02, 9.01, 0.0, 5.1], [0, 0, 0, 0, 0], [1.0, 1.0, 0.3, 0.2, 0.5])
    base = match_spectra(specs, rec, 0.2)
    for perm in ([3, 2, 1, 0], [1, 0, 3, 2], [2, 3, 0, 1]):
        other = match_spectra([specs[i] for i in perm], rec, 0.2)
        assert other.pairs == base.pairs
        assert other.unmatched_truth == base.unmatched_truth
        assert other.unmatched_recovered == base.unmatched_recovered


def test_match_injective_and_noise_floor():
    specs = [ModeSpec(1.0, 5.0), ModeSpec(1.0, 5.01)]
    rec = Recovered([5.0, 7.0], [0, 0], [1.0, 1e-5])
    rep = match_spectra(specs, rec, 1.0)
    assert len(rep.pairs) == 1 and len(rep.unmatched_truth) == 1
    assert rep.noise_floor == [1] and rep.unmatched_recovered == []
    with pytest.raises(ValueError):
        match_spectra(specs, rec, 0.0)


def test_two_branch_surrogate_layout():
    s = two_branch_video(32, 32, 20, 4e-3, seed=0)
    up, lo = s.regions["upper"], s.regions["lower"]
    assert not np.any(up & lo)
    assert up.mean() > 0.1 and lo.mean() > 0.1
    freqs = sorted(sp.frequency for sp in s.specs if sp.frequency > 0)
    np.testing.assert_allclose(freqs, [bpm_to_rad(208), bpm_to_rad(633)])
    # The oscillating part of each branch stays inside its disk.
    osc = s.tensor - s.tensor.mean(axis=2, keepdims=True)
    energy = np.sum(osc**2, axis=2)
    assert energy[~(up | lo)].max() < 1e-20 * energy.max() + 1e-30
