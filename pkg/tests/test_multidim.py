import warnings

import numpy as np
import pytest

from hodmd.hodmd import HODMDConfig, reconstruct, run_hodmd
from hodmd.multidim import TensorDMDExpansion, run_multidim_hodmd
from hodmd.synth import ModeSpec, match_spectra, synth_video

EXACT = dict(eps_svd=1e-10, eps_dmd=1e-10)


def two_frequency_video(seed=0, I1=12, I2=10, K=60, dt=0.02):
    specs = [ModeSpec(1.0, 9.0, -0.05, 0.3), ModeSpec(0.4, 23.0, 0.0, 1.1)]
    return specs, synth_video(specs, I1, I2, K, dt, seed=seed)


def test_single_stationary_mode_fixed_point():
    field = np.outer(np.linspace(1, 2, 6), np.linspace(-1, 1, 5))
    T = np.repeat(field[:, :, None], 20, axis=2)
    exp, trace = run_multidim_hodmd(T, HODMDConfig(d=2, dt=0.1, **EXACT), eps_spatial=1e-10)
    assert trace.converged and len(trace) <= 2
    assert exp.num_modes == 1
    assert trace.records[-1].rrmse < 1e-8


def test_two_frequency_video_recovery():
    specs, T = two_frequency_video()
    exp, trace = run_multidim_hodmd(T, HODMDConfig(d=6, dt=0.02, **EXACT), eps_spatial=1e-10)
    assert trace.converged and len(trace) <= 5
    rep = match_spectra(specs, exp, tol_omega=0.5)
    assert rep.all_matched and rep.max_d_omega < 1e-6
    assert exp.spatial_modes.shape[:2] == (12, 10)
    norms = np.linalg.norm(exp.spatial_modes.reshape(-1, exp.num_modes), axis=0)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_single_pass_trace():
    _, T = two_frequency_video()
    _, trace = run_multidim_hodmd(T, HODMDConfig(d=6, dt=0.02, **EXACT), max_iters=1)
    assert len(trace) == 1 and not trace.converged


def test_argument_errors():
    _, T = two_frequency_video(K=10)
    with pytest.raises(ValueError):
        run_multidim_hodmd(T, HODMDConfig(d=9, dt=0.02))
    with pytest.raises(ValueError):
        run_multidim_hodmd(T, HODMDConfig(d=2, dt=0.02), max_iters=0)


def test_flattening_equivalence():
    _, T = two_frequency_video(seed=3)
    cfg = HODMDConfig(d=6, dt=0.02, **EXACT)
    exp, _ = run_multidim_hodmd(T, cfg, eps_spatial=0.0, max_iters=1)
    flat, _ = run_hodmd(T.reshape(-1, T.shape[2], order="F"), cfg)
    np.testing.assert_allclose(np.sort(exp.frequencies), np.sort(flat.frequencies), atol=1e-8)


def test_fixed_point_on_own_reconstruction():
    _, T = two_frequency_video(seed=4)
    cfg = HODMDConfig(d=6, dt=0.02, **EXACT)
    exp, trace = run_multidim_hodmd(T, cfg, eps_spatial=1e-10)
    m = exp.as_matrix_expansion()
    again = reconstruct(m, m.sample_times()).reshape(T.shape, order="F")
    exp2, trace2 = run_multidim_hodmd(again, cfg, eps_spatial=1e-10)
    assert trace2.records[0].ranks == trace.records[-1].ranks
    assert abs(trace2.records[-1].rrmse - 0.0) < 1e-8


def test_rrmse_nonincreasing_on_noisy_video():
    rng = np.random.default_rng(5)
    _, T = two_frequency_video(seed=5, K=80)
    T = T + 1e-3 * np.abs(T).max() * rng.standard_normal(T.shape)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        _, trace = run_multidim_hodmd(T, HODMDConfig(d=8, dt=0.02, eps_svd=1e-2, eps_dmd=1e-2), eps_spatial=1e-2)
    errs = [r.rrmse for r in trace.records]
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


def test_matrix_expansion_round_trip():
    _, T = two_frequency_video()
    exp, _ = run_multidim_hodmd(T, HODMDConfig(d=6, dt=0.02, **EXACT), eps_spatial=1e-10)
    back = TensorDMDExpansion.from_matrix_expansion(exp.as_matrix_expansion(), (12, 10))
    np.testing.assert_array_equal(back.spatial_modes, exp.spatial_modes)
