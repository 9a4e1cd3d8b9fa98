import numpy as np
import pytest

from mmwloc.channel import ArrayGeometry, TapConfig, channel_taps, steering_vector
from mmwloc.errors import ConfigError, ShapeMismatch, SingularCombiner
from mmwloc.scene import PathRecord
from mmwloc.sounding import (
    SoundingConfig,
    assemble_observation,
    beam_sine,
    build_training_set,
    dft_codebook,
    load_observation,
    save_observation,
    shifted_symbol_matrix,
    sound,
    sound_batch,
    training_symbols,
    whiten,
)

TX = ArrayGeometry(4, 2)
RX = ArrayGeometry(2, 2)


def test_dft_codebook_trivial_and_orthonormal():
    assert np.allclose(dft_codebook(1), [[1.0]])
    cb = dft_codebook(4)
    assert np.allclose(cb.conj().T @ cb, np.eye(4), atol=1e-12)
    assert np.allclose(dft_codebook(8)[:, 0], np.full(8, 1 / np.sqrt(8)))


def test_training_set_columns_unit_norm_distinct():
    cfg = SoundingConfig(m_t=4, m_r=4, q=8, n_s=1)
    f_set, w_set = build_training_set(cfg, TX, RX)
    assert len(f_set) == 4 and len(w_set) == 4
    cols = np.stack([f[:, 0] for f in f_set])
    assert np.allclose(np.linalg.norm(cols, axis=1), 1.0, atol=1e-12)
    gram = np.abs(cols.conj() @ cols.T)
    assert np.all(gram - np.eye(4) < 1 - 1e-6)  # pairwise distinct beams


def test_training_set_deterministic_and_broadside_first():
    cfg = SoundingConfig(m_t=2, m_r=2, q=8, n_s=2)
    a = build_training_set(cfg, TX, RX)
    b = build_training_set(cfg, TX, RX)
    for fa, fb in zip(a[0], b[0]):
        assert np.array_equal(fa, fb)
    # first beam is the broadside pair
    assert np.allclose(a[0][0][:, 0], np.kron(dft_codebook(4)[:, 0], dft_codebook(2)[:, 0]))


def test_training_set_pool_exhausted():
    with pytest.raises(ConfigError):
        build_training_set(SoundingConfig(m_t=5, m_r=1, q=8, n_s=2), RX, RX)


def test_beam_sine_wraps():
    assert beam_sine(0, 8) == 0.0
    assert beam_sine(4, 8) == -1.0
    assert beam_sine(6, 8) == pytest.approx(0.5)


def test_shifted_symbols_layout():
    s = np.arange(1, 7).reshape(2, 3) + 0j  # n_s=2, q=3
    out = shifted_symbol_matrix(s, 2)
    assert np.allclose(out[0:2], s)
    assert np.allclose(out[2:4, 0], 0.0)
    assert np.allclose(out[2:4, 1:], s[:, :2])
    assert np.allclose(shifted_symbol_matrix(s, 1), s)


def test_symbols_unit_power():
    cfg = SoundingConfig(n_s=2, q=5000)
    s = training_symbols(cfg)
    cov = s @ s.conj().T / cfg.q
    assert np.allclose(cov, np.eye(2) / 2, atol=0.05)
    assert np.allclose(np.abs(s), 1 / np.sqrt(2))


def test_whiten_orthonormal_is_identity():
    w = dft_codebook(4)[:, :2]
    chol, w_breve = whiten(w)
    assert np.allclose(chol, np.eye(2), atol=1e-12)
    assert np.allclose(w_breve, w)


def test_whiten_random_full_rank():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    chol, w_breve = whiten(w)
    assert np.allclose(w_breve.conj().T @ w_breve, np.eye(3), atol=1e-10)
    assert np.allclose(chol @ chol.conj().T, w.conj().T @ w, atol=1e-10)


def test_whiten_rank_deficient():
    w = np.ones((4, 2), dtype=complex)
    with pytest.raises(SingularCombiner):
        whiten(w)


def _unit(v):
    return np.asarray(v, float) / np.linalg.norm(v)


def test_sound_zero_channel_noiseless():
    cfg = SoundingConfig(m_t=1, m_r=1, q=8, n_s=1, noise_var=0.0)
    f_set, w_set = build_training_set(cfg, TX, RX)
    _, w_breve = whiten(w_set[0])
    taps = channel_taps([], 0.0, TapConfig(TX, RX, n_taps=4, ts=1e-9))
    s = shifted_symbol_matrix(training_symbols(cfg), 4)
    y = sound(taps, f_set[0], w_breve, s, cfg, np.random.default_rng(0))
    assert not y.any()


def test_sound_aligned_single_path_gain():
    # a path exactly on the broadside beam of both ends couples with the full
    # array gains sqrt(n_t * n_r)
    cfg = SoundingConfig(m_t=1, m_r=1, q=16, n_s=1, p_t=4.0, noise_var=0.0)
    f_set, w_set = build_training_set(cfg, TX, RX)
    _, w_breve = whiten(w_set[0])
    doa = _unit([-1.0, 0.0, 0.0])
    dod = _unit([1.0, 0.0, 0.0])
    path = PathRecord(gain=1e-3, toa_s=3e-9, doa=doa, dod=dod, order=0, interaction_points=[])
    tap_cfg = TapConfig(TX, RX, n_taps=8, ts=1e-9)
    taps = channel_taps([path], 0.0, tap_cfg)
    symbols = training_symbols(cfg)
    y = sound(taps, f_set[0], w_breve, shifted_symbol_matrix(symbols, 8), cfg, np.random.default_rng(0))
    expected_scale = np.sqrt(cfg.p_t) * 1e-3 * np.sqrt(TX.n_elements * RX.n_elements)
    # column q is dominated by the delayed symbol s[q-3]
    assert np.abs(y[0, 10]) == pytest.approx(expected_scale * np.abs(symbols[0, 7]), rel=1e-9)


def test_noise_covariance_identity_small():
    cfg = SoundingConfig(m_t=1, m_r=1, q=200, n_s=2, noise_var=0.3)
    rng = np.random.default_rng(1)
    w = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    _, w_breve = whiten(w)
    taps = channel_taps([], 0.0, TapConfig(TX, ArrayGeometry(2, 2), n_taps=4, ts=1e-9))
    s = np.zeros((2 * 4, cfg.q), dtype=complex)
    samples = []
    for k in range(50):
        y = sound(taps, np.zeros((TX.n_elements, 2)), w_breve, s, cfg, np.random.default_rng(k))
        samples.append(y.reshape(2, -1))
    stacked = np.concatenate(samples, axis=1)
    cov = stacked @ stacked.conj().T / stacked.shape[1]
    assert np.linalg.norm(cov - cfg.noise_var * np.eye(2)) / np.linalg.norm(
        cfg.noise_var * np.eye(2)
    ) < 0.05


def test_assemble_layout_and_permutation_invariance():
    rng = np.random.default_rng(3)
    blocks = {}
    for it in range(2):
        for ir in range(3):
            blocks[(it, ir)] = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    w = [np.eye(2)] * 3
    obs = assemble_observation(blocks, w, m_t=2, m_r=3)
    assert obs.y_m.shape == (8, 6)
    assert np.allclose(obs.y_m[4:8, 2:4], blocks[(1, 1)].T)
    shuffled = dict(reversed(list(blocks.items())))
    obs2 = assemble_observation(shuffled, w, m_t=2, m_r=3)
    assert np.array_equal(obs.y_m, obs2.y_m)


def test_assemble_single_pair_is_transpose():
    y = np.arange(6).reshape(2, 3) + 0j
    obs = assemble_observation({(0, 0): y}, [np.eye(2)], 1, 1)
    assert np.array_equal(obs.y_m, y.T)


def test_assemble_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        assemble_observation({(0, 0): np.zeros((2, 3))}, [], 1, 2)
    blocks = {(0, 0): np.zeros((2, 3)), (0, 1): np.zeros((2, 4))}
    with pytest.raises(ShapeMismatch):
        assemble_observation(blocks, [], 1, 2)


def test_energy_invariant_under_unitary_rewhitening():
    cfg = SoundingConfig(m_t=2, m_r=2, q=16, n_s=1, noise_var=0.0)
    f_set, w_set = build_training_set(cfg, TX, RX)
    w_breves = [whiten(w)[1] for w in w_set]
    doa = _unit([-0.8, 0.4, 0.2])
    dod = _unit([0.9, -0.3, 0.1])
    path = PathRecord(gain=1e-3, toa_s=4e-9, doa=doa, dod=dod, order=0, interaction_points=[])
    taps = channel_taps([path], 0.0, TapConfig(TX, RX, n_taps=8, ts=1e-9))
    s = shifted_symbol_matrix(training_symbols(cfg), 8)
    rng = np.random.default_rng(0)
    base = {}
    rew = {}
    unitary = np.linalg.qr(rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1)))[0]
    for it, f in enumerate(f_set):
        for ir, wb in enumerate(w_breves):
            base[(it, ir)] = sound(taps, f, wb, s, cfg, np.random.default_rng(0))
            rew[(it, ir)] = sound(taps, f, wb @ unitary, s, cfg, np.random.default_rng(0))
    n1 = np.linalg.norm(assemble_observation(base, w_breves, 2, 2).y_m)
    n2 = np.linalg.norm(assemble_observation(rew, w_breves, 2, 2).y_m)
    assert n1 == pytest.approx(n2, rel=1e-10)


def test_sound_batch_matches_per_pair():
    cfg = SoundingConfig(m_t=2, m_r=3, q=12, n_s=1, noise_var=1e-6)
    f_set, w_set = build_training_set(cfg, TX, RX)
    w_breves = [whiten(w)[1] for w in w_set]
    doa = _unit([-0.8, 0.4, 0.2])
    dod = _unit([0.9, -0.3, 0.1])
    path = PathRecord(gain=1e-3, toa_s=2e-9, doa=doa, dod=dod, order=0, interaction_points=[])
    taps = channel_taps([path], 0.0, TapConfig(TX, RX, n_taps=6, ts=1e-9))
    s = shifted_symbol_matrix(training_symbols(cfg), 6)

    def rng_for(it, ir):
        return np.random.default_rng(1000 + 10 * it + ir)

    batch = sound_batch(taps, f_set, w_breves, s, cfg, rng_for)
    for it, f in enumerate(f_set):
        for ir, wb in enumerate(w_breves):
            direct = sound(taps, f, wb, s, cfg, rng_for(it, ir))
            assert np.allclose(batch[(it, ir)], direct, atol=1e-12)


def test_observation_linear_in_taps():
    cfg = SoundingConfig(m_t=1, m_r=1, q=16, n_s=1, noise_var=0.0)
    f_set, w_set = build_training_set(cfg, TX, RX)
    _, w_breve = whiten(w_set[0])
    tap_cfg = TapConfig(TX, RX, n_taps=8, ts=1e-9)
    p1 = PathRecord(gain=1e-3, toa_s=2e-9, doa=_unit([-0.9, 0.3, 0.1]), dod=_unit([0.8, 0.5, 0.2]),
                    order=0, interaction_points=[])
    p2 = PathRecord(gain=5e-4j, toa_s=5e-9, doa=_unit([-0.7, -0.5, 0.3]), dod=_unit([0.9, -0.2, 0.1]),
                    order=0, interaction_points=[])
    s = shifted_symbol_matrix(training_symbols(cfg), 8)
    rng = np.random.default_rng(0)
    both = sound(channel_taps([p1, p2], 0.0, tap_cfg), f_set[0], w_breve, s, cfg, rng)
    one = sound(channel_taps([p1], 0.0, tap_cfg), f_set[0], w_breve, s, cfg, rng)
    two = sound(channel_taps([p2], 0.0, tap_cfg), f_set[0], w_breve, s, cfg, rng)
    assert np.allclose(both, one + two, atol=1e-15)


def test_observation_binary_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    y = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    path = tmp_path / "obs.bin"
    save_observation(path, y)
    back = load_observation(path)
    assert np.array_equal(back, y)
