"""Training-frame synthesis: codebooks, whitening and observation assembly.

Training uses M_t precoders and M_r combiners drawn from per-axis DFT
codebooks (column-wise Kronecker pairs).  Received frames are whitened with
the Cholesky factor of the combiner Gram matrix and stacked into the big
observation matrix, one transposed block per precoder/combiner pair.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, ChannelTaps
from .errors import ConfigError, ShapeMismatch, SingularCombiner


@dataclass(frozen=True)
class SoundingConfig:
    """Training-frame budget and radio parameters."""

    m_t: int = 4
    m_r: int = 16
    q: int = 48
    n_s: int = 1
    p_t: float = 10.0  # W (40 dBm)
    noise_var: float = 2.512e-13  # W, see harness defaults
    rng_seed: int = 0


@dataclass
class ObservationMatrix:
    """Stacked whitened observations, shape (q*m_t, n_s*m_r)."""

    y_m: np.ndarray
    whitened_combiners: list

    @property
    def w_m(self) -> np.ndarray:
        """Concatenation [W_1, ..., W_Mr] of the whitened combiners."""
        return np.concatenate(self.whitened_combiners, axis=1)


def dft_codebook(n: int) -> np.ndarray:
    """n orthonormal DFT columns; entry (k, i) = exp(j*k*2*pi*i/n)/sqrt(n)."""
    if n < 1:
        raise ValueError("codebook size must be >= 1")
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def beam_sine(index: int, n: int) -> float:
    """Sine-space pointing of DFT codeword `index`, wrapped into [-1, 1)."""
    u = -2.0 * index / n
    return u + 2.0 if u < -1.0 else u


def _codeword_pairs(n_x: int, n_y: int, count: int):
    """First `count` (azimuth, elevation) codeword pairs, broadside first.

    Pairs are ordered by beam distance from broadside (then deterministic
    index order), so a small training budget tiles the sector the array
    actually serves instead of scattering beams across the whole sphere.
    """
    if count > n_x * n_y:
        raise ConfigError(
            f"training set needs {count} codeword pairs, codebooks offer {n_x * n_y}"
        )
    pairs = [(ix, iy) for ix in range(n_x) for iy in range(n_y)]
    pairs.sort(
        key=lambda p: (
            beam_sine(p[0], n_x) ** 2 + beam_sine(p[1], n_y) ** 2,
            abs(beam_sine(p[0], n_x)),
            p,
        )
    )
    return pairs[:count]


def build_training_set(cfg: SoundingConfig, tx_geom: ArrayGeometry, rx_geom: ArrayGeometry):
    """Deterministic precoder and combiner banks (F_1..F_Mt, W_1..W_Mr).

    Each matrix column is the Kronecker product of one azimuth and one
    elevation DFT codeword, so all columns have unit norm.
    """
    cb_tx = dft_codebook(tx_geom.n_x), dft_codebook(tx_geom.n_y)
    cb_rx = dft_codebook(rx_geom.n_x), dft_codebook(rx_geom.n_y)
    tx_pairs = _codeword_pairs(tx_geom.n_x, tx_geom.n_y, cfg.m_t * cfg.n_s)
    rx_pairs = _codeword_pairs(rx_geom.n_x, rx_geom.n_y, cfg.m_r * cfg.n_s)

    def bank(pairs, cb, m):
        mats = []
        for i in range(m):
            cols = [np.kron(cb[0][:, ix], cb[1][:, iy]) for ix, iy in pairs[i * cfg.n_s : (i + 1) * cfg.n_s]]
            mats.append(np.stack(cols, axis=1))
        return mats

    return bank(tx_pairs, cb_tx, cfg.m_t), bank(rx_pairs, cb_rx, cfg.m_r)


def training_symbols(cfg: SoundingConfig) -> np.ndarray:
    """Pseudo-random unit-power QPSK block, shape (n_s, q), E[s s^H] = I/n_s."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 0x5F0]))
    bits = rng.integers(0, 4, size=(cfg.n_s, cfg.q))
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * bits)) / np.sqrt(cfg.n_s)


def shifted_symbol_matrix(symbols: np.ndarray, n_d: int) -> np.ndarray:
    """Lower block-Toeplitz symbol matrix, shape (n_d*n_s, q).

    Block row n holds the symbol block delayed by n with a zero prefix, so
    column q only touches s[q-n] for n < n_d.
    """
    n_s, q = symbols.shape
    out = np.zeros((n_d * n_s, q), dtype=complex)
    for n in range(n_d):
        out[n * n_s : (n + 1) * n_s, n:] = symbols[:, : q - n]
    return out


def whiten(w: np.ndarray):
    """Cholesky whitening of a combiner: returns (L, W_breve).

    W^H W = L L^H and W_breve = W L^{-H}, so W_breve^H W_breve = I.
    """
    gram = w.conj().T @ w
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as err:
        raise SingularCombiner("combiner Gram matrix is not positive definite") from err
    if np.linalg.cond(gram) > 1e12:
        raise SingularCombiner("combiner Gram matrix is numerically rank deficient")
    w_breve = np.linalg.solve(chol, w.conj().T).conj().T
    return chol, w_breve


def sound(
    taps: ChannelTaps,
    f: np.ndarray,
    w_breve: np.ndarray,
    symbols_shifted: np.ndarray,
    cfg: SoundingConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """One whitened received frame Y_breve (n_s x q).

    Y = sqrt(p_t) * W_breve^H [H_0 ... H_{Nd-1}] (I (x) F) S + W_breve^H N
    with per-element complex Gaussian noise of variance noise_var.  Applying
    the whitened combiner to the raw noise is identical to combining then
    multiplying by L^{-1}, and leaves covariance noise_var * I.
    """
    n_d = taps.n_taps
    n_r = taps.taps.shape[1]
    q = symbols_shifted.shape[1]
    h_flat = np.concatenate(list(taps.taps), axis=1)  # (n_r, n_d*n_t)
    big_f = np.kron(np.eye(n_d), f)
    signal = np.sqrt(cfg.p_t) * (w_breve.conj().T @ h_flat @ (big_f @ symbols_shifted))
    if cfg.noise_var > 0.0:
        scale = np.sqrt(cfg.noise_var / 2.0)
        raw = scale * (rng.standard_normal((n_r, q)) + 1j * rng.standard_normal((n_r, q)))
        signal = signal + w_breve.conj().T @ raw
    return signal


def sound_batch(
    taps: ChannelTaps,
    f_set,
    w_breve_set,
    symbols_shifted: np.ndarray,
    cfg: SoundingConfig,
    rng_for_pair,
) -> dict:
    """All (precoder, combiner) frames at once; maps (m_t, m_r) -> Y_breve.

    Precomputes the per-tap beamspace couplings W^H H_n F for every codeword
    so the per-pair work collapses to one small block convolution.  Agrees
    with per-pair :func:`sound` to numerical precision; ``rng_for_pair`` must
    yield the same stream per pair as the scalar path would use.
    """
    n_d = taps.n_taps
    n_r = taps.taps.shape[1]
    q = symbols_shifted.shape[1]
    f_cat = np.concatenate(f_set, axis=1)
    w_cat = np.concatenate(w_breve_set, axis=1)
    hf = np.einsum("nrt,tf->nrf", taps.taps, f_cat, optimize=True)
    whf = np.einsum("rw,nrf->nwf", w_cat.conj(), hf, optimize=True)
    scale = np.sqrt(cfg.p_t)
    blocks = {}
    for it in range(len(f_set)):
        for ir in range(len(w_breve_set)):
            g = whf[:, ir * cfg.n_s : (ir + 1) * cfg.n_s, it * cfg.n_s : (it + 1) * cfg.n_s]
            flat = np.concatenate(list(g), axis=1)  # (n_s, n_d*n_s)
            y = scale * (flat @ symbols_shifted)
            if cfg.noise_var > 0.0:
                rng = rng_for_pair(it, ir)
                noise_scale = np.sqrt(cfg.noise_var / 2.0)
                raw = noise_scale * (
                    rng.standard_normal((n_r, q)) + 1j * rng.standard_normal((n_r, q))
                )
                y = y + w_breve_set[ir].conj().T @ raw
            blocks[(it, ir)] = y
    return blocks


def assemble_observation(blocks, whitened_combiners, m_t: int, m_r: int) -> ObservationMatrix:
    """Stack per-pair frames into Y_M; blocks maps (m_t, m_r) -> Y_breve.

    Block (m_t, m_r) is entered transposed at rows q*m_t_idx, columns
    n_s*m_r_idx.  Insertion order does not matter.
    """
    if len(blocks) != m_t * m_r:
        raise ShapeMismatch(f"expected {m_t * m_r} blocks, got {len(blocks)}")
    shapes = {b.shape for b in blocks.values()}
    if len(shapes) != 1:
        raise ShapeMismatch(f"inconsistent block shapes: {sorted(shapes)}")
    n_s, q = shapes.pop()
    y_m = np.zeros((q * m_t, n_s * m_r), dtype=complex)
    for (it, ir), y in blocks.items():
        if not (0 <= it < m_t and 0 <= ir < m_r):
            raise ShapeMismatch(f"block index ({it}, {ir}) out of range")
        y_m[q * it : q * (it + 1), n_s * ir : n_s * (ir + 1)] = y.T
    return ObservationMatrix(y_m=y_m, whitened_combiners=list(whitened_combiners))


def save_observation(path, y_m: np.ndarray) -> None:
    """Binary layout: little-endian uint64 {rows, cols}, then row-major
    interleaved re/im float64 pairs."""
    rows, cols = y_m.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", rows, cols))
        inter = np.empty((rows, cols, 2), dtype="<f8")
        inter[..., 0] = y_m.real
        inter[..., 1] = y_m.imag
        inter.tofile(fh)


def load_observation(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = struct.unpack("<QQ", fh.read(16))
        inter = np.fromfile(fh, dtype="<f8", count=rows * cols * 2)
    if inter.size != rows * cols * 2:
        raise ShapeMismatch(f"truncated observation file {path}")
    inter = inter.reshape(rows, cols, 2)
    return inter[..., 0] + 1j * inter[..., 1]
