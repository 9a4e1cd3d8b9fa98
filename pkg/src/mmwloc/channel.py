"""Uniform planar array responses and discrete-time channel taps.

Conventions used throughout the toolkit:

* arrays live in a plane normal to the global x axis with half-wavelength
  element spacing; element (n_x, n_y) sits at offsets ((n_x-1), (n_y-1)) * lambda/2
  along the global y and z axes,
* a propagation direction is a 3D unit vector d; the array only observes the
  pair of spatial frequencies (u, v) = (d[1], d[2]),
* the element phase is exp(-j*pi*((n_x-1)*u + (n_y-1)*v)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DelayOverflow

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Element counts of a uniform planar array (half-wavelength spacing)."""

    n_x: int
    n_y: int

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("array must have at least one element per axis")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y


def steering_factors(direction: np.ndarray, geom: ArrayGeometry):
    """Per-axis steering vectors (a_x, a_y) for a unit propagation direction.

    a_x[n] = exp(-j*pi*n*u) with u = direction[1], n = 0..n_x-1, and
    a_y[n] = exp(-j*pi*n*v) with v = direction[2].  The full array response is
    their Kronecker product, see :func:`steering_vector`.
    """
    u = float(direction[1])
    v = float(direction[2])
    a_x = np.exp(-1j * np.pi * np.arange(geom.n_x) * u)
    a_y = np.exp(-1j * np.pi * np.arange(geom.n_y) * v)
    return a_x, a_y


def steering_vector(direction: np.ndarray, geom: ArrayGeometry) -> np.ndarray:
    """Array response vector of length n_x*n_y for a unit direction.

    Entry (n_x_idx-1)*n_y + n_y_idx (1-based) equals
    exp(-j*pi*((n_x_idx-1)*u + (n_y_idx-1)*v)); equivalently the Kronecker
    product a_x (x) a_y of the per-axis factors.
    """
    a_x, a_y = steering_factors(direction, geom)
    return np.kron(a_x, a_y)


def raised_cosine(t, beta: float, ts: float):
    """Raised-cosine pulse value(s) at time t (seconds).

    Unit peak at t=0 and exact zeros at nonzero integer multiples of ts.  The
    removable singularity at |t| = ts/(2*beta) is replaced by its limit
    (pi/4)*sinc(1/(2*beta)).  Accepts scalars or arrays.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("roll-off factor must lie in [0, 1]")
    x = np.asarray(t, dtype=float) / ts
    out = np.sinc(x)
    if beta > 0.0:
        denom = 1.0 - (2.0 * beta * x) ** 2
        singular = np.isclose(denom, 0.0, atol=1e-12)
        safe = np.where(singular, 1.0, denom)
        out = out * np.cos(np.pi * beta * x) / safe
        limit = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta))
        out = np.where(singular, limit, out)
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TapConfig:
    """Dimensions of the discrete-time frequency-selective channel."""

    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    n_taps: int = 32
    ts: float = 1e-9
    beta: float = 0.4
    pulse_span: int = 8  # pulse truncated to +-pulse_span*ts when accumulating


@dataclass
class ChannelTaps:
    """Stack of N_d complex tap matrices, shape (n_taps, n_rx, n_tx)."""

    taps: np.ndarray

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]


def channel_taps(paths, t0: float, cfg: TapConfig) -> ChannelTaps:
    """Superpose multipath components into pulse-shaped channel taps.

    Tap n equals sum_l gain_l * f_p(n*ts - (toa_l - t0)) * a_r(doa_l) a_t(dod_l)^H.
    Every relative delay toa_l - t0 must fall inside [0, (n_taps-1)*ts).
    """
    n_rx = cfg.rx_geom.n_elements
    n_tx = cfg.tx_geom.n_elements
    taps = np.zeros((cfg.n_taps, n_rx, n_tx), dtype=complex)
    for path in paths:
        tau = path.toa_s - t0
        if tau < 0.0 or tau >= (cfg.n_taps - 1) * cfg.ts:
            raise DelayOverflow(
                f"relative delay {tau:.3e} s outside [0, {(cfg.n_taps - 1) * cfg.ts:.3e}) s"
            )
        a_r = steering_vector(path.doa, cfg.rx_geom)
        a_t = steering_vector(path.dod, cfg.tx_geom)
        outer = path.gain * np.outer(a_r, a_t.conj())
        center = tau / cfg.ts
        lo = max(0, int(np.ceil(center - cfg.pulse_span)))
        hi = min(cfg.n_taps - 1, int(np.floor(center + cfg.pulse_span)))
        n_idx = np.arange(lo, hi + 1)
        weights = raised_cosine(n_idx * cfg.ts - tau, cfg.beta, cfg.ts)
        taps[lo : hi + 1] += weights[:, None, None] * outer[None, :, :]
    return ChannelTaps(taps=taps)
