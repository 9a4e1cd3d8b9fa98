"""Shared fixtures: planted on-grid channels and tiny oracle instances."""

import numpy as np
import pytest

from mmwloc.channel import ArrayGeometry, TapConfig, channel_taps
from mmwloc.recovery import build_estimator_context, lift_unit_vector
from mmwloc.scene import PathRecord
from mmwloc.sounding import SoundingConfig, assemble_observation, shifted_symbol_matrix, sound_batch


def plant_channel(ctx, picks, noise_seed=0):
    """Observation matrix for paths planted exactly on grid atoms.

    ``picks`` is a list of (j1, j2, j3, j4, j5, complex gain).  The tap
    builder must not truncate the pulse (pulse_span >= n_taps) or planted
    gains drift off the dictionary model at the 1e-3 level.
    """
    d = ctx.dictionaries
    paths = []
    for (j1, j2, j3, j4, j5, alpha) in picks:
        paths.append(
            PathRecord(
                gain=alpha,
                toa_s=float(d.delay_grid[j3]),
                doa=lift_unit_vector(d.u_doa[j4], d.v_doa[j5], -1.0),
                dod=lift_unit_vector(d.u_dod[j1], d.v_dod[j2], 1.0),
                order=1,
                interaction_points=[np.zeros(3)],
            )
        )
    taps = channel_taps(paths, 0.0, ctx.tap_cfg)

    def rng_for(it, ir):
        return np.random.default_rng(np.random.SeedSequence([noise_seed, it, ir]))

    blocks = sound_batch(taps, ctx.f_set, ctx.w_breve_set, ctx.symbols_shifted, ctx.sounding, rng_for)
    return assemble_observation(blocks, ctx.w_breve_set, ctx.sounding.m_t, ctx.sounding.m_r), blocks


def random_on_grid_picks(d, rng, n_paths, k_res, min_sep=3, delay_lo=4, delay_hi=None):
    """Random well-separated on-grid supports avoiding unphysical corners and
    codebook-null directions (atoms exactly orthogonal to every training beam
    are invisible to any estimator)."""
    n1, n2 = d.psi1.shape[1], d.psi2.shape[1]
    n4, n5 = d.psi4.shape[1], d.psi5.shape[1]
    if delay_hi is None:
        delay_hi = int(0.75 * d.psi3.shape[1])
    picks = []
    used = []
    for _ in range(n_paths):
        for _ in range(2000):
            j1, j2 = int(rng.integers(n1)), int(rng.integers(n2))
            j3 = int(rng.integers(delay_lo, delay_hi))
            j4, j5 = int(rng.integers(n4)), int(rng.integers(n5))
            if k_res > 1 and (j1 % k_res == 0 or j2 % k_res == 0):
                continue
            if d.u_dod[j1] ** 2 + d.v_dod[j2] ** 2 > 0.9:
                continue
            if d.u_doa[j4] ** 2 + d.v_doa[j5] ** 2 > 0.9:
                continue
            if all(
                abs(j1 - u[0]) >= min_sep and abs(j2 - u[1]) >= min_sep and abs(j3 - u[2]) >= min_sep
                for u in used
            ):
                used.append((j1, j2, j3))
                break
        else:
            raise RuntimeError("could not place a separated support")
        amp = rng.uniform(0.5, 2.0)
        phase = rng.uniform(-np.pi, np.pi)
        picks.append((j1, j2, j3, j4, j5, amp * np.exp(1j * phase) * 1e-6))
    return picks


@pytest.fixture(scope="session")
def desk_ctx():
    """Desk-scale estimator context with an untruncated pulse for planting."""
    tap = TapConfig(ArrayGeometry(8, 8), ArrayGeometry(4, 4), n_taps=32, ts=1e-9, pulse_span=32)
    scfg = SoundingConfig(m_t=8, m_r=16, q=48, n_s=1, p_t=10.0, noise_var=0.0, rng_seed=0)
    return build_estimator_context(scfg, tap, k_res=4, n_est=3)


@pytest.fixture(scope="session")
def tiny_ctx():
    """Tiny full-coverage instance for the vectorized-oracle comparisons."""
    tap = TapConfig(ArrayGeometry(4, 2), ArrayGeometry(2, 2), n_taps=8, ts=1e-9, pulse_span=8)
    scfg = SoundingConfig(m_t=8, m_r=4, q=16, n_s=1, p_t=1.0, noise_var=0.0, rng_seed=0)
    return build_estimator_context(scfg, tap, k_res=2, n_est=1)
