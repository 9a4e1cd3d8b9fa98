"""Two-stage greedy sparse channel estimation.

Stage 1 recovers, per path, the departure angles (azimuth/elevation grid),
the delay bin and an "equivalent gain" row that folds the complex gain, the
arrival steering vector and all combiners.  It matches the residual against
three small per-dimension dictionaries instead of one giant Kronecker
dictionary, which is what keeps the search tractable at high resolution.
Stage 2 retrieves the arrival angles from each equivalent-gain row by
correlating against the two arrival dictionaries.

A classical vectorized pursuit over the full Kronecker dictionary is kept as
a correctness oracle for tiny instances (:func:`omp_reference`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, TapConfig, raised_cosine
from .errors import ConvergenceWarning, SizeCap
from .sounding import (
    SoundingConfig,
    build_training_set,
    shifted_symbol_matrix,
    training_symbols,
    whiten,
)


def uv_grid(n_atoms: int) -> np.ndarray:
    """Uniform grid over the sine-space interval [-1, 1) with n_atoms points."""
    return -1.0 + 2.0 * np.arange(n_atoms) / n_atoms


def lift_unit_vector(u: float, v: float, x_sign: float = 1.0) -> np.ndarray:
    """3D unit vector with y, z components (u, v) and x of the given sign.

    Grid corners with u^2 + v^2 > 1 have no physical direction; they are
    clamped onto the yz unit circle.
    """
    w2 = 1.0 - u * u - v * v
    if w2 <= 0.0:
        vec = np.array([0.0, u, v])
        return vec / np.linalg.norm(vec)
    return np.array([x_sign * np.sqrt(w2), u, v])


@dataclass
class DictionarySet:
    """The five on-grid dictionaries plus their sine/delay grids.

    psi1/psi2 sample the conjugated departure steering factors (the channel
    carries the conjugate-transposed transmit response), psi3 holds shifted
    pulse samplings, psi4/psi5 the arrival steering factors.
    """

    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray
    psi4: np.ndarray
    psi5: np.ndarray
    k_res: int
    u_dod: np.ndarray = field(repr=False, default=None)
    v_dod: np.ndarray = field(repr=False, default=None)
    u_doa: np.ndarray = field(repr=False, default=None)
    v_doa: np.ndarray = field(repr=False, default=None)
    delay_grid: np.ndarray = field(repr=False, default=None)

    @property
    def stage1(self):
        return self.psi1, self.psi2, self.psi3


def build_dictionaries(tap_cfg: TapConfig, k_res: int) -> DictionarySet:
    """On-grid dictionaries with k_res atoms per signal dimension sample.

    Angular atoms are uniform in sine space; delay atoms are the pulse
    sampled at j*ts/k_res, j = 0..n_atoms-1.
    """
    if k_res < 1:
        raise ValueError("k_res must be >= 1")

    def angular(n_elem: int, conjugate: bool) -> tuple:
        grid = uv_grid(k_res * n_elem)
        phase = -1j * np.pi * np.outer(np.arange(n_elem), grid)
        psi = np.exp(-phase) if conjugate else np.exp(phase)
        return psi, grid

    psi1, u_dod = angular(tap_cfg.tx_geom.n_x, conjugate=True)
    psi2, v_dod = angular(tap_cfg.tx_geom.n_y, conjugate=True)
    psi4, u_doa = angular(tap_cfg.rx_geom.n_x, conjugate=False)
    psi5, v_doa = angular(tap_cfg.rx_geom.n_y, conjugate=False)
    n3 = k_res * tap_cfg.n_taps
    delay_grid = np.arange(n3) * tap_cfg.ts / k_res
    sample_times = np.arange(tap_cfg.n_taps) * tap_cfg.ts
    psi3 = raised_cosine(sample_times[:, None] - delay_grid[None, :], tap_cfg.beta, tap_cfg.ts)
    return DictionarySet(
        psi1=psi1,
        psi2=psi2,
        psi3=psi3.astype(complex),
        psi4=psi4,
        psi5=psi5,
        k_res=k_res,
        u_dod=u_dod,
        v_dod=v_dod,
        u_doa=u_doa,
        v_doa=v_doa,
        delay_grid=delay_grid,
    )


@dataclass
class MeasurementTensor:
    """Precoder-side sensing tensor, shape (q*m_t, n_tx_x, n_tx_y, n_d)."""

    phi: np.ndarray


def build_measurement_tensor(f_set, symbols: np.ndarray, n_d: int, tx_geom: ArrayGeometry) -> MeasurementTensor:
    """Entry [q*m_t + q', (i1, i2, i3)] = [F_mt s[q' - i3]]_{i1*n_y + i2}."""
    q = symbols.shape[1]
    s_shift = shifted_symbol_matrix(symbols, n_d)
    blocks = []
    for f in f_set:
        x = np.kron(np.eye(n_d), f) @ s_shift  # (n_d*n_t, q)
        x = x.reshape(n_d, tx_geom.n_x, tx_geom.n_y, q)
        blocks.append(np.transpose(x, (3, 1, 2, 0)))
    return MeasurementTensor(phi=np.concatenate(blocks, axis=0))


@dataclass
class Stage1Path:
    indices: tuple  # (j1, j2, j3)
    beta: np.ndarray


@dataclass
class Stage1Result:
    paths: list
    residual_norms: list


def _sensing_column(phi: np.ndarray, psis, indices) -> np.ndarray:
    a1 = psis[0][:, indices[0]]
    a2 = psis[1][:, indices[1]]
    a3 = psis[2][:, indices[2]]
    return np.einsum("lxyd,x,y,d->l", phi, a1, a2, a3, optimize=True)


def momp_stage1(
    y_m: np.ndarray,
    phi: MeasurementTensor,
    psi1: np.ndarray,
    psi2: np.ndarray,
    psi3: np.ndarray,
    n_est: int,
    n_iter: int = 3,
) -> Stage1Result:
    """Greedy multidimensional pursuit over (departure az, el, delay).

    Per extracted path: (a) initialise the delay bin from its marginalised
    residual correlation, then both angle bins from a joint normalized scan
    with the delay fixed (a delay-last sequential sweep starts the angle
    search in the training beams' basin instead of the path's when the
    precoder budget is small, and the coordinate refinement cannot escape
    it), (b) refine each index in turn for n_iter rounds against the fully
    contracted, norm-weighted sensing columns, (c) jointly refit all selected
    rows by least squares, (d) update the residual.  Ties always resolve to
    the lowest grid index (numpy argmax semantics).
    """
    if n_est < 1:
        raise ValueError("n_est must be >= 1")
    tensor = phi.phi
    psis = (psi1, psi2, psi3)
    rows, n_x, n_y, n_d = tensor.shape
    # Two contiguous layouts so every heavy contraction is a free-reshape GEMM.
    flat_xy_d = tensor.reshape(rows * n_x * n_y, n_d)
    tensor_dxy = np.ascontiguousarray(tensor.transpose(0, 3, 1, 2))
    flat_d_xy = tensor_dxy.reshape(rows * n_d, n_x * n_y)
    y = y_m
    residual = y.copy()
    selected = []
    columns = []
    residual_norms = []
    prev_norm = np.linalg.norm(y)
    psi3_norms = np.linalg.norm(psi3, axis=0)

    def delay_matrix(j1, j2):
        """Sensing columns along the delay axis with angles fixed, (rows, N3a)."""
        pair = np.kron(psi1[:, j1], psi2[:, j2])
        return (flat_d_xy @ pair).reshape(rows, n_d) @ psi3

    def angle_matrix(slab, k, j_other):
        """Sensing columns along one angle axis with the other two fixed."""
        if k == 0:
            return np.einsum("lxy,y->lx", slab, psi2[:, j_other], optimize=True) @ psi1
        return np.einsum("lxy,x->ly", slab, psi1[:, j_other], optimize=True) @ psi2

    def column_norms_sq(cand):
        # Avoids conjugating the (large) candidate matrix.
        return np.einsum("lj,lj->j", cand.real, cand.real) + np.einsum(
            "lj,lj->j", cand.imag, cand.imag
        )

    q_basis = None  # orthonormal span of the fixed columns during a pick

    def normalized_scores(cand):
        """Residual correlation per candidate, normalized by the candidate's
        norm in the quotient space of the fixed columns (orthogonal least
        squares); with coherent fine grids, plain matched-filter
        normalization flips near-ties between neighbouring atoms."""
        proj = residual.conj().T @ cand  # (obs, atoms); conj on the small side
        scores = np.linalg.norm(proj, axis=0)
        norms_sq = column_norms_sq(cand)
        if q_basis is not None:
            norms_sq = norms_sq - np.linalg.norm(q_basis.conj().T @ cand, axis=0) ** 2
        norms = np.sqrt(np.maximum(norms_sq, 0.0))
        floor = 1e-6 * np.sqrt(max(norms_sq.max(), 1e-300))
        return np.divide(scores, norms, out=np.zeros_like(scores), where=norms > floor)

    def normalized_argmax(cand):
        return int(np.argmax(normalized_scores(cand)))

    phi_h = tensor.reshape(rows, -1).conj().T  # (x*y*d, rows)
    n1a, n2a = psi1.shape[1], psi2.shape[1]

    def pick_support(target, fixed_columns=(), init_indices=None):
        """Delay-marginal init, joint angle scan, then alternating polish.

        The delay marginal is well conditioned for any training set; the
        angle pair is scanned jointly with the delay fixed.  ``fixed_columns``
        are already-committed sensing columns the scores must discount.  With
        ``init_indices`` the global scans are skipped and only the (cheap)
        alternating polish runs: used when re-picking a support that can be
        at most a couple of cells off.
        """
        nonlocal residual, q_basis
        saved, residual = residual, target
        if len(fixed_columns):
            q_basis = np.linalg.qr(np.stack(fixed_columns, axis=1))[0]
        try:
            if init_indices is None:
                corr = (phi_h @ target).reshape(n_x * n_y, n_d, -1)
                t3 = psi3.conj().T @ corr.transpose(1, 0, 2).reshape(n_d, -1)
                m3 = np.linalg.norm(t3, axis=1)
                m3 = np.divide(m3, psi3_norms, out=np.zeros_like(m3), where=psi3_norms > 0)
                j3 = int(np.argmax(m3))
                slab = (flat_xy_d @ psi3[:, j3]).reshape(rows, n_x, n_y)

                def scan(sel1, sel2):
                    sub = np.tensordot(slab, psi1[:, sel1], axes=([1], [0]))
                    part = np.ascontiguousarray(sub.transpose(0, 2, 1))
                    cand = (part.reshape(rows * len(sel1), n_y) @ psi2[:, sel2]).reshape(
                        rows, len(sel1) * len(sel2)
                    )
                    k = int(np.argmax(normalized_scores(cand)))
                    return int(sel1[k // len(sel2)]), int(sel2[k % len(sel2)])

                # The steering mainlobe spans ~k_res cells, so a coarse pass at
                # a third of that step cannot miss it; the full-resolution scan
                # then runs only inside the coarse peak's neighbourhood.
                step = max(1, n1a // (3 * n_x))
                if step > 1:
                    c1, c2 = scan(np.arange(0, n1a, step), np.arange(0, n2a, step))
                    w = 2 * step
                    j1, j2 = scan(
                        np.arange(max(0, c1 - w), min(n1a, c1 + w + 1)),
                        np.arange(max(0, c2 - w), min(n2a, c2 + w + 1)),
                    )
                else:
                    j1, j2 = scan(np.arange(n1a), np.arange(n2a))
                indices = [j1, j2, j3]
            else:
                indices = list(init_indices)
            for _ in range(n_iter):
                previous = list(indices)
                slab = (flat_xy_d @ psi3[:, indices[2]]).reshape(rows, n_x, n_y)
                indices[0] = normalized_argmax(angle_matrix(slab, 0, indices[1]))
                indices[1] = normalized_argmax(angle_matrix(slab, 1, indices[0]))
                indices[2] = normalized_argmax(delay_matrix(indices[0], indices[1]))
                if indices == previous:
                    break
            return tuple(indices)
        finally:
            residual = saved
            q_basis = None

    def refit():
        basis = np.stack(columns, axis=1)
        coeffs, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return basis, coeffs, y - basis @ coeffs

    coeffs = np.zeros((0, y.shape[1]), dtype=complex)
    for _ in range(n_est):
        selected.append(pick_support(residual, columns))
        columns.append(_sensing_column(tensor, psis, selected[-1]))
        basis, coeffs, residual = refit()
        # Cyclic re-polish: earlier supports may sit a cell off because later
        # paths tilted their correlation peaks.  Re-pick each against the
        # observation with the *other* paths' own least-squares fit removed
        # (refitting without path p keeps its misfit from contaminating the
        # deflated target through the joint coefficients).
        for p in range(len(selected) - 1):
            others = [c for q, c in enumerate(columns) if q != p]
            basis_o = np.stack(others, axis=1)
            coeffs_o, *_ = np.linalg.lstsq(basis_o, y, rcond=None)
            updated = pick_support(y - basis_o @ coeffs_o, others, init_indices=selected[p])
            if updated != selected[p]:
                selected[p] = updated
                columns[p] = _sensing_column(tensor, psis, updated)
        basis, coeffs, residual = refit()
        norm = float(np.linalg.norm(residual))
        if norm > prev_norm * (1.0 + 1e-9) + 1e-12 * np.linalg.norm(y):
            warnings.warn("residual increased between path extractions", ConvergenceWarning)
        prev_norm = norm
        residual_norms.append(norm)
    paths = [Stage1Path(indices=sel, beta=coeffs[i].copy()) for i, sel in enumerate(selected)]
    return Stage1Result(paths=paths, residual_norms=residual_norms)


@dataclass
class DoaResult:
    j4: int
    j5: int
    gain: complex
    degenerate: bool = False


def retrieve_doa(
    beta: np.ndarray,
    w_m: np.ndarray,
    psi4: np.ndarray,
    psi5: np.ndarray,
    n_iter: int = 3,
) -> DoaResult:
    """Arrival-angle grid indices and complex gain from an equivalent-gain row.

    Maximises |psi^H (W_M beta)| over the Kronecker atoms psi4_j4 (x) psi5_j5
    with the same alternating per-dimension scheme as stage 1; the gain is
    the correlation peak divided by the squared steering norm.
    """
    n_elem = w_m.shape[0]
    if np.linalg.norm(beta) == 0.0:
        return DoaResult(j4=0, j5=0, gain=0.0 + 0.0j, degenerate=True)
    g = (w_m @ beta).reshape(psi4.shape[0], psi5.shape[0])
    t4 = psi4.conj().T @ g  # (N4a, n_ry)
    j4 = int(np.argmax(np.linalg.norm(t4, axis=1)))
    j5 = int(np.argmax(np.abs(t4[j4] @ psi5.conj())))
    for _ in range(n_iter):
        prev = (j4, j5)
        j4 = int(np.argmax(np.abs(psi4.conj().T @ (g @ psi5[:, j5].conj()))))
        j5 = int(np.argmax(np.abs(psi4[:, j4].conj() @ g @ psi5.conj())))
        if (j4, j5) == prev:
            break
    peak = psi4[:, j4].conj() @ g @ psi5[:, j5].conj()
    return DoaResult(j4=j4, j5=j5, gain=complex(peak / n_elem))


@dataclass(frozen=True)
class EstimatedPath:
    """One recovered multipath component (grid-quantized parameters)."""

    gain_mag: float
    gain_phase: float
    tdoa_s: float
    doa: np.ndarray
    dod: np.ndarray
    beta: np.ndarray
    grid_indices: tuple  # (j1, j2, j3, j4, j5)


@dataclass
class EstimatorContext:
    """Everything that is fixed across channels for one run configuration."""

    sounding: SoundingConfig
    tap_cfg: TapConfig
    dictionaries: DictionarySet
    phi: MeasurementTensor
    f_set: list
    w_set: list
    w_breve_set: list
    symbols: np.ndarray
    symbols_shifted: np.ndarray
    w_m: np.ndarray
    n_est: int = 5
    n_iter: int = 3
    doa_x_sign: float = -1.0


def build_estimator_context(
    scfg: SoundingConfig,
    tap_cfg: TapConfig,
    k_res: int,
    n_est: int = 5,
    n_iter: int = 3,
    doa_x_sign: float = -1.0,
) -> EstimatorContext:
    """Precompute codebooks, symbols, dictionaries and the sensing tensor."""
    f_set, w_set = build_training_set(scfg, tap_cfg.tx_geom, tap_cfg.rx_geom)
    w_breve_set = [whiten(w)[1] for w in w_set]
    symbols = training_symbols(scfg)
    dictionaries = build_dictionaries(tap_cfg, k_res)
    phi = build_measurement_tensor(f_set, symbols, tap_cfg.n_taps, tap_cfg.tx_geom)
    return EstimatorContext(
        sounding=scfg,
        tap_cfg=tap_cfg,
        dictionaries=dictionaries,
        phi=phi,
        f_set=f_set,
        w_set=w_set,
        w_breve_set=w_breve_set,
        symbols=symbols,
        symbols_shifted=shifted_symbol_matrix(symbols, tap_cfg.n_taps),
        w_m=np.concatenate(w_breve_set, axis=1),
        n_est=n_est,
        n_iter=n_iter,
        doa_x_sign=doa_x_sign,
    )


def estimate_channel(y_m: np.ndarray, ctx: EstimatorContext):
    """Full two-stage estimate: n_est paths sorted by gain magnitude."""
    d = ctx.dictionaries
    stage1 = momp_stage1(y_m, ctx.phi, d.psi1, d.psi2, d.psi3, ctx.n_est, ctx.n_iter)
    out = []
    scale = np.sqrt(ctx.sounding.p_t)
    for path in stage1.paths:
        j1, j2, j3 = path.indices
        doa = retrieve_doa(path.beta, ctx.w_m, d.psi4, d.psi5, ctx.n_iter)
        alpha = doa.gain / scale
        out.append(
            EstimatedPath(
                gain_mag=float(abs(alpha)),
                gain_phase=float(np.angle(alpha)),
                tdoa_s=float(d.delay_grid[j3]),
                doa=lift_unit_vector(d.u_doa[doa.j4], d.v_doa[doa.j5], ctx.doa_x_sign),
                dod=lift_unit_vector(d.u_dod[j1], d.v_dod[j2], 1.0),
                beta=path.beta,
                grid_indices=(j1, j2, j3, doa.j4, doa.j5),
            )
        )
    out.sort(key=lambda p: -p.gain_mag)
    return out


# ---------------------------------------------------------------------------
# Vectorized reference pursuit (tiny-instance oracle)
# ---------------------------------------------------------------------------

OMP_SIZE_CAP = int(1e8)


@dataclass
class OmpResult:
    supports: list
    coeffs: np.ndarray
    residual_norms: list


def omp_problem(ctx: EstimatorContext, size_cap: int = OMP_SIZE_CAP):
    """Stacked measurement matrix and Kronecker dictionary for the oracle.

    Rows follow vec (column-major) of each whitened frame, pairs ordered
    precoder-major then combiner.  Columns index atoms as
    (delay, dep az, dep el, arr az, arr el) in that significance order.
    Raises SizeCap when the dictionary would not fit the configured budget.
    """
    d = ctx.dictionaries
    tap = ctx.tap_cfg
    n_t, n_r, n_d = tap.tx_geom.n_elements, tap.rx_geom.n_elements, tap.n_taps
    n_atoms = d.psi1.shape[1] * d.psi2.shape[1] * d.psi3.shape[1] * d.psi4.shape[1] * d.psi5.shape[1]
    if n_r * n_t * n_d * n_atoms > size_cap:
        raise SizeCap(
            f"reference dictionary of {n_r * n_t * n_d} x {n_atoms} entries exceeds the cap"
        )
    dictionary = np.kron(d.psi3, np.kron(np.kron(d.psi1, d.psi2), np.kron(d.psi4, d.psi5)))
    rows = []
    scale = np.sqrt(ctx.sounding.p_t)
    for f in ctx.f_set:
        x = scale * (np.kron(np.eye(n_d), f) @ ctx.symbols_shifted)  # (n_d*n_t, q)
        for w_breve in ctx.w_breve_set:
            rows.append(np.kron(x.T, w_breve.conj().T))
    return np.concatenate(rows, axis=0), dictionary


def observation_to_omp_vector(blocks, m_t: int, m_r: int) -> np.ndarray:
    """Stack per-pair frames in the row order produced by :func:`omp_problem`."""
    parts = []
    for it in range(m_t):
        for ir in range(m_r):
            parts.append(blocks[(it, ir)].reshape(-1, order="F"))
    return np.concatenate(parts)


def omp_atom_indices(flat: int, dicts: DictionarySet) -> tuple:
    """Map a flat oracle atom index to grid indices (j1, j2, j3, j4, j5)."""
    shape = (
        dicts.psi3.shape[1],
        dicts.psi1.shape[1],
        dicts.psi2.shape[1],
        dicts.psi4.shape[1],
        dicts.psi5.shape[1],
    )
    j3, j1, j2, j4, j5 = np.unravel_index(flat, shape)
    return int(j1), int(j2), int(j3), int(j4), int(j5)


def omp_reference(y_vec: np.ndarray, measurement: np.ndarray, dictionary: np.ndarray, n_est: int) -> OmpResult:
    """Classical pursuit over the full dictionary: correlate, refit, deflate."""
    if n_est == 0:
        return OmpResult(supports=[], coeffs=np.zeros(0, dtype=complex), residual_norms=[])
    sensing = measurement @ dictionary
    col_norms = np.linalg.norm(sensing, axis=0)
    residual = y_vec.copy()
    supports = []
    residual_norms = []
    coeffs = np.zeros(0, dtype=complex)
    for _ in range(n_est):
        scores = np.abs(sensing.conj().T @ residual)
        scores = np.divide(scores, col_norms, out=np.zeros_like(scores), where=col_norms > 0)
        supports.append(int(np.argmax(scores)))
        basis = sensing[:, supports]
        coeffs, *_ = np.linalg.lstsq(basis, y_vec, rcond=None)
        residual = y_vec - basis @ coeffs
        residual_norms.append(float(np.linalg.norm(residual)))
    return OmpResult(supports=supports, coeffs=coeffs, residual_norms=residual_norms)


# ---------------------------------------------------------------------------
# Complexity bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexityCounts:
    omp: int
    momp: int
    two_stage: int


def complexity_probe(
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    n_d: int,
    q: int,
    n_s: int,
    n_est: int,
    n_iter: int,
    k_res: int,
) -> ComplexityCounts:
    """Operation counts of the three estimation strategies at one config.

    The single-dictionary pursuit pays the product of all per-dimension
    atom/sample products; the multidimensional variants replace the atom
    product with a sum, and the two-stage split drops the arrival dimensions
    from the heavy loop entirely.
    """
    sizes = [tx_geom.n_x, tx_geom.n_y, n_d, rx_geom.n_x, rx_geom.n_y]
    atoms = [k_res * s for s in sizes]
    base = int(n_est) * int(n_s) * int(q)
    prod_all = 1
    for s, a in zip(sizes, atoms):
        prod_all *= s * a
    prod_sizes5 = int(np.prod(sizes, dtype=object))
    prod_sizes3 = int(np.prod(sizes[:3], dtype=object))
    return ComplexityCounts(
        omp=base * prod_all,
        momp=base * int(n_iter) * sum(atoms) * prod_sizes5,
        two_stage=base * int(n_iter) * sum(atoms[:3]) * prod_sizes3,
    )
