"""Pipeline runner: scene batches through sounding, estimation,
classification, localization, refinement export/ingest and evaluation.

Every stage reads the previous stage's JSON Lines artifact from the run
directory and writes its own, so any stage can be re-run in isolation and
reproduces downstream results byte for byte.  Scene-level work is
embarrassingly parallel; per-scene RNG streams are derived from the master
seed and the scene index, never from execution order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import classifier as clf
from . import geoloc, refine
from .channel import ArrayGeometry, TapConfig, channel_taps
from .config import RunConfig
from .errors import EmptyChannel, MmwlocError, NoValidCombination, StageError
from .recovery import EstimatedPath, EstimatorContext, build_estimator_context, complexity_probe, estimate_channel
from .scene import PathRecord, SceneConfig, generate_scene, trace_paths
from .sounding import (
    SoundingConfig,
    assemble_observation,
    load_observation,
    save_observation,
    sound_batch,
)

SCENES_FILE = "scenes.jsonl"
ESTIMATES_FILE = "estimates.jsonl"
CLASSIFIED_FILE = "classified.jsonl"
LOCATIONS_FILE = "locations.jsonl"
REFINED_LOCATIONS_FILE = "refined_locations.jsonl"
MODEL_FILE = "pathnet.json"
OBS_DIR = "obs"


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def tap_config(cfg: RunConfig) -> TapConfig:
    return TapConfig(
        tx_geom=ArrayGeometry(cfg.tx_nx, cfg.tx_ny),
        rx_geom=ArrayGeometry(cfg.rx_nx, cfg.rx_ny),
        n_taps=cfg.n_taps,
        ts=cfg.ts,
        beta=cfg.beta,
    )


def sounding_config(cfg: RunConfig) -> SoundingConfig:
    return SoundingConfig(
        m_t=cfg.m_t, m_r=cfg.m_r, q=cfg.q, n_s=cfg.n_s,
        p_t=cfg.p_t, noise_var=cfg.noise_var, rng_seed=cfg.seed,
    )


def estimator_context(cfg: RunConfig) -> EstimatorContext:
    return build_estimator_context(
        sounding_config(cfg), tap_config(cfg), cfg.k_res, n_est=cfg.n_est, n_iter=cfg.n_iter
    )


def windowed_channel(paths, clock_offset_s: float, cfg: RunConfig):
    """Field-of-view and delay-window filter plus the sampling origin.

    Both planar arrays only see their own half space (transmit side faces +x,
    the vehicle array faces -x), so paths departing backwards or arriving
    from behind are dropped.  The desk tap window (n_taps * ts) is far
    shorter than absolute flight times, so the origin t0 is tied to the
    earliest visible path minus a guard derived from the scene clock offset;
    later paths that spill out of the window carry no capturable energy and
    are dropped as well.
    """
    visible = [p for p in paths if p.dod[0] > 0.0 and p.doa[0] < 0.0]
    if not visible:
        return [], 0.0
    guard = cfg.window_guard_ns * 1e-9
    t_first = min(p.toa_s for p in visible)
    margin = (clock_offset_s % guard) if guard > 0 else 0.0
    t0 = t_first - margin
    limit = (cfg.n_taps - 1) * cfg.ts
    kept = [p for p in visible if 0.0 <= p.toa_s - t0 < limit]
    return kept, t0


# ---------------------------------------------------------------------------
# JSONL artifacts
# ---------------------------------------------------------------------------


@dataclass
class SceneRecord:
    scene_id: int
    seed: int
    tx: np.ndarray
    rx: np.ndarray
    clock_offset_s: float
    paths: list


def write_scenes(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            header = {
                "scene": rec.scene_id,
                "seed": rec.seed,
                "tx": list(rec.tx),
                "rx": list(rec.rx),
                "clock_offset_s": rec.clock_offset_s,
                "n_paths": len(rec.paths),
            }
            fh.write(json.dumps(header) + "\n")
            for p in rec.paths:
                row = {
                    "gain_re": p.gain.real,
                    "gain_im": p.gain.imag,
                    "toa_s": p.toa_s,
                    "doa": list(p.doa),
                    "dod": list(p.dod),
                    "order": p.order,
                    "points": [list(pt) for pt in p.interaction_points],
                }
                fh.write(json.dumps(row) + "\n")


def read_scenes(path):
    records = []
    with open(path) as fh:
        current = None
        remaining = 0
        for line in fh:
            row = json.loads(line)
            if "scene" in row:
                current = SceneRecord(
                    scene_id=row["scene"],
                    seed=row["seed"],
                    tx=np.array(row["tx"]),
                    rx=np.array(row["rx"]),
                    clock_offset_s=row["clock_offset_s"],
                    paths=[],
                )
                records.append(current)
                remaining = row["n_paths"]
            else:
                if current is None or remaining == 0:
                    raise StageError("read", f"orphan path row in {path}")
                current.paths.append(
                    PathRecord(
                        gain=complex(row["gain_re"], row["gain_im"]),
                        toa_s=row["toa_s"],
                        doa=np.array(row["doa"]),
                        dod=np.array(row["dod"]),
                        order=row["order"],
                        interaction_points=[np.array(pt) for pt in row["points"]],
                    )
                )
                remaining -= 1
    return records


def write_estimates(rows, path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_estimates(path):
    """Group estimate (or classified) rows by scene id, preserving order."""
    by_scene = {}
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            by_scene.setdefault(row["scene"], []).append(row)
    return by_scene


def row_to_estimated_path(row) -> EstimatedPath:
    return EstimatedPath(
        gain_mag=row["gain_mag"],
        gain_phase=row["gain_phase"],
        tdoa_s=row["tdoa_s"],
        doa=np.array(row["doa"]),
        dod=np.array(row["dod"]),
        beta=np.zeros(0),
        grid_indices=tuple(row["grid"]),
    )


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def _scene_record(cfg: RunConfig, index: int) -> SceneRecord:
    seed = int(np.random.SeedSequence([cfg.seed, 1, index]).generate_state(1)[0])
    scene = generate_scene(seed, SceneConfig(max_order=cfg.max_order))
    try:
        paths = trace_paths(scene, max_order=cfg.max_order)
    except EmptyChannel:
        paths = []
    return SceneRecord(
        scene_id=index,
        seed=seed,
        tx=scene.tx_position,
        rx=scene.rx_position,
        clock_offset_s=scene.clock_offset_s,
        paths=paths,
    )


def stage_generate(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [_scene_record(cfg, i) for i in range(cfg.scenes)]
    write_scenes(records, out / SCENES_FILE)
    return out / SCENES_FILE


_WORKER_CTX = {}


def _sound_one(args):
    cfg, rec = args
    ctx = _WORKER_CTX.get("ctx")
    if ctx is None:
        ctx = estimator_context(cfg)
        _WORKER_CTX["ctx"] = ctx
    if not rec.paths:
        return rec.scene_id, None
    kept, t0 = windowed_channel(rec.paths, rec.clock_offset_s, cfg)
    if not kept:
        return rec.scene_id, None
    taps = channel_taps(kept, t0, ctx.tap_cfg)

    def pair_rng(it, ir):
        return np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, rec.scene_id, it, ir]))

    blocks = sound_batch(taps, ctx.f_set, ctx.w_breve_set, ctx.symbols_shifted, ctx.sounding, pair_rng)
    obs = assemble_observation(blocks, ctx.w_breve_set, cfg.m_t, cfg.m_r)
    return rec.scene_id, obs.y_m


def _map_scenes(cfg: RunConfig, func, items):
    if cfg.workers > 1:
        with get_context("fork").Pool(cfg.workers) as pool:
            return pool.map(func, items, chunksize=8)
    return [func(item) for item in items]


def stage_sound(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    records = read_scenes(out / SCENES_FILE)
    obs_dir = out / OBS_DIR
    obs_dir.mkdir(parents=True, exist_ok=True)
    results = _map_scenes(cfg, _sound_one, [(cfg, rec) for rec in records])
    index = []
    for scene_id, y_m in results:
        if y_m is None:
            continue
        save_observation(obs_dir / f"scene_{scene_id:05d}.bin", y_m)
        index.append(scene_id)
    (out / "sounded.json").write_text(json.dumps({"scenes": index}))
    return obs_dir


def _estimate_one(args):
    cfg, scene_id = args
    ctx = _WORKER_CTX.get("ctx")
    if ctx is None:
        ctx = estimator_context(cfg)
        _WORKER_CTX["ctx"] = ctx
    y_m = load_observation(Path(cfg.out_dir) / OBS_DIR / f"scene_{scene_id:05d}.bin")
    rows = []
    for path in estimate_channel(y_m, ctx):
        rows.append(
            {
                "scene": scene_id,
                "gain_mag": path.gain_mag,
                "gain_phase": path.gain_phase,
                "tdoa_s": path.tdoa_s,
                "doa": list(path.doa),
                "dod": list(path.dod),
                "grid": list(path.grid_indices),
            }
        )
    return rows


def stage_estimate(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    sounded = json.loads((out / "sounded.json").read_text())["scenes"]
    all_rows = _map_scenes(cfg, _estimate_one, [(cfg, sid) for sid in sounded])
    rows = [row for rows in all_rows for row in rows]
    write_estimates(rows, out / ESTIMATES_FILE)
    return out / ESTIMATES_FILE


def clean_training_set(cfg: RunConfig):
    """Clean-parameter classifier dataset from an independent scene batch."""
    feats = []
    labels = []
    for i in range(cfg.clf_scenes):
        seed = int(np.random.SeedSequence([cfg.clf_seed, 3, i]).generate_state(1)[0])
        scene = generate_scene(seed, SceneConfig(max_order=cfg.max_order))
        try:
            paths = trace_paths(scene, max_order=cfg.max_order)
        except EmptyChannel:
            continue
        kept, t0 = windowed_channel(paths, scene.clock_offset_s, cfg)
        for p in kept:
            feats.append(clf.path_features(abs(p.gain), p.toa_s - t0, p.doa, p.dod, cfg.ts))
            labels.append(clf.order_to_class(p.order))
    return np.array(feats), np.array(labels)


def train_classifier(cfg: RunConfig, model_path=None) -> clf.ClassifierParams:
    feats, labels = clean_training_set(cfg)
    params = clf.train(
        feats,
        labels,
        clf.TrainConfig(epochs=cfg.clf_epochs, eta=cfg.clf_eta, seed=cfg.clf_seed),
    )
    if model_path is not None:
        clf.save_model(params, model_path)
    return params


def stage_classify(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    estimates = read_estimates(out / ESTIMATES_FILE)
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    params = None
    if cfg.matcher == "model":
        model_path = out / MODEL_FILE
        if model_path.is_file():
            params = clf.load_model(model_path)
        else:
            params = train_classifier(cfg, model_path)
    elif cfg.matcher != "true":
        raise StageError("classify", f"unknown matcher '{cfg.matcher}'")
    rows = []
    for scene_id in sorted(estimates):
        rec = scenes[scene_id]
        est_rows = estimates[scene_id]
        paths = [row_to_estimated_path(r) for r in est_rows]
        if params is not None:
            labels = [
                clf.classify(
                    params, clf.path_features(p.gain_mag, p.tdoa_s, p.doa, p.dod, cfg.ts)
                )
                for p in paths
            ]
        else:
            kept, t0 = windowed_channel(rec.paths, rec.clock_offset_s, cfg)
            labels = clf.match_to_true(paths, kept or rec.paths, t0, cfg.ts)
        for row, label in zip(est_rows, labels):
            rows.append({**row, "class": int(label)})
    write_estimates(rows, out / CLASSIFIED_FILE)
    return out / CLASSIFIED_FILE


def dedupe_estimates(paths, classes, cells: int):
    """Collapse near-duplicate estimates (greedy split artifacts of one
    physical path): keep the strongest of any group whose grid indices all
    lie within ``cells`` of each other."""
    order = sorted(range(len(paths)), key=lambda i: -paths[i].gain_mag)
    kept = []
    for i in order:
        gi = paths[i].grid_indices
        if any(
            all(abs(a - b) <= cells for a, b in zip(gi, paths[j].grid_indices))
            for j in kept
        ):
            continue
        kept.append(i)
    kept.sort()
    return [paths[i] for i in kept], [classes[i] for i in kept]


def stage_locate(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    classified = read_estimates(out / CLASSIFIED_FILE)
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    opts = geoloc.LocateOptions(
        height_band=(cfg.height_min, cfg.height_max),
        max_nlos_combos=cfg.max_nlos_combos,
        max_nlos_residual=cfg.nlos_max_residual_m,
    )
    rows = []
    for scene_id in sorted(classified):
        est_rows = classified[scene_id]
        paths = [row_to_estimated_path(r) for r in est_rows]
        classes = [r["class"] for r in est_rows]
        paths, classes = dedupe_estimates(paths, classes, cfg.dedupe_cells)
        qualified = geoloc.qualify(
            paths,
            classes,
            power_gap_db=cfg.power_gap_db,
            min_nlos_paths=cfg.min_nlos_paths,
            nlos_rel_power_db=cfg.nlos_rel_power_db,
        )
        row = {"scene": scene_id, "x": None, "d0": None, "mode": qualified.mode,
               "residual": None, "combo": None}
        if qualified.mode != "UNLOCATABLE":
            try:
                est = geoloc.locate(qualified, scenes[scene_id].tx, opts)
                row.update(
                    x=list(est.x_hat),
                    d0=est.d0_hat,
                    residual=est.residual,
                    combo=est.combo_id,
                )
            except (NoValidCombination, MmwlocError):
                row["mode"] = "UNLOCATABLE"
        rows.append(row)
    write_estimates(rows, out / LOCATIONS_FILE)
    return out / LOCATIONS_FILE


def read_locations(path):
    rows = {}
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            rows[row["scene"]] = row
    return rows


def stage_export_refine(cfg: RunConfig) -> tuple:
    """Split located channels into train/test network datasets (by scene id)."""
    out = Path(cfg.out_dir)
    classified = read_estimates(out / CLASSIFIED_FILE)
    locations = read_locations(out / LOCATIONS_FILE)
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    usable = [sid for sid in sorted(locations) if locations[sid]["x"] is not None]
    n_train = int(round(len(usable) * cfg.refine_split))
    grid_cfg = {"n_g": cfg.n_g, "g_s": cfg.g_s}
    model_path = out / MODEL_FILE
    params = clf.load_model(model_path) if model_path.is_file() else None

    def record(sid):
        feats = []
        for r in classified[sid]:
            p = row_to_estimated_path(r)
            raw = clf.path_features(p.gain_mag, p.tdoa_s, p.doa, p.dod, cfg.ts)
            feats.append(params.normalize(raw) if params is not None else raw)
        feats = np.array(feats)[: cfg.n_est]
        if feats.shape[0] < cfg.n_est:
            feats = np.vstack([feats, np.zeros((cfg.n_est - feats.shape[0], 6))])
        x_init = np.array(locations[sid]["x"])[:2]
        x_true = scenes[sid].rx[:2]
        return sid, feats, x_init, x_true

    train_path = out / "refine_train.jsonl"
    test_path = out / "refine_test.jsonl"
    refine.export_training_set(
        [record(sid) for sid in usable[:n_train]], grid_cfg, cfg.gamma, cfg.delta, cfg.n_est, train_path
    )
    refine.export_training_set(
        [record(sid) for sid in usable[n_train:]], grid_cfg, cfg.gamma, cfg.delta, cfg.n_est, test_path
    )
    return train_path, test_path


def stage_ingest_refine(cfg: RunConfig, predictions_path) -> Path:
    """Turn predicted tile maps back into locations (peak-tile selection)."""
    out = Path(cfg.out_dir)
    locations = read_locations(out / LOCATIONS_FILE)
    rows = []
    for record_id, tile_map in refine.import_predictions(predictions_path):
        base = locations.get(record_id)
        if base is None or base["x"] is None:
            continue
        refined = refine.select_refined(tile_map)
        rows.append(
            {
                "scene": record_id,
                "x": [float(refined[0]), float(refined[1]), base["x"][2]],
                "d0": base["d0"],
                "mode": base["mode"],
                "residual": base["residual"],
                "combo": "refined",
            }
        )
    write_estimates(rows, out / REFINED_LOCATIONS_FILE)
    return out / REFINED_LOCATIONS_FILE


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

PERCENTILES = (5, 50, 80, 95)


def error_cdf(errors) -> dict:
    """Linear-interpolated percentiles plus the sub-meter fraction."""
    arr = np.asarray(sorted(errors), dtype=float)
    if arr.size == 0:
        return {"n": 0, "percentiles": {}, "sub_meter_fraction": None}
    pct = np.percentile(arr, PERCENTILES, method="linear")
    return {
        "n": int(arr.size),
        "percentiles": {str(p): float(v) for p, v in zip(PERCENTILES, pct)},
        "sub_meter_fraction": float(np.mean(arr < 1.0)),
    }


@dataclass
class EvalReport:
    label: str
    overall_2d: dict
    overall_3d: dict
    by_mode: dict
    n_scenes: int
    n_located: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_scenes": self.n_scenes,
            "n_located": self.n_located,
            "overall_2d": self.overall_2d,
            "overall_3d": self.overall_3d,
            "by_mode": self.by_mode,
        }


def evaluate_locations(cfg: RunConfig, locations_file=None, label: str = "initial") -> EvalReport:
    out = Path(cfg.out_dir)
    locations = read_locations(out / (locations_file or LOCATIONS_FILE))
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    err2 = []
    err3 = []
    by_mode = {}
    located = 0
    for sid, row in sorted(locations.items()):
        if row["x"] is None:
            continue
        located += 1
        x_hat = np.array(row["x"])
        rx = scenes[sid].rx
        e2 = float(np.linalg.norm(x_hat[:2] - rx[:2]))
        e3 = float(np.linalg.norm(x_hat - rx))
        err2.append(e2)
        err3.append(e3)
        by_mode.setdefault(row["mode"], {"e2": [], "e3": []})
        by_mode[row["mode"]]["e2"].append(e2)
        by_mode[row["mode"]]["e3"].append(e3)
    return EvalReport(
        label=label,
        overall_2d=error_cdf(err2),
        overall_3d=error_cdf(err3),
        by_mode={
            mode: {"errors_2d": error_cdf(v["e2"]), "errors_3d": error_cdf(v["e3"])}
            for mode, v in sorted(by_mode.items())
        },
        n_scenes=len(scenes),
        n_located=located,
    )


def format_report(report: EvalReport) -> str:
    lines = [
        f"label: {report.label}   scenes: {report.n_scenes}   located: {report.n_located}",
        f"{'mode':<10}{'n':>6}" + "".join(f"{f'p{p}':>9}" for p in PERCENTILES) + f"{'sub-1m':>9}",
    ]

    def fmt(name, stats):
        if stats["n"] == 0:
            return f"{name:<10}{0:>6}"
        row = f"{name:<10}{stats['n']:>6}"
        for p in PERCENTILES:
            row += f"{stats['percentiles'][str(p)]:>9.3f}"
        row += f"{stats['sub_meter_fraction']:>9.3f}"
        return row

    lines.append(fmt("overall", report.overall_2d))
    for mode, stats in report.by_mode.items():
        lines.append(fmt(mode, stats["errors_2d"]))
    return "\n".join(lines)


def write_cdf_csv(cfg: RunConfig, report_label: str, locations_file=None) -> Path:
    out = Path(cfg.out_dir)
    locations = read_locations(out / (locations_file or LOCATIONS_FILE))
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    rows = ["mode,error_m,cdf"]
    per_mode = {}
    for sid, row in sorted(locations.items()):
        if row["x"] is None:
            continue
        e2 = float(np.linalg.norm(np.array(row["x"])[:2] - scenes[sid].rx[:2]))
        per_mode.setdefault(row["mode"], []).append(e2)
        per_mode.setdefault("overall", []).append(e2)
    for mode, errors in sorted(per_mode.items()):
        errors.sort()
        for k, e in enumerate(errors, start=1):
            rows.append(f"{mode},{e!r},{k / len(errors)!r}")
    path = out / f"cdf_{report_label}.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def render_cdf_figure(cfg: RunConfig, report_label: str, locations_file=None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(cfg.out_dir)
    locations = read_locations(out / (locations_file or LOCATIONS_FILE))
    scenes = {rec.scene_id: rec for rec in read_scenes(out / SCENES_FILE)}
    per_mode = {}
    for sid, row in sorted(locations.items()):
        if row["x"] is None:
            continue
        e2 = float(np.linalg.norm(np.array(row["x"])[:2] - scenes[sid].rx[:2]))
        per_mode.setdefault(row["mode"], []).append(e2)
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, errors in sorted(per_mode.items()):
        errors = np.sort(errors)
        ax.plot(errors, np.arange(1, errors.size + 1) / errors.size, label=f"{mode} (n={errors.size})")
    ax.set_xlabel("2D localization error (m)")
    ax.set_ylabel("CDF")
    ax.set_xscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title(f"Localization error CDF ({report_label})")
    path = out / f"error_cdf_{report_label}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def stage_eval(cfg: RunConfig, locations_file=None, label: str = "initial") -> EvalReport:
    report = evaluate_locations(cfg, locations_file, label)
    out = Path(cfg.out_dir)
    (out / f"report_{label}.json").write_text(json.dumps(report.to_dict(), indent=2))
    write_cdf_csv(cfg, label, locations_file)
    if cfg.figures:
        render_cdf_figure(cfg, label, locations_file)
    print(format_report(report))
    return report


STAGE_ORDER = ("generate", "sound", "estimate", "classify", "locate", "export-refine", "eval")


def run(cfg: RunConfig, start_stage: str = "generate") -> EvalReport:
    """Run the primary pipeline from the given stage to the final report."""
    if start_stage not in STAGE_ORDER:
        raise StageError(start_stage, "unknown stage")
    actions = {
        "generate": stage_generate,
        "sound": stage_sound,
        "estimate": stage_estimate,
        "classify": stage_classify,
        "locate": stage_locate,
        "export-refine": stage_export_refine,
    }
    report = None
    for stage in STAGE_ORDER[STAGE_ORDER.index(start_stage):]:
        try:
            if stage == "eval":
                report = stage_eval(cfg)
            else:
                actions[stage](cfg)
        except MmwlocError:
            raise
        except Exception as err:  # surface the failing stage per the CLI contract
            raise StageError(stage, str(err)) from err
    return report


def complexity_report(cfg: RunConfig) -> dict:
    counts = complexity_probe(
        ArrayGeometry(cfg.tx_nx, cfg.tx_ny),
        ArrayGeometry(cfg.rx_nx, cfg.rx_ny),
        cfg.n_taps,
        cfg.q,
        cfg.n_s,
        cfg.n_est,
        cfg.n_iter,
        cfg.k_res,
    )
    return {"omp": counts.omp, "momp": counts.momp, "two_stage": counts.two_stage}
