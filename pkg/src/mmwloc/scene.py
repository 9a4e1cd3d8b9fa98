"""Random street scenes and exact multipath tracing by the mirror-image method.

A scene holds one transmitter (roadside unit), one receiver (vehicle array)
and a set of finite planar rectangles (ground, building facades, low fences).
Specular paths up to a configurable bounce count are computed exactly by
mirroring the transmitter across reflector planes, which yields ground-truth
gains, delays, directions and bounce counts for the estimation pipeline.

The street runs along +x.  All reflector normals are perpendicular to x, so
every traced path propagates monotonically in x: departure directions have a
positive x component and arrival directions (receiver towards the last bounce)
a negative one.  The estimator relies on that sign convention to lift grid
angles back to 3D unit vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import SPEED_OF_LIGHT
from .errors import EmptyChannel

_EPS = 1e-12


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class Reflector:
    """Finite planar rectangle with a single-sided reflecting face.

    ``extent`` holds the half-sizes along the two in-plane axes returned by
    :meth:`tangent_axes`.  ``reflection_loss_db`` is the per-bounce amplitude
    loss of the material.
    """

    plane_point: np.ndarray
    unit_normal: np.ndarray
    extent: tuple
    reflection_loss_db: float

    def __post_init__(self):
        object.__setattr__(self, "plane_point", np.asarray(self.plane_point, dtype=float))
        n = np.asarray(self.unit_normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("reflector normal must be a unit vector")
        object.__setattr__(self, "unit_normal", n)
        if min(self.extent) <= 0.0:
            raise ValueError("reflector extent half-sizes must be positive")

    def tangent_axes(self):
        """Deterministic orthonormal in-plane axes (t1, t2)."""
        n = self.unit_normal
        z = np.array([0.0, 0.0, 1.0])
        if abs(n @ z) > 1.0 - 1e-9:
            t1 = np.array([1.0, 0.0, 0.0])
        else:
            t1 = _unit(np.cross(z, n))
        t2 = np.cross(n, t1)
        return t1, t2

    def signed_distance(self, p: np.ndarray) -> float:
        return float((np.asarray(p, dtype=float) - self.plane_point) @ self.unit_normal)

    def contains(self, p: np.ndarray, pad: float = 0.0) -> bool:
        """True when the in-plane projection of p falls inside the rectangle."""
        t1, t2 = self.tangent_axes()
        d = np.asarray(p, dtype=float) - self.plane_point
        return abs(d @ t1) <= self.extent[0] + pad and abs(d @ t2) <= self.extent[1] + pad


@dataclass(frozen=True)
class PathRecord:
    """One multipath component with exact geometric labels.

    ``dod`` points from the transmitter towards the first interaction point
    (the receiver for the direct path); ``doa`` points from the receiver
    towards the last interaction point (the transmitter for the direct path).
    ``order`` equals the number of interaction points.
    """

    gain: complex
    toa_s: float
    doa: np.ndarray
    dod: np.ndarray
    order: int
    interaction_points: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("doa", "dod"):
            v = np.asarray(getattr(self, name), dtype=float)
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a unit vector")
            object.__setattr__(self, name, v)


@dataclass
class Scene:
    tx_position: np.ndarray
    rx_position: np.ndarray
    reflectors: list
    clock_offset_s: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        self.tx_position = np.asarray(self.tx_position, dtype=float)
        self.rx_position = np.asarray(self.rx_position, dtype=float)
        if np.allclose(self.tx_position, self.rx_position):
            raise ValueError("transmitter and receiver must be distinct")
        if not 0.4 <= self.rx_position[2] <= 3.5:
            raise ValueError("receiver height must lie in [0.4, 3.5] m")


def mirror_point(p: np.ndarray, r: Reflector) -> np.ndarray:
    """Reflection of p across the reflector plane (an involution)."""
    p = np.asarray(p, dtype=float)
    return p - 2.0 * ((p - r.plane_point) @ r.unit_normal) * r.unit_normal


def _segment_plane_crossing(a, b, r: Reflector):
    """Crossing point of segment a->b with the reflector plane, or None."""
    d = b - a
    denom = d @ r.unit_normal
    if abs(denom) < _EPS:
        return None, None
    t = (r.plane_point - a) @ r.unit_normal / denom
    if t <= 1e-9 or t >= 1.0 - 1e-9:
        return None, None
    return a + t * d, t


def segment_blocked(a, b, reflectors, skip=()) -> bool:
    """True when the open segment a->b crosses any reflector rectangle."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for r in reflectors:
        if any(r is s for s in skip):
            continue
        point, _ = _segment_plane_crossing(a, b, r)
        if point is not None and r.contains(point):
            return True
    return False


def _free_space_gain(length: float, total_loss_db: float, wavelength: float) -> complex:
    amp = wavelength / (4.0 * np.pi * length) * 10.0 ** (-total_loss_db / 20.0)
    return amp * np.exp(-2j * np.pi * length / wavelength)


def _bounce_chain(scene: Scene, chain, wavelength: float):
    """Resolve the specular path through an ordered reflector chain, or None.

    Mirrors the transmitter successively across the chain, then walks back
    from the receiver to recover the interaction points.  Ordinary validity
    checks apply: every interaction point must fall inside its rectangle, all
    endpoints must lie on the reflecting side, and every sub-segment must be
    unoccluded.
    """
    images = [scene.tx_position]
    for r in chain:
        if r.signed_distance(images[-1]) <= _EPS:
            return None
        images.append(mirror_point(images[-1], r))
    # Walk back from the receiver to find interaction points.
    points = []
    target = scene.rx_position
    for k in range(len(chain) - 1, -1, -1):
        r = chain[k]
        if r.signed_distance(target) <= _EPS:
            return None
        point, _ = _segment_plane_crossing(images[k + 1], target, r)
        if point is None or not r.contains(point):
            return None
        points.append(point)
        target = point
    points.reverse()
    # Occlusion along the unfolded route tx -> p1 -> ... -> rx.
    route = [scene.tx_position] + points + [scene.rx_position]
    for k in range(len(route) - 1):
        touching = []
        if k > 0:
            touching.append(chain[k - 1])
        if k < len(chain):
            touching.append(chain[k])
        if segment_blocked(route[k], route[k + 1], scene.reflectors, skip=touching):
            return None
    length = sum(np.linalg.norm(route[k + 1] - route[k]) for k in range(len(route) - 1))
    loss = sum(r.reflection_loss_db for r in chain)
    return PathRecord(
        gain=_free_space_gain(length, loss, wavelength),
        toa_s=length / SPEED_OF_LIGHT,
        doa=_unit(route[-2] - scene.rx_position),
        dod=_unit(route[1] - scene.tx_position),
        order=len(chain),
        interaction_points=points,
    )


def trace_paths(scene: Scene, max_order: int = 2, wavelength: float = SPEED_OF_LIGHT / 73e9):
    """All specular paths up to max_order bounces, strongest first.

    The direct record is present iff the tx-rx segment crosses no rectangle.
    Raises EmptyChannel when nothing propagates at all.
    """
    if max_order not in (1, 2, 3):
        raise ValueError("max_order must be 1, 2 or 3")
    paths = []
    if not segment_blocked(scene.tx_position, scene.rx_position, scene.reflectors):
        los = _unit(scene.rx_position - scene.tx_position)
        length = float(np.linalg.norm(scene.rx_position - scene.tx_position))
        paths.append(
            PathRecord(
                gain=_free_space_gain(length, 0.0, wavelength),
                toa_s=length / SPEED_OF_LIGHT,
                doa=-los,
                dod=los,
                order=0,
                interaction_points=[],
            )
        )
    chains = [(r,) for r in scene.reflectors]
    if max_order >= 2:
        chains += [
            (r1, r2) for r1 in scene.reflectors for r2 in scene.reflectors if r1 is not r2
        ]
    if max_order >= 3:
        chains += [
            (r1, r2, r3)
            for r1 in scene.reflectors
            for r2 in scene.reflectors
            for r3 in scene.reflectors
            if r1 is not r2 and r2 is not r3
        ]
    for chain in chains:
        record = _bounce_chain(scene, chain, wavelength)
        if record is not None:
            paths.append(record)
    if not paths:
        raise EmptyChannel("no propagation path between transmitter and receiver")
    paths.sort(key=lambda p: -abs(p.gain))
    return paths


def relative_delays(paths, t0: float, reference: str = "clock"):
    """Delays relative to the clock offset or to the direct-path arrival.

    reference="clock" returns toa - t0 (what a synchronised-to-itself receiver
    measures); reference="los" returns toa - min(toa of order-0 paths), which
    is only defined when a direct path is present.
    """
    if reference == "clock":
        return [(p, p.toa_s - t0) for p in paths]
    if reference == "los":
        los = [p.toa_s for p in paths if p.order == 0]
        if not los:
            raise ValueError("no direct path to reference delays against")
        t_los = min(los)
        return [(p, p.toa_s - t_los) for p in paths]
    raise ValueError("reference must be 'clock' or 'los'")


@dataclass(frozen=True)
class SceneConfig:
    """Sampling ranges for the random street generator (metres / seconds).

    Facades supply single-bounce reflections off both road sides; pillars are
    narrow tall slabs (signage, kiosks) that mostly just sever the direct ray
    while laterally displaced wall bounces route around them.
    """

    tx_position: tuple = (0.0, 3.5, 2.5)
    rx_x_range: tuple = (8.0, 24.0)
    rx_y_range: tuple = (0.5, 7.0)
    rx_z_range: tuple = (1.0, 2.2)
    road_y: tuple = (-4.0, 11.0)  # facade planes on each side of the road
    facade_height: float = 12.0
    n_facades_per_side: tuple = (5, 7)
    facade_half_width: tuple = (3.0, 10.0)
    facade_x_range: tuple = (2.0, 32.0)
    facade_slant_deg: tuple = (5.0, 18.0)  # (near side, far side); the far
    # side sits beyond the road so strong slants never occlude it
    n_pillars: tuple = (3, 5)
    pillar_y_range: tuple = (1.5, 5.5)
    pillar_x_range: tuple = (3.0, 18.0)
    pillar_half_width: tuple = (1.2, 3.0)
    pillar_top_range: tuple = (5.5, 9.0)
    pillar_slant_deg: float = 8.0  # kiosks face the road at an angle
    wall_loss_db: tuple = (6.0, 15.0)
    ground_loss_db: tuple = (3.0, 9.0)
    clock_offset_range_s: tuple = (0.0, 200e-9)
    max_order: int = 2


def generate_scene(seed: int, cfg: SceneConfig = SceneConfig()) -> Scene:
    """Deterministic random scene for a seed: ground, facades, pillars."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5CE7E]))
    reflectors = [
        Reflector(
            plane_point=np.array([20.0, 3.5, 0.0]),
            unit_normal=np.array([0.0, 0.0, 1.0]),
            extent=(60.0, 40.0),
            reflection_loss_db=float(rng.uniform(*cfg.ground_loss_db)),
        )
    ]
    for side, y_plane, max_slant in zip((-1.0, 1.0), cfg.road_y, cfg.facade_slant_deg):
        n_fac = int(rng.integers(cfg.n_facades_per_side[0], cfg.n_facades_per_side[1] + 1))
        for _ in range(n_fac):
            xc = float(rng.uniform(*cfg.facade_x_range))
            half = float(rng.uniform(*cfg.facade_half_width))
            slant = np.deg2rad(rng.uniform(-max_slant, max_slant))
            reflectors.append(
                Reflector(
                    plane_point=np.array([xc, y_plane, cfg.facade_height / 2.0]),
                    unit_normal=np.array([np.sin(slant), -side * np.cos(slant), 0.0]),
                    extent=(half, cfg.facade_height / 2.0),
                    reflection_loss_db=float(rng.uniform(*cfg.wall_loss_db)),
                )
            )
    n_pillar = int(rng.integers(cfg.n_pillars[0], cfg.n_pillars[1] + 1))
    for _ in range(n_pillar):
        xc = float(rng.uniform(*cfg.pillar_x_range))
        half = float(rng.uniform(*cfg.pillar_half_width))
        top = float(rng.uniform(*cfg.pillar_top_range))
        y_p = float(rng.uniform(*cfg.pillar_y_range))
        # Slanted normals break the all-parallel-walls degeneracy that makes
        # the reflection-only position system rank deficient.
        slant = np.deg2rad(rng.uniform(-cfg.pillar_slant_deg, cfg.pillar_slant_deg))
        reflectors.append(
            Reflector(
                plane_point=np.array([xc, y_p, top / 2.0]),
                unit_normal=np.array([np.sin(slant), np.cos(slant), 0.0]),
                extent=(half, top / 2.0),
                reflection_loss_db=float(rng.uniform(*cfg.wall_loss_db)),
            )
        )
    rx = np.array(
        [
            rng.uniform(*cfg.rx_x_range),
            rng.uniform(*cfg.rx_y_range),
            rng.uniform(*cfg.rx_z_range),
        ]
    )
    return Scene(
        tx_position=np.array(cfg.tx_position),
        rx_position=rx,
        reflectors=reflectors,
        clock_offset_s=float(rng.uniform(*cfg.clock_offset_range_s)),
        rng_seed=seed,
    )
