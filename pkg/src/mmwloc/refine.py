"""Tile-grid machinery around an initial 2D position estimate.

An odd N_g x N_g lattice of candidate positions (grid step g_s) is centred on
the initial estimate.  Target maps convert the distance of each candidate to
the true position into a per-tile sigmoid belief; a predicted map (from the
refinement network, which lives in a separate package) is reduced back to a
position by taking its peak tile.  Tile values are independent sigmoids, not
a normalized distribution, and the peak selection does not care about scale.

Map layout is row-major with row 1 at the top: tile (row j, column i)
(1-based) sits at offset [n_x, n_y] = [i - (N_g+1)/2, (N_g+1)/2 - j] grid
steps from the centre.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

EXPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TileGrid:
    center: np.ndarray  # 2D
    n_g: int = 5
    g_s: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.n_g < 1 or self.n_g % 2 == 0:
            raise ValueError("n_g must be a positive odd integer")

    def tile_centers(self) -> np.ndarray:
        """Candidate positions, shape (n_g, n_g, 2), indexed [row, col]."""
        half = (self.n_g - 1) // 2
        cols = np.arange(self.n_g) - half  # n_x per column index
        rows = half - np.arange(self.n_g)  # n_y per row index
        nx, ny = np.meshgrid(cols, rows)
        return self.center + self.g_s * np.stack([nx, ny], axis=-1)


@dataclass
class TileMap:
    values: np.ndarray  # (n_g, n_g) in (0, 1), row-major
    grid: TileGrid


def target_map(grid: TileGrid, x_true, gamma: float = 5.0, delta: float = 1.0) -> TileMap:
    """Per-tile belief 1 / (1 + exp(-gamma * (1 - d/delta))), d the distance
    of the tile centre to the true position; strictly decreasing in d."""
    if gamma <= 0.0 or delta <= 0.0:
        raise ValueError("gamma and delta must be positive")
    centers = grid.tile_centers()
    dist = np.linalg.norm(centers - np.asarray(x_true, dtype=float), axis=-1)
    values = 1.0 / (1.0 + np.exp(-gamma * (1.0 - dist / delta)))
    return TileMap(values=values, grid=grid)


def select_refined(tile_map: TileMap) -> np.ndarray:
    """Centre of the peak tile; ties resolve to the smaller offset norm, then
    to the lower row-major index."""
    values = tile_map.values
    n_g = tile_map.grid.n_g
    half = (n_g - 1) // 2
    ties = np.argwhere(values == values.max())

    def rank(ji):
        j, i = int(ji[0]), int(ji[1])
        return (i - half) ** 2 + (half - j) ** 2, j * n_g + i

    j, i = min(ties, key=rank)
    return tile_map.grid.tile_centers()[int(j), int(i)]


def export_training_set(records, grid_cfg: dict, gamma: float, delta: float, n_est: int, path) -> None:
    """Write the network-facing dataset: a header line then one JSON object
    per channel.

    Each record is (record_id, features (n_est x 6), x_init (2,), x_true (2,));
    the stored target is the row-major target map computed here, so a reader
    can re-derive it from x_true bit for bit.
    """
    header = {
        "version": EXPORT_FORMAT_VERSION,
        "n_g": int(grid_cfg["n_g"]),
        "g_s": float(grid_cfg["g_s"]),
        "gamma": float(gamma),
        "delta": float(delta),
        "n_est": int(n_est),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for record_id, features, x_init, x_true in records:
            grid = TileGrid(center=np.asarray(x_init, float)[:2], n_g=header["n_g"], g_s=header["g_s"])
            target = target_map(grid, np.asarray(x_true, float)[:2], gamma, delta)
            row = {
                "id": int(record_id),
                "paths": np.asarray(features, float).reshape(n_est, 6).tolist(),
                "x_init": [float(x_init[0]), float(x_init[1])],
                "target": target.values.reshape(-1).tolist(),
                "x_true": [float(x_true[0]), float(x_true[1])],
            }
            fh.write(json.dumps(row) + "\n")


def import_predictions(path):
    """Parse a predictions file into (record_id, TileMap) pairs.

    The header pins n_g and g_s; every row needs an id, the grid centre
    (x_init) and a map of n_g^2 values.  Values outside (0, 1) are clipped
    with a warning-free clamp to keep downstream logs usable.
    """
    out = []
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise SchemaError("empty predictions file")
        try:
            header = json.loads(header_line)
            n_g = int(header["n_g"])
            g_s = float(header["g_s"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"bad predictions header: {err}") from err
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                record_id = int(row["id"])
                center = np.asarray(row["x_init"], dtype=float)
                values = np.asarray(row["map"], dtype=float)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise SchemaError(f"bad predictions row at line {lineno}: {err}") from err
            if values.shape != (n_g * n_g,):
                raise SchemaError(
                    f"map length {values.size} != {n_g * n_g} at line {lineno}"
                )
            values = np.clip(values, 1e-9, 1.0 - 1e-9).reshape(n_g, n_g)
            grid = TileGrid(center=center, n_g=n_g, g_s=g_s)
            out.append((record_id, TileMap(values=values, grid=grid)))
    return out


def read_training_set(path):
    """Inverse of :func:`export_training_set`: returns (header, records)."""
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise SchemaError("empty dataset file")
        header = json.loads(header_line)
        records = []
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return header, records
