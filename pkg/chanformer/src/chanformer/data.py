"""JSON Lines dataset interface shared with the estimation pipeline.

The dataset file starts with a header {version, n_g, g_s, gamma, delta,
n_est}; each following line holds one located channel:
{id, paths: [n_est x 6], x_init: [2], target: [n_g^2], x_true: [2]}.
Predictions use the same framing with rows {id, x_init, map: [n_g^2]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class RefineDataset:
    header: dict
    ids: np.ndarray
    paths: np.ndarray  # (n, n_est, 6) float32
    x_init: np.ndarray  # (n, 2)
    targets: np.ndarray  # (n, n_g^2)
    x_true: np.ndarray  # (n, 2)

    def __len__(self):
        return len(self.ids)


def load_dataset(path) -> RefineDataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        ids, paths, x_init, targets, x_true = [], [], [], [], []
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            ids.append(row["id"])
            paths.append(row["paths"])
            x_init.append(row["x_init"])
            targets.append(row.get("target"))
            x_true.append(row.get("x_true", [np.nan, np.nan]))
    n_g = int(header["n_g"])
    return RefineDataset(
        header=header,
        ids=np.array(ids, dtype=np.int64),
        paths=np.array(paths, dtype=np.float32),
        x_init=np.array(x_init, dtype=np.float32),
        targets=np.array(targets, dtype=np.float32).reshape(len(ids), n_g * n_g),
        x_true=np.array(x_true, dtype=np.float32),
    )


def save_predictions(path, header: dict, ids, x_init, maps) -> None:
    out_header = {"version": header.get("version", 1), "n_g": header["n_g"], "g_s": header["g_s"]}
    with open(path, "w") as fh:
        fh.write(json.dumps(out_header) + "\n")
        for rid, xi, row in zip(ids, x_init, maps):
            fh.write(
                json.dumps(
                    {"id": int(rid), "x_init": [float(xi[0]), float(xi[1])], "map": [float(v) for v in row]}
                )
                + "\n"
            )
