"""Batch prediction: one tile map per input record, order preserving."""

from __future__ import annotations

import numpy as np
import torch

from .data import RefineDataset, load_dataset, save_predictions
from .model import load_checkpoint


def predict_dataset(model, dataset: RefineDataset, batch_size: int = 256) -> np.ndarray:
    model.eval()
    maps = []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            sel = slice(start, start + batch_size)
            pred = model(torch.from_numpy(dataset.paths[sel]), torch.from_numpy(dataset.x_init[sel]))
            maps.append(pred.numpy())
    return np.concatenate(maps, axis=0) if maps else np.zeros((0, model.n_g**2), dtype=np.float32)


def predict_file(checkpoint_path, dataset_path, out_path) -> int:
    model, payload = load_checkpoint(checkpoint_path)
    dataset = load_dataset(dataset_path)
    if int(dataset.header["n_g"]) != model.n_g:
        raise ValueError(
            f"grid mismatch: model n_g={model.n_g}, dataset n_g={dataset.header['n_g']}"
        )
    maps = predict_dataset(model, dataset)
    save_predictions(out_path, dataset.header, dataset.ids, dataset.x_init, maps)
    return len(dataset)
