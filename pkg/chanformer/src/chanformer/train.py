"""Training loop: Adam at 2e-4 with stepped decay and early stopping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import RefineDataset
from .model import RefineModel, save_checkpoint


@dataclass
class TrainSettings:
    epochs: int = 400
    batch_size: int = 64
    lr: float = 2e-4
    decay: float = 0.95
    decay_every: int = 200
    patience: int = 60
    val_fraction: float = 0.15
    loss: str = "bce"  # bce | mse | kl
    seed: int = 0


def _loss_fn(kind: str):
    if kind == "bce":
        return nn.BCELoss()
    if kind == "mse":
        return nn.MSELoss()
    if kind == "kl":
        kld = nn.KLDivLoss(reduction="batchmean")

        def kl(pred, target):
            log_p = torch.log(pred / pred.sum(dim=1, keepdim=True) + 1e-12)
            q = target / target.sum(dim=1, keepdim=True)
            return kld(log_p, q)

        return kl
    raise ValueError(f"unknown loss '{kind}'")


def constant_baseline_mse(targets: np.ndarray) -> float:
    """MSE of always predicting 0.5 for every tile."""
    return float(np.mean((targets - 0.5) ** 2))


def train_model(dataset: RefineDataset, settings: TrainSettings = TrainSettings()) -> tuple:
    torch.manual_seed(settings.seed)
    rng = np.random.default_rng(settings.seed)
    n = len(dataset)
    order = rng.permutation(n)
    n_val = int(n * settings.val_fraction) if settings.val_fraction > 0 else 0
    val_idx, tr_idx = order[:n_val], order[n_val:]

    init_scale = float(max(np.abs(dataset.x_init).max(), 1.0))
    model = RefineModel(n_g=int(dataset.header["n_g"]), init_scale=init_scale)
    paths = torch.from_numpy(dataset.paths)
    x_init = torch.from_numpy(dataset.x_init)
    targets = torch.from_numpy(dataset.targets)
    criterion = _loss_fn(settings.loss)
    opt = torch.optim.Adam(model.parameters(), lr=settings.lr)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=settings.decay_every, gamma=settings.decay)

    best_val = float("inf")
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    stall = 0
    history = []
    for epoch in range(settings.epochs):
        model.train()
        perm = rng.permutation(len(tr_idx))
        for start in range(0, len(tr_idx), settings.batch_size):
            sel = tr_idx[perm[start : start + settings.batch_size]]
            opt.zero_grad()
            pred = model(paths[sel], x_init[sel])
            loss = criterion(pred, targets[sel])
            loss.backward()
            opt.step()
        sched.step()
        if n_val == 0:
            continue  # no held-out split: run to the epoch budget, keep final
        model.eval()
        with torch.no_grad():
            val = float(criterion(model(paths[val_idx], x_init[val_idx]), targets[val_idx]))
        history.append(val)
        if val < best_val - 1e-6:
            best_val = val
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            stall = 0
        else:
            stall += 1
            if stall >= settings.patience:
                break
    if n_val > 0:
        model.load_state_dict(best_state)
    model.eval()
    meta = {
        "epochs_run": len(history) if n_val > 0 else settings.epochs,
        "best_val_loss": best_val if n_val > 0 else None,
        "loss": settings.loss,
        "seed": settings.seed,
        "n_train": len(tr_idx),
        "n_val": int(n_val),
    }
    return model, meta


def train_file(dataset_path, checkpoint_path, settings: TrainSettings = TrainSettings()) -> dict:
    from .data import load_dataset

    dataset = load_dataset(dataset_path)
    model, meta = train_model(dataset, settings)
    save_checkpoint(checkpoint_path, model, dataset.header, meta)
    return meta
