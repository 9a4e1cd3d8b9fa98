"""Bounce-count classification of estimated paths.

Two labelling routes exist: matching estimates against the synthetic ground
truth (parameter nearest-neighbour), and a small fully connected network
trained with an exponentially weighted cross-entropy.  The network is plain
numpy with hand-written backpropagation so training is bit-reproducible and
the gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LAYER_WIDTHS = (6, 64, 64, 32, 3)
MODEL_FORMAT_VERSION = 1

CLASS_LOS = 1
CLASS_FIRST_ORDER = 2
CLASS_OTHER = 3


def order_to_class(order: int) -> int:
    """Bounce count -> class label: 0 -> 1 (direct), 1 -> 2, >=2 -> 3."""
    if order == 0:
        return CLASS_LOS
    if order == 1:
        return CLASS_FIRST_ORDER
    return CLASS_OTHER


def path_features(gain_mag: float, tdoa_s: float, doa, dod, ts: float) -> np.ndarray:
    """Raw (unnormalized) feature vector [|a|^2, tau, th_az, th_el, ph_az, ph_el].

    Angles are azimuth/elevation of the unit vectors; delay is in sample
    periods so the scale matches the other entries.
    """

    def angles(vec):
        az = np.arctan2(vec[1], vec[0])
        el = np.arcsin(np.clip(vec[2], -1.0, 1.0))
        return az, el

    th_az, th_el = angles(doa)
    ph_az, ph_el = angles(dod)
    return np.array([gain_mag**2, tdoa_s / ts, th_az, th_el, ph_az, ph_el])


def match_to_true(estimated, true_paths, t0: float, ts: float):
    """Label each estimate with the class of its closest true path.

    Distance is squared sine-space angle error (both ends) plus squared delay
    error in sample periods; true-path delays are taken relative to the same
    clock offset the estimator sees.
    """
    if not estimated or not true_paths:
        raise ValueError("both path lists must be nonempty")
    true_feat = np.array(
        [[p.dod[1], p.dod[2], p.doa[1], p.doa[2], (p.toa_s - t0) / ts] for p in true_paths]
    )
    labels = []
    for est in estimated:
        feat = np.array([est.dod[1], est.dod[2], est.doa[1], est.doa[2], est.tdoa_s / ts])
        dist = np.sum((true_feat - feat) ** 2, axis=1)
        labels.append(order_to_class(true_paths[int(np.argmin(dist))].order))
    return labels


@dataclass
class ClassifierParams:
    """Fully connected stack 6-64-64-32-3 with feature normalization bounds."""

    weights: list  # list of (W, b) float64 pairs
    feat_min: np.ndarray
    feat_max: np.ndarray
    meta: dict = field(default_factory=dict)

    def normalize(self, z: np.ndarray) -> np.ndarray:
        span = np.where(self.feat_max > self.feat_min, self.feat_max - self.feat_min, 1.0)
        return np.clip((z - self.feat_min) / span, 0.0, 1.0)


def init_params(seed: int, feat_min=None, feat_max=None) -> ClassifierParams:
    """He-initialised hidden layers; the output layer starts at zero so an
    untrained network emits the uniform distribution."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC1A55]))
    weights = []
    for i in range(len(LAYER_WIDTHS) - 1):
        fan_in, fan_out = LAYER_WIDTHS[i], LAYER_WIDTHS[i + 1]
        if i == len(LAYER_WIDTHS) - 2:
            w = np.zeros((fan_out, fan_in))
        else:
            w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        weights.append((w, np.zeros(fan_out)))
    if feat_min is None:
        feat_min = np.zeros(LAYER_WIDTHS[0])
    if feat_max is None:
        feat_max = np.ones(LAYER_WIDTHS[0])
    return ClassifierParams(weights=weights, feat_min=np.asarray(feat_min, float), feat_max=np.asarray(feat_max, float))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cached(params: ClassifierParams, x: np.ndarray):
    cache = [x]
    for i, (w, b) in enumerate(params.weights):
        x = x @ w.T + b
        if i < len(params.weights) - 1:
            x = np.maximum(x, 0.0)
        cache.append(x)
    return _softmax(x), cache


def forward(params: ClassifierParams, z: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Class probabilities for one raw feature vector or a batch (rows)."""
    x = np.atleast_2d(np.asarray(z, dtype=float))
    if not normalized:
        x = params.normalize(x)
    probs, _ = _forward_cached(params, x)
    return probs[0] if np.ndim(z) == 1 else probs


def weighted_ce_loss(p: np.ndarray, c_true: int, c_pred: int, eta: float = 0.2) -> float:
    """exp(-eta*(c_true - c_pred)) * (-log p[c_true]); probability clamped at 1e-12.

    The weight is a constant of the sample (no gradient flows through the
    predicted label).
    """
    weight = np.exp(-eta * (c_true - c_pred))
    return float(weight * -np.log(max(float(p[c_true - 1]), 1e-12)))


def loss_and_gradients(params: ClassifierParams, z_batch: np.ndarray, labels, eta: float = 0.2, preds=None):
    """Mean weighted cross-entropy over a batch plus analytic gradients.

    Gradient of -w*log softmax(logits)[c] w.r.t. logits is w*(p - onehot_c);
    standard backprop through the ReLU stack follows.  The weight's predicted
    label is detached: pass ``preds`` to pin it (e.g. for finite-difference
    checks, where a step must not flip the weight).
    """
    probs, cache = _forward_cached(params, np.atleast_2d(np.asarray(z_batch, dtype=float)))
    n = probs.shape[0]
    labels = np.asarray(labels, dtype=int)
    if preds is None:
        preds = np.argmax(probs, axis=1) + 1
    weights = np.exp(-eta * (labels - preds))
    picked = np.clip(probs[np.arange(n), labels - 1], 1e-12, None)
    loss = float(np.mean(weights * -np.log(picked)))

    delta = probs.copy()
    delta[np.arange(n), labels - 1] -= 1.0
    delta *= weights[:, None] / n
    grads = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        grads[i] = (delta.T @ cache[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ params.weights[i][0]) * (cache[i] > 0.0)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    decay: float = 0.95
    decay_every: int = 200
    epochs: int = 600
    batch_size: int = 256
    eta: float = 0.2
    patience: int = 60
    val_fraction: float = 0.2
    seed: int = 0


def train(features: np.ndarray, labels, hyper: TrainConfig = TrainConfig()) -> ClassifierParams:
    """Adam on the weighted cross-entropy with stepped learning-rate decay.

    Normalization bounds come from the training split only.  Early stopping
    restores the best validation-loss parameters.  Deterministic for a fixed
    seed.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 0x7A1]))
    order = rng.permutation(len(features))
    n_val = max(1, int(len(features) * hyper.val_fraction))
    val_idx, tr_idx = order[:n_val], order[n_val:]
    params = init_params(hyper.seed, features[tr_idx].min(axis=0), features[tr_idx].max(axis=0))
    x_tr = params.normalize(features[tr_idx])
    x_val = params.normalize(features[val_idx])
    y_tr, y_val = labels[tr_idx], labels[val_idx]

    m_buf = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.weights]
    v_buf = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.weights]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    best_val = np.inf
    best_weights = [(w.copy(), b.copy()) for w, b in params.weights]
    stall = 0
    history = []
    for epoch in range(hyper.epochs):
        lr = hyper.lr * hyper.decay ** (epoch // hyper.decay_every)
        perm = rng.permutation(len(x_tr))
        for start in range(0, len(x_tr), hyper.batch_size):
            batch = perm[start : start + hyper.batch_size]
            _, grads = loss_and_gradients(params, x_tr[batch], y_tr[batch], hyper.eta)
            step += 1
            for i, (gw, gb) in enumerate(grads):
                mw, mb = m_buf[i]
                vw, vb = v_buf[i]
                mw[:] = beta1 * mw + (1 - beta1) * gw
                mb[:] = beta1 * mb + (1 - beta1) * gb
                vw[:] = beta2 * vw + (1 - beta2) * gw**2
                vb[:] = beta2 * vb + (1 - beta2) * gb**2
                corr1 = 1 - beta1**step
                corr2 = 1 - beta2**step
                w, b = params.weights[i]
                w -= lr * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
                b -= lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
        val_loss, _ = loss_and_gradients(params, x_val, y_val, hyper.eta)
        history.append(val_loss)
        if val_loss < best_val - 1e-9:
            best_val = val_loss
            best_weights = [(w.copy(), b.copy()) for w, b in params.weights]
            stall = 0
        else:
            stall += 1
            if stall >= hyper.patience:
                break
    params.weights = best_weights
    params.meta = {
        "epochs_run": len(history),
        "best_val_loss": best_val,
        "eta": hyper.eta,
        "seed": hyper.seed,
    }
    return params


def classify(params: ClassifierParams, z: np.ndarray) -> int:
    """Most probable class for one raw feature vector (lowest index on ties)."""
    return int(np.argmax(forward(params, z))) + 1


def save_model(params: ClassifierParams, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_widths": list(LAYER_WIDTHS),
        "weights": [
            {"w": w.reshape(-1).tolist(), "b": b.tolist(), "shape": list(w.shape)}
            for w, b in params.weights
        ],
        "feat_min": params.feat_min.tolist(),
        "feat_max": params.feat_max.tolist(),
        "meta": params.meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path) -> ClassifierParams:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {payload.get('format_version')}")
    weights = [
        (np.array(item["w"], dtype=float).reshape(item["shape"]), np.array(item["b"], dtype=float))
        for item in payload["weights"]
    ]
    return ClassifierParams(
        weights=weights,
        feat_min=np.array(payload["feat_min"], dtype=float),
        feat_max=np.array(payload["feat_max"], dtype=float),
        meta=payload.get("meta", {}),
    )
