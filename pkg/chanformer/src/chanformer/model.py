"""Encoder/decoder attention network over estimated-path tokens.

Paths are embedded to 256-wide tokens and mixed by self-attention (no
positional encoding: a channel is a set of paths, so predictions are
permutation invariant by construction).  The embedded initial position acts
as the decoder query against the encoded tokens; a sigmoid head emits the
per-tile beliefs of the refinement grid.
"""

from __future__ import annotations

import torch
from torch import nn

D_MODEL = 256


class Attention(nn.Module):
    """Single-head scaled dot-product attention; keeps the last softmax map."""

    def __init__(self, d_model: int):
        super().__init__()
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.scale = d_model**-0.5
        self.last_weights = None

    def forward(self, query_tokens, context_tokens):
        q = self.q(query_tokens)
        k = self.k(context_tokens)
        v = self.v(context_tokens)
        scores = torch.matmul(q, k.transpose(-2, -1)) * self.scale
        weights = torch.softmax(scores, dim=-1)
        self.last_weights = weights
        return torch.matmul(weights, v)


class Block(nn.Module):
    """Attention + feed-forward with residuals and layer norm."""

    def __init__(self, d_model: int):
        super().__init__()
        self.attn = Attention(d_model)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(nn.Linear(d_model, d_model), nn.ReLU(), nn.Linear(d_model, d_model))
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, tokens, context=None):
        context = tokens if context is None else context
        tokens = self.norm1(tokens + self.attn(tokens, context))
        return self.norm2(tokens + self.ff(tokens))


class RefineModel(nn.Module):
    def __init__(self, n_g: int = 5, d_model: int = D_MODEL, n_encoder_blocks: int = 2,
                 init_scale: float = 20.0):
        super().__init__()
        self.n_g = n_g
        self.init_scale = init_scale
        self.path_embed = nn.Sequential(nn.Linear(6, d_model), nn.ReLU(), nn.Linear(d_model, d_model))
        self.encoder = nn.ModuleList([Block(d_model) for _ in range(n_encoder_blocks)])
        self.query_embed = nn.Sequential(nn.Linear(2, d_model), nn.ReLU(), nn.Linear(d_model, d_model))
        self.decoder = Block(d_model)
        self.head = nn.Sequential(nn.Linear(d_model, d_model), nn.ReLU(), nn.Linear(d_model, n_g * n_g))

    def forward(self, paths: torch.Tensor, x_init: torch.Tensor) -> torch.Tensor:
        """paths (batch, n_est, 6), x_init (batch, 2) -> beliefs (batch, n_g^2)."""
        tokens = self.path_embed(paths)
        for block in self.encoder:
            tokens = block(tokens)
        query = self.query_embed(x_init / self.init_scale).unsqueeze(1)
        decoded = self.decoder(query, context=tokens).squeeze(1)
        return torch.sigmoid(self.head(decoded))

    def attention_maps(self):
        """Softmax weight matrices of the most recent forward pass."""
        maps = [block.attn.last_weights for block in self.encoder]
        maps.append(self.decoder.attn.last_weights)
        return maps


def save_checkpoint(path, model: RefineModel, header: dict, meta: dict) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "n_g": model.n_g,
            "init_scale": model.init_scale,
            "n_encoder_blocks": len(model.encoder),
            "header": header,
            "meta": meta,
        },
        path,
    )


def load_checkpoint(path) -> tuple:
    payload = torch.load(path, weights_only=False)
    model = RefineModel(
        n_g=payload["n_g"],
        n_encoder_blocks=payload["n_encoder_blocks"],
        init_scale=payload["init_scale"],
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload
