"""Pre-LN transformer encoder, split between client and server.

Token layout: position 0 is the class token, positions 1..S are the input
steps. The regression readout and the discriminator features are both read
from the class token after a final LayerNorm.
"""

from __future__ import annotations

import math

import numpy as np

from grid_shield.errors import ContractError, ShapeError
from grid_shield.model.config import ModelConfig
from grid_shield.model.params import ModelParams, ParamSet
from grid_shield.tensor import (
    Tensor,
    add,
    concat,
    expand_leading,
    gelu,
    layernorm,
    matmul,
    reshape,
    scale,
    select,
    slice_axis,
    softmax_rows,
    split,
    transpose,
)


def attention(z: Tensor, params: ParamSet, prefix: str, heads: int) -> Tensor:
    """Multi-head self-attention with one fused q/k/v projection."""
    batch, tokens, width = z.shape
    head_dim = width // heads

    qkv = matmul(z, params[f"{prefix}.attn.qkv"])
    q, k, v = split(qkv, [width, width, width], axis=-1)

    def by_head(t: Tensor) -> Tensor:
        return transpose(reshape(t, (batch, tokens, heads, head_dim)), (0, 2, 1, 3))

    q, k, v = by_head(q), by_head(k), by_head(v)
    scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_dim))
    weights = softmax_rows(scores)
    context = matmul(weights, v)
    merged = reshape(transpose(context, (0, 2, 1, 3)), (batch, tokens, width))
    return matmul(merged, params[f"{prefix}.attn.out"])


def mlp(z: Tensor, params: ParamSet, prefix: str) -> Tensor:
    hidden = gelu(add(matmul(z, params[f"{prefix}.mlp.w1"]), params[f"{prefix}.mlp.b1"]))
    return add(matmul(hidden, params[f"{prefix}.mlp.w2"]), params[f"{prefix}.mlp.b2"])


def block(z: Tensor, params: ParamSet, prefix: str, cfg: ModelConfig) -> Tensor:
    """z' = MSA(LN(z)) + z ; z'' = MLP(LN(z')) + z'."""
    normed = layernorm(z, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"], cfg.ln_eps)
    z = add(z, attention(normed, params, prefix, cfg.heads))
    normed = layernorm(z, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"], cfg.ln_eps)
    return add(z, mlp(normed, params, prefix))


def embed(x: Tensor, params: ParamSet, cfg: ModelConfig) -> Tensor:
    """Project inputs, prepend the class token and add positions."""
    if x.ndim != 3:
        raise ShapeError(f"expected [batch, seq, features], got {x.shape}")
    batch, steps, features = x.shape
    if features != params["embed.w"].shape[0]:
        raise ShapeError(
            f"input has {features} features, embedding expects {params['embed.w'].shape[0]}"
        )
    if steps > cfg.max_seq:
        raise ContractError(f"sequence length {steps} exceeds max_seq {cfg.max_seq}")

    tokens = add(matmul(x, params["embed.w"]), params["embed.b"])
    cls = expand_leading(params["cls"], batch)
    z = concat([cls, tokens], axis=1)
    pos = slice_axis(params["pos"], 0, steps + 1, axis=0)
    return add(z, expand_leading(pos, batch))


def _readout(z: Tensor, params: ParamSet, ln: str, cfg: ModelConfig) -> Tensor:
    return layernorm(select(z, 0, axis=1), params[f"{ln}.g"], params[f"{ln}.b"], cfg.ln_eps)


def encode(enc: ParamSet, x: Tensor, cfg: ModelConfig) -> Tensor:
    """Client half: T_Mid = Enc(x), shape [batch, seq + 1, d_model]."""
    z = embed(x, enc, cfg)
    for i in range(cfg.split):
        z = block(z, enc, f"layer{i}", cfg)
    return z


def decode(dec: ParamSet, t_mid: Tensor, cfg: ModelConfig) -> Tensor:
    """Server half: remaining layers, LN on the class token, linear head -> [batch, 1]."""
    if t_mid.ndim != 3 or t_mid.shape[-1] != cfg.d_model:
        raise ShapeError(f"T_Mid must be [batch, tokens, {cfg.d_model}], got {t_mid.shape}")
    z = t_mid
    for i in range(cfg.split, cfg.layers):
        z = block(z, dec, f"layer{i}", cfg)
    features = _readout(z, dec, "head.ln", cfg)
    return add(matmul(features, dec["head.w"]), dec["head.b"])


def generator_forward(params: ModelParams, x: Tensor, cfg: ModelConfig) -> Tensor:
    """Unsplit generator pass; runs the same ops as decode(encode(x))."""
    z = embed(x, params.enc, cfg)
    for i in range(cfg.layers):
        owner = params.enc if i < cfg.split else params.dec
        z = block(z, owner, f"layer{i}", cfg)
    features = _readout(z, params.dec, "head.ln", cfg)
    return add(matmul(features, params.dec["head.w"]), params.dec["head.b"])


def discriminator(dis: ParamSet, window: Tensor, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    """Features f(window) [batch, d_model] and real/fake logits [batch, 1]."""
    z = embed(window, dis, cfg)
    for i in range(cfg.dis_layers):
        z = block(z, dis, f"layer{i}", cfg)
    features = _readout(z, dis, "feat.ln", cfg)
    logits = add(matmul(features, dis["logit.w"]), dis["logit.b"])
    return features, logits


def discriminator_features(dis: ParamSet, window: Tensor, cfg: ModelConfig) -> Tensor:
    return discriminator(dis, window, cfg)[0]


def fake_window(target_window: np.ndarray, x_hat: Tensor) -> Tensor:
    """Target history with its last step replaced by the prediction."""
    batch, steps, _ = target_window.shape
    last = reshape(x_hat, (batch, 1, 1))
    if steps == 1:
        return last
    history = Tensor(target_window[:, :-1, :], dtype=x_hat.dtype)
    return concat([history, last], axis=1)
