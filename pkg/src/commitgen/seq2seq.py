"""Attentional GRU encoder-decoder over the autodiff tape.

Architecture:

- bidirectional single-layer GRU encoder; each source position is the
  concatenation of the forward and backward states, so encoder rows
  have width 2*hidden
- the decoder's start state is tanh(bridge([fwd_final; bwd_final]))
- additive attention: score_j = v . tanh(Wq h_dec + Wk H_j), masked
  softmax over source positions, context = sum of weighted rows
- GRU decoder fed [embedding(y_prev); context]; the output projection
  consumes [state; embedding(y_prev); context]

GRU cell (update gate z, reset gate r, candidate n):

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wn + (r*h) Un + bn)
    h' = (1 - z)*n + z*h

Everything runs batched: a batch of B sequences of padded length T is
laid out as a (B*T, width) matrix whose row b*T + t is position t of
element b.  Padded source positions propagate the previous hidden
state unchanged and are masked out of attention and loss, so appending
pad columns never changes the loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import numerics as nm
from .numerics import Tensor
from .vocab import EOS, SOS

INIT_SCALE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    hidden_dim: int = 512
    embed_dim: int = 256
    embed_dropout: float = 0.1
    max_decode_len: int = 30

    def __post_init__(self):
        for name in ("src_vocab", "tgt_vocab", "hidden_dim", "embed_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.embed_dropout < 1.0:
            raise ValueError("embed_dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "src_vocab": self.src_vocab,
            "tgt_vocab": self.tgt_vocab,
            "hidden_dim": self.hidden_dim,
            "embed_dim": self.embed_dim,
            "embed_dropout": self.embed_dropout,
            "max_decode_len": self.max_decode_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class GruParams:
    """One GRU cell's gate weights: inputs (in_dim, hidden), state (hidden, hidden)."""

    wz: Tensor
    uz: Tensor
    bz: Tensor
    wr: Tensor
    ur: Tensor
    br: Tensor
    wn: Tensor
    un: Tensor
    bn: Tensor

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for name in ("wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"):
            yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class ModelParams:
    """Every trainable tensor of the encoder-decoder."""

    src_embed: Tensor
    tgt_embed: Tensor
    enc_fwd: GruParams
    enc_bwd: GruParams
    bridge_w: Tensor
    bridge_b: Tensor
    dec: GruParams
    attn_query_w: Tensor  # decoder state -> score space
    attn_keys_w: Tensor   # encoder rows  -> score space
    attn_score_v: Tensor
    out_w: Tensor
    out_b: Tensor
    config: ModelConfig = field(repr=False, default=None)

    def named(self) -> Iterator[tuple[str, Tensor]]:
        yield "src_embed", self.src_embed
        yield "tgt_embed", self.tgt_embed
        yield from self.enc_fwd.named("enc_fwd")
        yield from self.enc_bwd.named("enc_bwd")
        yield "bridge_w", self.bridge_w
        yield "bridge_b", self.bridge_b
        yield from self.dec.named("dec")
        yield "attn_query_w", self.attn_query_w
        yield "attn_keys_w", self.attn_keys_w
        yield "attn_score_v", self.attn_score_v
        yield "out_w", self.out_w
        yield "out_b", self.out_b

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()


@dataclass
class AttentionMap:
    """Attention weights per generated token: rows target, columns source."""

    matrix: np.ndarray  # (emitted positions, source positions)

    def to_json(self, source_tokens: Sequence[str], target_tokens: Sequence[str]) -> str:
        return json.dumps(
            {
                "source": list(source_tokens),
                "target": list(target_tokens),
                "alpha": [[float(v) for v in row] for row in self.matrix],
            }
        )


def _gru_init(rng, in_dim: int, hidden: int) -> GruParams:
    def u(*shape):
        return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, shape), requires_grad=True)

    return GruParams(
        wz=u(in_dim, hidden), uz=u(hidden, hidden), bz=u(hidden),
        wr=u(in_dim, hidden), ur=u(hidden, hidden), br=u(hidden),
        wn=u(in_dim, hidden), un=u(hidden, hidden), bn=u(hidden),
    )


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform(-0.08, 0.08) initialization, seeded."""
    rng = np.random.Generator(np.random.PCG64(seed))
    h, e = cfg.hidden_dim, cfg.embed_dim

    def u(*shape):
        return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, shape), requires_grad=True)

    return ModelParams(
        src_embed=u(cfg.src_vocab, e),
        tgt_embed=u(cfg.tgt_vocab, e),
        enc_fwd=_gru_init(rng, e, h),
        enc_bwd=_gru_init(rng, e, h),
        bridge_w=u(2 * h, h),
        bridge_b=u(h),
        dec=_gru_init(rng, e + 2 * h, h),
        attn_query_w=u(h, h),
        attn_keys_w=u(2 * h, h),
        attn_score_v=u(h),
        out_w=u(h + e + 2 * h, cfg.tgt_vocab),
        out_b=u(cfg.tgt_vocab),
        config=cfg,
    )


def zero_params(cfg: ModelConfig) -> ModelParams:
    """All-zero parameters; useful for hand-checking the cell equations."""
    params = init_params(cfg, seed=0)
    for t in params.tensors():
        t.data[...] = 0.0
    return params


def _gru_step(p: GruParams, x: Tensor, h: Tensor) -> Tensor:
    z = nm.sigmoid(nm.add(nm.add(nm.matmul(x, p.wz), nm.matmul(h, p.uz)), p.bz))
    r = nm.sigmoid(nm.add(nm.add(nm.matmul(x, p.wr), nm.matmul(h, p.ur)), p.br))
    n = nm.tanh(nm.add(nm.add(nm.matmul(x, p.wn), nm.matmul(nm.mul(r, h), p.un)), p.bn))
    one_minus_z = nm.sub(1.0, z)
    return nm.add(nm.mul(one_minus_z, n), nm.mul(z, h))


def _masked_update(h_prev: Tensor, h_new: Tensor, step_mask: np.ndarray, hidden: int) -> Tensor:
    """Keep h_new where the step is real, h_prev where it is padding."""
    if step_mask.all():
        return h_new
    m = nm.repeat_cols(Tensor(step_mask.astype(np.float64).reshape(-1, 1)), hidden)
    return nm.add(h_prev, nm.mul(m, nm.sub(h_new, h_prev)))


def _embed(
    table: Tensor, ids: np.ndarray, dropout_p: float, rng: np.random.Generator | None
) -> Tensor:
    e = nm.take_rows(table, ids)
    if dropout_p > 0.0 and rng is not None:
        e = nm.dropout(e, dropout_p, rng)
    return e


def _validate_ids(ids: np.ndarray, vocab: int, side: str) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise ValueError(f"{side} id out of range for vocabulary of {vocab}")


def encode_batch(
    params: ModelParams,
    src_ids: np.ndarray,
    src_mask: np.ndarray,
    dropout_p: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """Bidirectional encoding of a padded batch.

    Returns ``H`` with shape (B*T, 2*hidden) in block layout (row b*T+t)
    and the decoder start state (B, hidden).  Padded positions carry
    the neighbouring real state forward; their H rows are garbage and
    must stay masked downstream.
    """
    cfg = params.config
    b, t_len = src_ids.shape
    _validate_ids(src_ids, cfg.src_vocab, "source")
    hidden = cfg.hidden_dim

    fwd_states: list[Tensor] = [None] * t_len
    h = Tensor(np.zeros((b, hidden)))
    for t in range(t_len):
        x = _embed(params.src_embed, src_ids[:, t], dropout_p, rng)
        h = _masked_update(h, _gru_step(params.enc_fwd, x, h), src_mask[:, t], hidden)
        fwd_states[t] = h
    fwd_final = h

    bwd_states: list[Tensor] = [None] * t_len
    h = Tensor(np.zeros((b, hidden)))
    for t in reversed(range(t_len)):
        x = _embed(params.src_embed, src_ids[:, t], dropout_p, rng)
        h = _masked_update(h, _gru_step(params.enc_bwd, x, h), src_mask[:, t], hidden)
        bwd_states[t] = h
    bwd_final = h

    rows = [nm.concat([fwd_states[t], bwd_states[t]]) for t in range(t_len)]
    big_h = nm.stack_blocks(rows)
    bridge_in = nm.concat([fwd_final, bwd_final])
    h0 = nm.tanh(nm.add(nm.matmul(bridge_in, params.bridge_w), params.bridge_b))
    return big_h, h0


def attend_batch(
    params: ModelParams,
    h_dec: Tensor,
    big_h: Tensor,
    src_mask: np.ndarray,
) -> tuple[Tensor, Tensor]:
    """Additive attention: context rows (B, 2*hidden) and weights (B, T)."""
    b, t_len = src_mask.shape
    keys = nm.matmul(big_h, params.attn_keys_w)            # (B*T, h)
    query = nm.matmul(h_dec, params.attn_query_w)          # (B, h)
    scores = nm.matmul(
        nm.tanh(nm.add(keys, nm.repeat_rows(query, t_len))),
        params.attn_score_v,
    )                                                      # (B*T,)
    alpha = nm.softmax(nm.reshape(scores, (b, t_len)), mask=src_mask)
    weights = nm.repeat_cols(nm.reshape(alpha, (b * t_len, 1)), big_h.shape[1])
    context = nm.sum_blocks(nm.mul(weights, big_h), t_len)  # (B, 2h)
    return context, alpha


def decode_step_batch(
    params: ModelParams,
    y_prev_ids: np.ndarray,
    h_dec: Tensor,
    context: Tensor,
    dropout_p: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """One decoder step: new state (B, hidden) and logits (B, tgt_vocab)."""
    cfg = params.config
    _validate_ids(np.asarray(y_prev_ids), cfg.tgt_vocab, "target")
    emb = _embed(params.tgt_embed, np.asarray(y_prev_ids), dropout_p, rng)
    h_new = _gru_step(params.dec, nm.concat([emb, context]), h_dec)
    readout = nm.concat([h_new, emb, context])
    logits = nm.add(nm.matmul(readout, params.out_w), params.out_b)
    return h_new, logits


# ---------------------------------------------------------------------------
# Spec-level single-example views.


def encode(
    params: ModelParams, src_ids: Sequence[int], src_mask: Sequence[bool] | None = None
) -> tuple[Tensor, Tensor]:
    """Encode one sequence: H (T, 2*hidden) and the start state (hidden,)."""
    ids = np.asarray(src_ids, dtype=np.int64).reshape(1, -1)
    mask = (
        np.ones_like(ids, dtype=bool)
        if src_mask is None
        else np.asarray(src_mask, dtype=bool).reshape(1, -1)
    )
    big_h, h0 = encode_batch(params, ids, mask)
    return nm.reshape(big_h, (ids.shape[1], big_h.shape[1])), nm.reshape(
        h0, (params.config.hidden_dim,)
    )


def attend(
    params: ModelParams,
    h_prev: Tensor,
    big_h: Tensor,
    src_mask: Sequence[bool] | None = None,
) -> tuple[Tensor, Tensor]:
    """Context vector (2*hidden,) and attention weights (T,) for one step."""
    t_len, width = big_h.shape
    mask = (
        np.ones((1, t_len), dtype=bool)
        if src_mask is None
        else np.asarray(src_mask, dtype=bool).reshape(1, t_len)
    )
    context, alpha = attend_batch(
        params,
        nm.reshape(h_prev, (1, -1)),
        nm.reshape(big_h, (t_len, width)),
        mask,
    )
    return nm.reshape(context, (width,)), nm.reshape(alpha, (t_len,))


def decode_step(
    params: ModelParams, y_prev_id: int, h_prev: Tensor, context: Tensor
) -> tuple[Tensor, Tensor]:
    """One single-example decoder step: new state and the output distribution."""
    h_new, logits = decode_step_batch(
        params,
        np.asarray([y_prev_id]),
        nm.reshape(h_prev, (1, -1)),
        nm.reshape(context, (1, -1)),
    )
    dist = nm.softmax(nm.reshape(logits, (params.config.tgt_vocab,)))
    return nm.reshape(h_new, (params.config.hidden_dim,)), dist


# ---------------------------------------------------------------------------
# Training loss and greedy decoding.


@dataclass
class Batch:
    """Padded id matrices with keep-masks; targets carry sos...eos."""

    src_ids: np.ndarray   # (B, T_src) int64
    src_mask: np.ndarray  # (B, T_src) bool
    tgt_ids: np.ndarray   # (B, T_tgt) int64
    tgt_mask: np.ndarray  # (B, T_tgt) bool
    shas: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return self.src_ids.shape[0]


def forward_loss(
    params: ModelParams,
    batch: Batch,
    teacher_forcing_p: float = 1.0,
    seed: int = 0,
    train: bool = True,
) -> Tensor:
    """Scalar cross-entropy over every real target position of the batch.

    Decoder inputs start at <sos>; with probability ``teacher_forcing_p``
    (one seeded draw per step) the next input is the gold token,
    otherwise the argmax of the step's logits.  Embedding dropout is
    active only when ``train`` is set.
    """
    if batch.size == 0:
        raise ValueError("empty batch")
    cfg = params.config
    rng = np.random.Generator(np.random.PCG64(seed))
    dropout_p = cfg.embed_dropout if train else 0.0

    big_h, h_dec = encode_batch(
        params, batch.src_ids, batch.src_mask, dropout_p=dropout_p, rng=rng
    )
    inputs = batch.tgt_ids[:, :-1]
    targets = batch.tgt_ids[:, 1:]
    target_mask = batch.tgt_mask[:, 1:]
    steps = inputs.shape[1]

    step_logits: list[Tensor] = []
    current = inputs[:, 0].copy()  # always <sos>
    for t in range(steps):
        context, _ = attend_batch(params, h_dec, big_h, batch.src_mask)
        h_dec, logits = decode_step_batch(
            params, current, h_dec, context, dropout_p=dropout_p, rng=rng
        )
        step_logits.append(logits)
        if t + 1 < steps:
            if rng.random() < teacher_forcing_p:
                current = inputs[:, t + 1].copy()
            else:
                current = np.argmax(logits.data, axis=1)
    flat_logits = nm.stack_blocks(step_logits)  # (B*steps, V) block layout
    return nm.cross_entropy(
        flat_logits, targets.reshape(-1), mask=target_mask.reshape(-1)
    )


def greedy_decode(
    params: ModelParams,
    src_ids: Sequence[int],
    src_mask: Sequence[bool] | None = None,
    max_len: int | None = None,
) -> tuple[list[int], AttentionMap]:
    """Argmax decoding from <sos> until <eos> or ``max_len`` tokens.

    Ties break toward the lowest vocabulary index.  Returns generated
    ids (without <sos>/<eos>) and one attention row per emitted token,
    including the final <eos> step when it occurs.
    """
    cfg = params.config
    if max_len is None:
        max_len = cfg.max_decode_len
    ids = np.asarray(src_ids, dtype=np.int64).reshape(1, -1)
    mask = (
        np.ones_like(ids, dtype=bool)
        if src_mask is None
        else np.asarray(src_mask, dtype=bool).reshape(1, -1)
    )
    big_h, h_dec = encode_batch(params, ids, mask)
    out: list[int] = []
    rows: list[np.ndarray] = []
    current = np.asarray([SOS])
    for _ in range(max_len):
        context, alpha = attend_batch(params, h_dec, big_h, mask)
        h_dec, logits = decode_step_batch(params, current, h_dec, context)
        nxt = int(np.argmax(logits.data[0]))
        rows.append(alpha.data[0].copy())
        if nxt == EOS:
            break
        out.append(nxt)
        current = np.asarray([nxt])
    matrix = np.vstack(rows) if rows else np.zeros((0, ids.shape[1]))
    return out, AttentionMap(matrix=matrix)


def render_attention_svg(
    attention: AttentionMap,
    source_tokens: Sequence[str],
    target_tokens: Sequence[str],
    path: str | Path,
) -> None:
    """Heatmap with source tokens on the x-axis, generated tokens on the y-axis."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matrix = attention.matrix
    fig, ax = plt.subplots(
        figsize=(max(4, 0.5 * len(source_tokens)), max(3, 0.5 * max(1, len(target_tokens))))
    )
    im = ax.imshow(
        matrix if matrix.size else np.zeros((1, max(1, len(source_tokens)))),
        cmap="viridis",
        aspect="auto",
        vmin=0.0,
    )
    ax.set_xticks(range(len(source_tokens)))
    ax.set_xticklabels(source_tokens, rotation=90, fontsize=7)
    ax.set_yticks(range(len(target_tokens)))
    ax.set_yticklabels(target_tokens, fontsize=7)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
