"""Encoder-decoder Transformer over per-edge packet sequences.

The model is trained to predict the second half of an edge's packet list
from the first half; afterwards only :meth:`NetTransformer.encode` is used,
to turn packets into latent vectors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import AllMasked, NonFiniteLoss, SequenceTooLong
from .packet import ChannelKind, FeatureSchema

log = logging.getLogger(__name__)

_NEG = -1e30


@dataclass
class TransformerConfig:
    d_z: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    ff_width: int = 128
    max_seq_len: int = 256
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.d_z % self.n_heads:
            raise ValueError("d_z must be divisible by n_heads")
        if self.d_z % 2:
            raise ValueError("d_z must be even for the sinusoidal position encoding")
        if self.max_seq_len < 2:
            raise ValueError("max_seq_len must be >= 2")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass
class OptimizerSettings:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def scaled_dot_attention(q, k, v, mask=None, return_weights: bool = False):
    """softmax(q k^T / sqrt(d_k)) v with an optional boolean key mask.

    ``mask`` broadcasts to ``(..., Lq, Lk)``; True marks an allowed key.
    Rows with no allowed key produce a zero vector.
    """
    d_k = q.shape[-1]
    logits = q @ k.transpose(-2, -1) / math.sqrt(d_k)
    if mask is not None:
        mask = torch.as_tensor(mask, dtype=torch.bool, device=logits.device)
        logits = logits.masked_fill(~mask, _NEG)
        weights = torch.softmax(logits, dim=-1)
        weights = weights * mask.any(dim=-1, keepdim=True).to(weights.dtype)
    else:
        weights = torch.softmax(logits, dim=-1)
    out = weights @ v
    return (out, weights) if return_weights else out


def positional_encoding(position: int | np.ndarray, d_z: int) -> np.ndarray:
    """Sinusoidal position encoding; one row per position."""
    pos = np.asarray(position, dtype=np.float64)
    i = np.arange(d_z // 2, dtype=np.float64)
    angle = pos[..., None] / np.power(10000.0, 2.0 * i / d_z)
    pe = np.empty(pos.shape + (d_z,))
    pe[..., 0::2] = np.sin(angle)
    pe[..., 1::2] = np.cos(angle)
    return pe


class Affine(nn.Module):
    """f(x) = x W^T + b, uniformly initialised in +-1/sqrt(fan_in)."""

    def __init__(self, fan_in: int, fan_out: int):
        super().__init__()
        bound = 1.0 / math.sqrt(fan_in)
        self.weight = nn.Parameter(torch.empty(fan_out, fan_in).uniform_(-bound, bound))
        self.bias = nn.Parameter(torch.empty(fan_out).uniform_(-bound, bound))

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class LayerNorm(nn.Module):
    def __init__(self, d: int, eps: float = 1e-5):
        super().__init__()
        self.gain = nn.Parameter(torch.ones(d))
        self.offset = nn.Parameter(torch.zeros(d))
        self.eps = eps

    def forward(self, x):
        return F.layer_norm(x, x.shape[-1:], self.gain, self.offset, self.eps)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_z: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.query = Affine(d_z, d_z)
        self.key = Affine(d_z, d_z)
        self.value = Affine(d_z, d_z)
        self.output = Affine(d_z, d_z)

    def _split(self, x):
        b, n, d = x.shape
        return x.view(b, n, self.n_heads, d // self.n_heads).transpose(1, 2)

    def forward(self, x_q, x_kv, mask=None):
        q = self._split(self.query(x_q))
        k = self._split(self.key(x_kv))
        v = self._split(self.value(x_kv))
        if mask is not None and mask.dim() == 3:
            mask = mask[:, None]  # broadcast over heads
        heads = scaled_dot_attention(q, k, v, mask)
        b, h, n, dh = heads.shape
        return self.output(heads.transpose(1, 2).reshape(b, n, h * dh))


class FeedForward(nn.Module):
    def __init__(self, d_z: int, ff_width: int):
        super().__init__()
        self.inner = Affine(d_z, ff_width)
        self.outer = Affine(ff_width, d_z)

    def forward(self, x):
        return self.outer(torch.relu(self.inner(x)))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.attn = MultiHeadAttention(cfg.d_z, cfg.n_heads)
        self.norm1 = LayerNorm(cfg.d_z)
        self.ff = FeedForward(cfg.d_z, cfg.ff_width)
        self.norm2 = LayerNorm(cfg.d_z)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, x, key_mask):
        x = self.norm1(x + self.drop(self.attn(x, x, key_mask[:, None, :])))
        return self.norm2(x + self.drop(self.ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_z, cfg.n_heads)
        self.norm1 = LayerNorm(cfg.d_z)
        self.cross_attn = MultiHeadAttention(cfg.d_z, cfg.n_heads)
        self.norm2 = LayerNorm(cfg.d_z)
        self.ff = FeedForward(cfg.d_z, cfg.ff_width)
        self.norm3 = LayerNorm(cfg.d_z)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, y, self_mask, memory, memory_mask):
        y = self.norm1(y + self.drop(self.self_attn(y, y, self_mask)))
        y = self.norm2(y + self.drop(self.cross_attn(y, memory, memory_mask[:, None, :])))
        return self.norm3(y + self.drop(self.ff(y)))


class NetTransformer(nn.Module):
    def __init__(self, schema: FeatureSchema, config: TransformerConfig):
        super().__init__()
        self.schema = schema
        self.config = config
        width, d = schema.total_width, config.d_z
        self.embed_in = Affine(width, d)
        self.embed_target = Affine(width, d)
        bound = 1.0 / math.sqrt(d)
        self.w0 = nn.Parameter(torch.empty(d).uniform_(-bound, bound))
        self.encoder = nn.ModuleList(EncoderLayer(config) for _ in range(config.n_encoder_layers))
        self.decoder = nn.ModuleList(DecoderLayer(config) for _ in range(config.n_decoder_layers))

        bin_cols = schema.columns(ChannelKind.BINARY)
        num_cols = schema.columns(ChannelKind.NUMERICAL)
        cat_slices = schema.categorical_slices()
        self.binary_head = Affine(d, len(bin_cols)) if len(bin_cols) else None
        self.categorical_heads = nn.ModuleList(Affine(d, s.stop - s.start) for s in cat_slices)
        self.numerical_head = Affine(d, len(num_cols)) if len(num_cols) else None
        order = np.concatenate([bin_cols] + [np.arange(s.start, s.stop) for s in cat_slices] + [num_cols])
        self.register_buffer("_unpermute", torch.as_tensor(np.argsort(order), dtype=torch.long), persistent=False)
        self.register_buffer(
            "_pe", torch.as_tensor(positional_encoding(np.arange(config.max_seq_len), d)), persistent=False
        )

    def _pos(self, n: int, like):
        return self._pe[:n].to(like.dtype)

    def encode(self, x, mask):
        """x: (B, L, width) packet rows, mask: (B, L) True for real packets."""
        if x.shape[1] > self.config.max_seq_len:
            raise SequenceTooLong(f"sequence of {x.shape[1]} exceeds max_seq_len={self.config.max_seq_len}")
        h = self.embed_in(x) + self._pos(x.shape[1], x)
        for layer in self.encoder:
            h = layer(h, mask)
        return h

    def _head(self, h):
        parts = []
        if self.binary_head is not None:
            parts.append(self.binary_head(h))
        parts.extend(head(h) for head in self.categorical_heads)
        if self.numerical_head is not None:
            parts.append(self.numerical_head(h))
        return torch.cat(parts, dim=-1).index_select(-1, self._unpermute)

    def decode(self, memory, memory_mask, shifted):
        """Run the decoder stack on already-shifted inputs ``(B, T, d_z)``."""
        t = shifted.shape[1]
        if t > self.config.max_seq_len:
            raise SequenceTooLong(f"target of {t} exceeds max_seq_len={self.config.max_seq_len}")
        y = shifted + self._pos(t, shifted)
        causal = torch.ones(t, t, dtype=torch.bool, device=y.device).tril()[None]
        for layer in self.decoder:
            y = layer(y, causal, memory, memory_mask)
        return self._head(y)

    def shift_right(self, targets):
        b = targets.shape[0]
        start = self.w0.to(targets.dtype).expand(b, 1, -1)
        return torch.cat([start, self.embed_target(targets[:, :-1])], dim=1)

    def forward(self, observed, observed_mask, future):
        memory = self.encode(observed, observed_mask)
        return self.decode(memory, observed_mask, self.shift_right(future))

    def scores_to_vectors(self, scores):
        """Map raw head outputs to packet-vector space (probabilities for discrete channels)."""
        out = scores.clone()
        cols = torch.as_tensor(self.schema.columns(ChannelKind.BINARY), dtype=torch.long)
        if len(cols):
            out[..., cols] = torch.sigmoid(scores[..., cols])
        for s in self.schema.categorical_slices():
            out[..., s] = torch.softmax(scores[..., s], dim=-1)
        return out


def loss(pred, target, schema: FeatureSchema, mask):
    """Mixed loss averaged over unmasked positions.

    Squared error on numerical channels, binary cross-entropy on binary
    logits and softmax cross-entropy on each categorical block, summed per
    position with equal weights.
    """
    m = torch.as_tensor(mask, dtype=pred.dtype)
    n = m.sum()
    if n.item() == 0:
        raise AllMasked("loss needs at least one unmasked position")
    per_pos = torch.zeros(pred.shape[:-1], dtype=pred.dtype)
    num = torch.as_tensor(schema.columns(ChannelKind.NUMERICAL), dtype=torch.long)
    if len(num):
        per_pos = per_pos + ((pred[..., num] - target[..., num]) ** 2).sum(-1)
    binc = torch.as_tensor(schema.columns(ChannelKind.BINARY), dtype=torch.long)
    if len(binc):
        bce = F.binary_cross_entropy_with_logits(pred[..., binc], target[..., binc], reduction="none")
        per_pos = per_pos + bce.sum(-1)
    for s in schema.categorical_slices():
        per_pos = per_pos - (target[..., s] * torch.log_softmax(pred[..., s], dim=-1)).sum(-1)
    return (per_pos * m).sum() / n


@dataclass
class EncodedSequence:
    vectors: np.ndarray  # (L, d_z)
    mask: np.ndarray  # (L,) True for real packets


def _pad(seqs: Sequence[np.ndarray], width: int, dtype) -> tuple[torch.Tensor, torch.Tensor]:
    longest = max(len(s) for s in seqs)
    x = np.zeros((len(seqs), longest, width))
    mask = np.zeros((len(seqs), longest), dtype=bool)
    for i, s in enumerate(seqs):
        x[i, : len(s)] = s
        mask[i, : len(s)] = True
    return torch.as_tensor(x, dtype=dtype), torch.as_tensor(mask)


def _model_dtype(model: nn.Module):
    return next(model.parameters()).dtype


def encode(model: NetTransformer, rows: np.ndarray, mask: np.ndarray | None = None) -> EncodedSequence:
    """Encode one packet sequence ``(L, width)``; padded rows carry mask False."""
    rows = np.asarray(rows, dtype=np.float64)
    if mask is None:
        mask = np.ones(len(rows), dtype=bool)
    model.eval()
    with torch.no_grad():
        x = torch.as_tensor(rows[None], dtype=_model_dtype(model))
        z = model.encode(x, torch.as_tensor(mask[None]))[0].double().numpy()
    z[~mask] = 0.0
    return EncodedSequence(z, np.asarray(mask, dtype=bool))


def decode_predict(
    model: NetTransformer,
    encoded: EncodedSequence,
    target_len: int,
    targets: np.ndarray | None = None,
) -> np.ndarray:
    """Predicted score blocks for ``target_len`` future packets.

    With ``targets`` the decoder is teacher-forced; otherwise it feeds its own
    predictions (as probabilities / values) back in autoregressively.
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    dtype = _model_dtype(model)
    model.eval()
    with torch.no_grad():
        memory = torch.as_tensor(encoded.vectors[None], dtype=dtype)
        mmask = torch.as_tensor(encoded.mask[None])
        if targets is not None:
            tgt = torch.as_tensor(np.asarray(targets)[None, :target_len], dtype=dtype)
            return model.decode(memory, mmask, model.shift_right(tgt))[0].double().numpy()
        shifted = model.w0.to(dtype)[None, None]
        for _ in range(target_len):
            scores = model.decode(memory, mmask, shifted)
            nxt = model.scores_to_vectors(scores[:, -1:])
            shifted = torch.cat([shifted, model.embed_target(nxt)], dim=1)
        return scores[0].double().numpy()


def encode_many(model: NetTransformer, sequences: Sequence[np.ndarray], token_budget: int = 65536) -> list[np.ndarray]:
    """Encode many variable-length sequences; longer ones are split into
    ``max_seq_len`` chunks encoded independently. Returns one ``(L, d_z)``
    float64 array per input sequence."""
    L = model.config.max_seq_len
    chunks: list[tuple[int, int, np.ndarray]] = []
    for si, s in enumerate(sequences):
        for start in range(0, len(s), L):
            chunks.append((si, start, s[start : start + L]))
    out = [np.zeros((len(s), model.config.d_z)) for s in sequences]
    dtype = _model_dtype(model)
    model.eval()
    by_len: dict[int, list[int]] = {}
    for ci, (_, _, c) in enumerate(chunks):
        by_len.setdefault(len(c), []).append(ci)
    with torch.no_grad():
        for n in sorted(by_len):
            idx = by_len[n]
            step = max(1, token_budget // max(n, 1))
            for b in range(0, len(idx), step):
                batch = idx[b : b + step]
                x = torch.as_tensor(np.stack([chunks[ci][2] for ci in batch]), dtype=dtype)
                mask = torch.ones(x.shape[:2], dtype=torch.bool)
                z = model.encode(x, mask).double().numpy()
                for row, ci in enumerate(batch):
                    si, start, c = chunks[ci]
                    out[si][start : start + len(c)] = z[row]
    return out


@dataclass
class TrainResult:
    model: NetTransformer
    history: list[float]


def train(
    dataset: Sequence[tuple[np.ndarray, np.ndarray]],
    schema: FeatureSchema,
    config: TransformerConfig,
    settings: OptimizerSettings | None = None,
    dtype=torch.float32,
) -> TrainResult:
    """Fit the model with ADAM on ``(observed, future)`` row pairs.

    Reproducible for a fixed ``settings.seed``: initialisation, shuffling and
    dropout all draw from seeded generators.
    """
    settings = settings or OptimizerSettings()
    if not dataset:
        raise ValueError("training dataset is empty")
    for obs, fut in dataset:
        if len(obs) > config.max_seq_len or len(fut) > config.max_seq_len:
            raise SequenceTooLong("training sequence exceeds max_seq_len")
    torch.manual_seed(settings.seed)
    model = NetTransformer(schema, config).to(dtype)
    opt = torch.optim.Adam(
        model.parameters(), lr=settings.lr, betas=(settings.beta1, settings.beta2), eps=settings.eps
    )
    gen = torch.Generator().manual_seed(settings.seed)
    width = schema.total_width
    history: list[float] = []
    for epoch in range(settings.epochs):
        model.train()
        perm = torch.randperm(len(dataset), generator=gen).tolist()
        total, count = 0.0, 0
        for b in range(0, len(perm), settings.batch_size):
            batch = [dataset[i] for i in perm[b : b + settings.batch_size]]
            obs, obs_mask = _pad([o for o, _ in batch], width, dtype)
            fut, fut_mask = _pad([f for _, f in batch], width, dtype)
            value = loss(model(obs, obs_mask, fut), fut, schema, fut_mask)
            if not torch.isfinite(value):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {b // settings.batch_size}",
                    {"epoch": epoch, "batch": b // settings.batch_size, "history": list(history)},
                )
            opt.zero_grad()
            value.backward()
            opt.step()
            total += value.item() * len(batch)
            count += len(batch)
        history.append(total / count)
        log.info("epoch %d loss %.6f", epoch, history[-1])
    model.eval()
    return TrainResult(model, history)


def config_dict(config: TransformerConfig) -> dict:
    return asdict(config)


def save_model(path, model: NetTransformer, extra: dict | None = None) -> str:
    from .container import write_container

    meta = {
        "config": config_dict(model.config),
        "schema": model.schema.manifest(),
        "schema_hash": model.schema.hash(),
        "dtype": str(_model_dtype(model)).replace("torch.", ""),
    }
    meta.update(extra or {})
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    return write_container(path, "transformer", meta, arrays)


def load_model(path) -> tuple[NetTransformer, dict]:
    from .container import read_container

    meta, arrays = read_container(path, expect_kind="transformer")
    schema = FeatureSchema.from_manifest(meta["schema"])
    model = NetTransformer(schema, TransformerConfig(**meta["config"]))
    model = model.to(getattr(torch, meta.get("dtype", "float32")))
    model.load_state_dict({k: torch.as_tensor(v) for k, v in arrays.items()})
    model.eval()
    return model, meta
