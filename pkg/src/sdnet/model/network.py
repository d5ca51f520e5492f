"""Encoder-decoder transformer on numpy with hand-derived gradients.

Pre-LN blocks, learned positions, tanh-GELU feed-forward, greedy decoding.
64-bit mode makes training bit-reproducible and lets gradients be checked
against finite differences; 32-bit mode is for speed. Loss terms are means
over each task's non-pad target tokens, and batches are always processed as
fixed-size micro-batches reduced in index order, so results do not depend on
the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tokenizer import EOS_ID, PAD_ID, Vocab, detokenize, encode_input, encode_target

NEG_INF = -1e9
LN_EPS = 1e-5
_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


class LossNotFiniteError(RuntimeError):
    """Loss left the reals; carries the offending instance id."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0  # 0 means 4 * d_model
    max_len: int = 256
    dtype: str = "float64"
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if self.vocab_size < 5 or self.max_len < 2:
            raise ValueError("bad model dimensions")

    @property
    def np_dtype(self) -> type:
        return np.float64 if self.dtype == "float64" else np.float32

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size, "d_model": self.d_model,
            "n_layers": self.n_layers, "n_heads": self.n_heads, "d_ff": self.d_ff,
            "max_len": self.max_len, "dtype": self.dtype,
            "init_std": self.init_std, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(**raw)


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    dt = cfg.np_dtype
    p: dict[str, np.ndarray] = {}

    def weight(name: str, *shape: int) -> None:
        p[name] = rng.normal(0.0, cfg.init_std, size=shape).astype(dt)

    def zeros(name: str, *shape: int) -> None:
        p[name] = np.zeros(shape, dtype=dt)

    def layer_norm(prefix: str) -> None:
        p[prefix + ".g"] = np.ones(cfg.d_model, dtype=dt)
        p[prefix + ".b"] = np.zeros(cfg.d_model, dtype=dt)

    def attention(prefix: str) -> None:
        for nm in ("wq", "wk", "wv", "wo"):
            weight(f"{prefix}.{nm}", cfg.d_model, cfg.d_model)
        for nm in ("bq", "bk", "bv", "bo"):
            zeros(f"{prefix}.{nm}", cfg.d_model)

    def ffn(prefix: str) -> None:
        weight(prefix + ".w1", cfg.d_model, cfg.d_ff)
        zeros(prefix + ".b1", cfg.d_ff)
        weight(prefix + ".w2", cfg.d_ff, cfg.d_model)
        zeros(prefix + ".b2", cfg.d_model)

    weight("tok_emb", cfg.vocab_size, cfg.d_model)
    weight("pos_enc", cfg.max_len, cfg.d_model)
    weight("pos_dec", cfg.max_len, cfg.d_model)
    for i in range(cfg.n_layers):
        layer_norm(f"enc{i}.ln1")
        attention(f"enc{i}.attn")
        layer_norm(f"enc{i}.ln2")
        ffn(f"enc{i}.ffn")
    layer_norm("enc_ln")
    for i in range(cfg.n_layers):
        layer_norm(f"dec{i}.ln1")
        attention(f"dec{i}.self")
        layer_norm(f"dec{i}.ln2")
        attention(f"dec{i}.cross")
        layer_norm(f"dec{i}.ln3")
        ffn(f"dec{i}.ffn")
    layer_norm("dec_ln")
    weight("out.w", cfg.d_model, cfg.vocab_size)
    zeros("out.b", cfg.vocab_size)
    return p


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# ---- differentiable primitives: each forward returns (out, cache) ----


def _linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def _linear_bwd(dy, cache):
    x, w = cache
    dx = dy @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, x2.T @ dy2, dy2.sum(axis=0)


def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxh = dy * g
    dx = inv * (
        dxh
        - dxh.mean(axis=-1, keepdims=True)
        - xhat * (dxh * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _gelu_fwd(x):
    t = np.tanh(_GELU_C * (x + _GELU_A * x**3))
    return 0.5 * x * (1.0 + t), (x, t)


def _gelu_bwd(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def softmax_last(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, k = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * k)


def _attention_fwd(p, prefix, q_in, kv_in, n_heads, key_mask=None, causal=False):
    q, cq = _linear_fwd(q_in, p[f"{prefix}.wq"], p[f"{prefix}.bq"])
    k, ck = _linear_fwd(kv_in, p[f"{prefix}.wk"], p[f"{prefix}.bk"])
    v, cv = _linear_fwd(kv_in, p[f"{prefix}.wv"], p[f"{prefix}.bv"])
    qh, kh, vh = (_split_heads(t_, n_heads) for t_ in (q, k, v))
    scale = 1.0 / math.sqrt(qh.shape[-1])
    scores = (qh @ kh.swapaxes(-1, -2)) * scale
    if key_mask is not None:
        bias = np.where(key_mask, 0.0, NEG_INF).astype(scores.dtype)
        scores = scores + bias[:, None, None, :]
    if causal:
        tq, tk = scores.shape[-2:]
        scores = scores + np.triu(np.full((tq, tk), NEG_INF, dtype=scores.dtype), k=1)
    attn = softmax_last(scores)
    ctx = attn @ vh
    out, co = _linear_fwd(_merge_heads(ctx), p[f"{prefix}.wo"], p[f"{prefix}.bo"])
    return out, (prefix, n_heads, scale, cq, ck, cv, qh, kh, vh, attn, co)


def _attention_bwd(dout, cache, grads):
    prefix, n_heads, scale, cq, ck, cv, qh, kh, vh, attn, co = cache
    dmerged, dwo, dbo = _linear_bwd(dout, co)
    grads[f"{prefix}.wo"] += dwo
    grads[f"{prefix}.bo"] += dbo
    dctx = _split_heads(dmerged, n_heads)
    dattn = dctx @ vh.swapaxes(-1, -2)
    dvh = attn.swapaxes(-1, -2) @ dctx
    ds = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dqh = (ds @ kh) * scale
    dkh = (ds.swapaxes(-1, -2) @ qh) * scale
    dq_in, dwq, dbq = _linear_bwd(_merge_heads(dqh), cq)
    dkv_k, dwk, dbk = _linear_bwd(_merge_heads(dkh), ck)
    dkv_v, dwv, dbv = _linear_bwd(_merge_heads(dvh), cv)
    grads[f"{prefix}.wq"] += dwq
    grads[f"{prefix}.bq"] += dbq
    grads[f"{prefix}.wk"] += dwk
    grads[f"{prefix}.bk"] += dbk
    grads[f"{prefix}.wv"] += dwv
    grads[f"{prefix}.bv"] += dbv
    return dq_in, dkv_k + dkv_v


def _ffn_fwd(p, prefix, x):
    u, c1 = _linear_fwd(x, p[prefix + ".w1"], p[prefix + ".b1"])
    g, cg = _gelu_fwd(u)
    y, c2 = _linear_fwd(g, p[prefix + ".w2"], p[prefix + ".b2"])
    return y, (prefix, c1, cg, c2)


def _ffn_bwd(dy, cache, grads):
    prefix, c1, cg, c2 = cache
    dg, dw2, db2 = _linear_bwd(dy, c2)
    du = _gelu_bwd(dg, cg)
    dx, dw1, db1 = _linear_bwd(du, c1)
    grads[prefix + ".w1"] += dw1
    grads[prefix + ".b1"] += db1
    grads[prefix + ".w2"] += dw2
    grads[prefix + ".b2"] += db2
    return dx


def _ln_bwd_acc(dy, cache, prefix, grads):
    dx, dg, db = _layernorm_bwd(dy, cache)
    grads[prefix + ".g"] += dg
    grads[prefix + ".b"] += db
    return dx


# ---- encoder / decoder stacks ----


def encoder_forward(p, cfg: ModelConfig, src, src_mask):
    x = p["tok_emb"][src] + p["pos_enc"][: src.shape[1]]
    layer_caches = []
    for i in range(cfg.n_layers):
        pre = f"enc{i}"
        h1, cl1 = _layernorm_fwd(x, p[pre + ".ln1.g"], p[pre + ".ln1.b"])
        a, ca = _attention_fwd(p, pre + ".attn", h1, h1, cfg.n_heads, key_mask=src_mask)
        x = x + a
        h2, cl2 = _layernorm_fwd(x, p[pre + ".ln2.g"], p[pre + ".ln2.b"])
        f, cf = _ffn_fwd(p, pre + ".ffn", h2)
        x = x + f
        layer_caches.append((pre, cl1, ca, cl2, cf))
    enc, cfin = _layernorm_fwd(x, p["enc_ln.g"], p["enc_ln.b"])
    return enc, (src, layer_caches, cfin)


def encoder_backward(denc, cache, grads):
    src, layer_caches, cfin = cache
    dx = _ln_bwd_acc(denc, cfin, "enc_ln", grads)
    for pre, cl1, ca, cl2, cf in reversed(layer_caches):
        dh2 = _ffn_bwd(dx, cf, grads)
        dx = dx + _ln_bwd_acc(dh2, cl2, pre + ".ln2", grads)
        dq, dkv = _attention_bwd(dx, ca, grads)
        dx = dx + _ln_bwd_acc(dq + dkv, cl1, pre + ".ln1", grads)
    np.add.at(grads["tok_emb"], src, dx)
    grads["pos_enc"][: src.shape[1]] += dx.sum(axis=0)


def decoder_forward(p, cfg: ModelConfig, dec_in, enc_out, src_mask):
    x = p["tok_emb"][dec_in] + p["pos_dec"][: dec_in.shape[1]]
    layer_caches = []
    for i in range(cfg.n_layers):
        pre = f"dec{i}"
        h1, cl1 = _layernorm_fwd(x, p[pre + ".ln1.g"], p[pre + ".ln1.b"])
        a, ca = _attention_fwd(p, pre + ".self", h1, h1, cfg.n_heads, causal=True)
        x = x + a
        h2, cl2 = _layernorm_fwd(x, p[pre + ".ln2.g"], p[pre + ".ln2.b"])
        c, cc = _attention_fwd(p, pre + ".cross", h2, enc_out, cfg.n_heads, key_mask=src_mask)
        x = x + c
        h3, cl3 = _layernorm_fwd(x, p[pre + ".ln3.g"], p[pre + ".ln3.b"])
        f, cf = _ffn_fwd(p, pre + ".ffn", h3)
        x = x + f
        layer_caches.append((pre, cl1, ca, cl2, cc, cl3, cf))
    h, cfin = _layernorm_fwd(x, p["dec_ln.g"], p["dec_ln.b"])
    logits, cout = _linear_fwd(h, p["out.w"], p["out.b"])
    return logits, (dec_in, layer_caches, cfin, cout)


def decoder_backward(dlogits, cache, grads):
    """Returns the gradient flowing into the encoder output."""
    dec_in, layer_caches, cfin, cout = cache
    dh, dwout, dbout = _linear_bwd(dlogits, cout)
    grads["out.w"] += dwout
    grads["out.b"] += dbout
    dx = _ln_bwd_acc(dh, cfin, "dec_ln", grads)
    denc = None
    for pre, cl1, ca, cl2, cc, cl3, cf in reversed(layer_caches):
        dh3 = _ffn_bwd(dx, cf, grads)
        dx = dx + _ln_bwd_acc(dh3, cl3, pre + ".ln3", grads)
        dq, dkv = _attention_bwd(dx, cc, grads)
        denc = dkv if denc is None else denc + dkv
        dx = dx + _ln_bwd_acc(dq, cl2, pre + ".ln2", grads)
        dqs, dkvs = _attention_bwd(dx, ca, grads)
        dx = dx + _ln_bwd_acc(dqs + dkvs, cl1, pre + ".ln1", grads)
    np.add.at(grads["tok_emb"], dec_in, dx)
    grads["pos_dec"][: dec_in.shape[1]] += dx.sum(axis=0)
    return denc


# ---- batching and loss ----


@dataclass(frozen=True)
class Batch:
    src: np.ndarray        # (B, S) int64
    src_mask: np.ndarray   # (B, S) bool
    dec_in: np.ndarray     # (B, T) int64, [PAD] doubles as the start token
    labels: np.ndarray     # (B, T) int64, [PAD] marks positions past the target
    is_md: np.ndarray      # (B,) bool
    ids: tuple[str, ...]

    def __len__(self) -> int:
        return self.src.shape[0]


def make_batch(instances: Sequence, vocab: Vocab, cfg: ModelConfig,
               ids: Sequence[str] | None = None) -> Batch:
    if not instances:
        raise ValueError("empty batch")
    enc_rows = [encode_input(i.prompt_text, i.input_text, vocab, cfg.max_len) for i in instances]
    tgt_rows = [encode_target(i.target_text, vocab, cfg.max_len) for i in instances]
    S = max(len(r) for r in enc_rows)
    T = max(len(r) for r in tgt_rows)
    n = len(instances)
    src = np.full((n, S), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((n, S), dtype=bool)
    labels = np.full((n, T), PAD_ID, dtype=np.int64)
    dec_in = np.full((n, T), PAD_ID, dtype=np.int64)
    for r, (er, tr) in enumerate(zip(enc_rows, tgt_rows)):
        src[r, : len(er)] = er
        src_mask[r, : len(er)] = True
        labels[r, : len(tr)] = tr
        dec_in[r, 1 : len(tr)] = tr[:-1]
    is_md = np.array([i.task == "MD" for i in instances], dtype=bool)
    if ids is None:
        ids = tuple(str(k) for k in range(n))
    return Batch(src=src, src_mask=src_mask, dec_in=dec_in, labels=labels,
                 is_md=is_md, ids=tuple(ids))


@dataclass(frozen=True)
class LossReport:
    total: float
    md_term: float
    eg_term: float
    md_tokens: int
    eg_tokens: int


def _micro_loss_grads(p, cfg, src, src_mask, dec_in, labels, pos_w):
    enc, enc_cache = encoder_forward(p, cfg, src, src_mask)
    logits, dec_cache = decoder_forward(p, cfg, dec_in, enc, src_mask)
    m = logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(logits - m).sum(axis=-1, keepdims=True)) + m
    label_logit = np.take_along_axis(logits, labels[..., None], axis=-1)[..., 0]
    ce = logz[..., 0] - label_logit
    dlogits = np.exp(logits - logz) * pos_w[..., None]
    b_idx = np.arange(labels.shape[0])[:, None]
    t_idx = np.arange(labels.shape[1])[None, :]
    dlogits[b_idx, t_idx, labels] -= pos_w
    grads = zero_grads(p)
    denc = decoder_backward(dlogits, dec_cache, grads)
    encoder_backward(denc, enc_cache, grads)
    return ce, grads


def forward_loss(
    p: dict[str, np.ndarray],
    cfg: ModelConfig,
    batch: Batch,
    micro_size: int = 8,
    workers: int = 1,
) -> tuple[LossReport, dict[str, np.ndarray]]:
    """Teacher-forced cross entropy: mean over MD tokens plus mean over EG
    tokens, with analytic gradients. Deterministic for any worker count."""
    labels = batch.labels
    tok_mask = labels != PAD_ID
    md_mask = tok_mask & batch.is_md[:, None]
    eg_mask = tok_mask & ~batch.is_md[:, None]
    n_md = int(md_mask.sum())
    n_eg = int(eg_mask.sum())
    pos_w = np.zeros(labels.shape, dtype=cfg.np_dtype)
    if n_md:
        pos_w[md_mask] = 1.0 / n_md
    if n_eg:
        pos_w[eg_mask] = 1.0 / n_eg

    n = len(batch)
    slices = [slice(i, min(i + micro_size, n)) for i in range(0, n, micro_size)]

    def run(sl: slice):
        return _micro_loss_grads(
            p, cfg, batch.src[sl], batch.src_mask[sl], batch.dec_in[sl], labels[sl], pos_w[sl]
        )

    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, slices))
    else:
        results = [run(sl) for sl in slices]

    md_sum = 0.0
    eg_sum = 0.0
    grads = zero_grads(p)
    for sl, (ce, g) in zip(slices, results):
        if not np.isfinite(ce[tok_mask[sl]]).all():
            bad = int(np.where(~np.isfinite(ce).all(axis=1))[0][0])
            raise LossNotFiniteError(f"non-finite loss on instance {batch.ids[sl][bad]!r}")
        md_sum += float(ce[md_mask[sl]].sum())
        eg_sum += float(ce[eg_mask[sl]].sum())
        for k in grads:
            grads[k] += g[k]
    md_term = md_sum / n_md if n_md else 0.0
    eg_term = eg_sum / n_eg if n_eg else 0.0
    return LossReport(total=md_term + eg_term, md_term=md_term, eg_term=eg_term,
                      md_tokens=n_md, eg_tokens=n_eg), grads


def generate(
    p: dict[str, np.ndarray],
    cfg: ModelConfig,
    vocab: Vocab,
    prompt_text: str,
    input_text: str,
    max_len: int = 64,
) -> str:
    """Greedy decoding; argmax ties break toward the lowest token id."""
    src = np.array([encode_input(prompt_text, input_text, vocab, cfg.max_len)], dtype=np.int64)
    src_mask = np.ones(src.shape, dtype=bool)
    enc, _ = encoder_forward(p, cfg, src, src_mask)
    out_ids: list[int] = []
    dec = [PAD_ID]
    for _ in range(max_len):
        logits, _ = decoder_forward(p, cfg, np.array([dec], dtype=np.int64), enc, src_mask)
        nxt = int(np.argmax(logits[0, -1]))
        if nxt == EOS_ID:
            break
        out_ids.append(nxt)
        dec.append(nxt)
        if len(dec) >= cfg.max_len:
            break
    return detokenize(vocab.decode(out_ids))
