"""Training loop: decoupled-weight-decay Adam, warmup/linear-decay schedule,
seeded epoch shuffling, and self-describing npz checkpoints."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .network import (
    Batch,
    LossNotFiniteError,
    LossReport,
    ModelConfig,
    forward_loss,
    make_batch,
)
from .tokenizer import Vocab

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss or parameters left the reals; carries the failing step index."""


@dataclass(frozen=True)
class TrainConfig:
    mode: Literal["pretrain", "finetune"]
    batch_size: int
    lr: float
    steps: int = 0            # pretrain budget
    epochs: int = 0           # finetune budget
    schedule: Literal["constant", "linear"] = "constant"
    warmup_frac: float = 0.06
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    micro_size: int = 8
    workers: int = 1

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.lr <= 0:
            raise ValueError("batch size and learning rate must be positive")
        if self.mode == "pretrain" and self.steps < 1:
            raise ValueError("pretrain mode needs a positive step budget")
        if self.mode == "finetune" and self.epochs < 1:
            raise ValueError("finetune mode needs a positive epoch budget")
        if not (0.0 <= self.warmup_frac < 1.0):
            raise ValueError("warmup_frac must lie in [0, 1)")

    @classmethod
    def pretrain_defaults(cls, steps: int, seed: int = 0, **kw) -> "TrainConfig":
        return cls(mode="pretrain", batch_size=16, lr=5e-5, steps=steps,
                   schedule="constant", seed=seed, **kw)

    @classmethod
    def finetune_defaults(cls, epochs: int, seed: int = 0, **kw) -> "TrainConfig":
        return cls(mode="finetune", batch_size=4, lr=1e-4, epochs=epochs,
                   schedule="linear", seed=seed, **kw)


def lr_at(cfg: TrainConfig, step: int, total_steps: int) -> float:
    """Step 0 is 0 under the linear schedule; the peak sits at the warmup
    boundary (warmup_frac of the budget), then decays linearly to 0."""
    if cfg.schedule == "constant":
        return cfg.lr
    warmup = max(1, int(round(total_steps * cfg.warmup_frac)))
    if step < warmup:
        return cfg.lr * step / warmup
    if total_steps <= warmup:
        return cfg.lr
    return cfg.lr * (total_steps - step) / (total_steps - warmup)


@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamWState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    cfg: TrainConfig,
) -> None:
    """In-place update; weight decay is decoupled and applied to matrices only
    (biases and norm parameters are exempt)."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        if cfg.weight_decay and params[k].ndim > 1:
            update = update + cfg.weight_decay * params[k]
        params[k] -= lr * update


@dataclass(frozen=True)
class StepLog:
    step: int
    lr: float
    report: LossReport


def total_steps_for(cfg: TrainConfig, n_instances: int) -> int:
    steps_per_epoch = math.ceil(n_instances / cfg.batch_size)
    return cfg.steps if cfg.mode == "pretrain" else cfg.epochs * steps_per_epoch


def train(
    params: dict[str, np.ndarray],
    instances: Sequence,
    vocab: Vocab,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
) -> list[StepLog]:
    """Trains `params` in place; returns the per-step loss log."""
    if not instances:
        raise ValueError("no training instances")
    rng = np.random.default_rng(tcfg.seed)
    n = len(instances)
    total = total_steps_for(tcfg, n)
    state = AdamWState.init(params)
    log: list[StepLog] = []
    step = 0
    while step < total:
        order = rng.permutation(n).tolist()
        for b0 in range(0, n, tcfg.batch_size):
            if step >= total:
                break
            idx = order[b0 : b0 + tcfg.batch_size]
            batch = make_batch([instances[i] for i in idx], vocab, mcfg,
                               ids=[str(i) for i in idx])
            try:
                report, grads = forward_loss(params, mcfg, batch,
                                             micro_size=tcfg.micro_size,
                                             workers=tcfg.workers)
            except LossNotFiniteError as exc:
                raise TrainingDivergedError(f"step {step}: {exc}") from exc
            lr = lr_at(tcfg, step, total)
            adamw_step(params, grads, state, lr, tcfg)
            for k, p in params.items():
                if not np.isfinite(p).all():
                    raise TrainingDivergedError(f"step {step}: parameter {k!r} not finite")
            log.append(StepLog(step=step, lr=lr, report=report))
            step += 1
    return log


def clone_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: p.copy() for k, p in params.items()}


def save_checkpoint(
    path: str | Path,
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    vocab: Vocab,
    extra: dict | None = None,
) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "vocab": list(vocab.id_to_token),
        "extra": extra or {},
    }
    meta_bytes = np.frombuffer(json.dumps(meta, ensure_ascii=False).encode("utf-8"), dtype=np.uint8)
    arrays = {f"param/{k}": v for k, v in params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=meta_bytes, **arrays)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], ModelConfig, Vocab, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
    cfg = ModelConfig.from_dict(meta["config"])
    vocab = Vocab(id_to_token=tuple(meta["vocab"]))
    return params, cfg, vocab, meta["extra"]
