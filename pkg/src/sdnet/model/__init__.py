"""Toy sequence-to-sequence model: tokenizer, network, training."""

from .network import (
    Batch,
    LossNotFiniteError,
    LossReport,
    ModelConfig,
    forward_loss,
    generate,
    init_params,
    make_batch,
    softmax_last,
    zero_grads,
)
from .tokenizer import (
    EG_ID,
    EOS_ID,
    MD_ID,
    PAD_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    Vocab,
    build_vocab,
    detokenize,
    encode_input,
    encode_target,
    tokenize,
)
from .trainer import (
    AdamWState,
    StepLog,
    TrainConfig,
    TrainingDivergedError,
    adamw_step,
    clone_params,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    total_steps_for,
    train,
)

__all__ = [
    "Batch", "LossNotFiniteError", "LossReport", "ModelConfig", "forward_loss",
    "generate", "init_params", "make_batch", "softmax_last", "zero_grads",
    "EG_ID", "EOS_ID", "MD_ID", "PAD_ID", "SPECIAL_TOKENS", "UNK_ID", "Vocab",
    "build_vocab", "detokenize", "encode_input", "encode_target", "tokenize",
    "AdamWState", "StepLog", "TrainConfig", "TrainingDivergedError", "adamw_step",
    "clone_params", "load_checkpoint", "lr_at", "save_checkpoint",
    "total_steps_for", "train",
]
