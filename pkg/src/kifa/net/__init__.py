"""Attention recurrent network: model, training, checkpoints, core backends."""

from ._backend import BACKEND
from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    AttentionOutput,
    NetConfig,
    NetParams,
    forward,
    forward_full,
    grad_check,
    init_params,
    joint_distribution,
    loss_and_grads,
    penalized_loss,
    train,
)

__all__ = [
    "AttentionOutput", "BACKEND", "NetConfig", "NetParams", "forward",
    "forward_full", "grad_check", "init_params", "joint_distribution",
    "load_checkpoint", "loss_and_grads", "penalized_loss", "save_checkpoint",
    "train",
]
