"""Dueling network with swappable compute kernels (compiled or numpy)."""

from ._dispatch import backend_name, compiled_kernels, numpy_kernels
from .network import (
    FORMAT_VERSION,
    MAGIC,
    AdamState,
    DuelingNetwork,
    forward,
    init_network,
    load_checkpoint,
    optimizer_step,
    q_values,
    save_checkpoint,
    sync_target,
    td_loss_and_gradients,
)

__all__ = [
    "AdamState", "DuelingNetwork", "FORMAT_VERSION", "MAGIC",
    "backend_name", "compiled_kernels", "numpy_kernels",
    "forward", "init_network", "load_checkpoint", "optimizer_step",
    "q_values", "save_checkpoint", "sync_target", "td_loss_and_gradients",
]
