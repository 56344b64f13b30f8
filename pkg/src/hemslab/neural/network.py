"""Dueling action-value network, optimizer state, and checkpoint format.

The architecture is a shared two-hidden-layer ReLU trunk with two linear
heads: a scalar state value V and per-action advantages A. Action values are

    Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')

so sum_a (Q - V) is zero for every state and adding a constant to all
advantages leaves Q unchanged. Everything is float64.

Checkpoint byte layout (little-endian):

    offset  size  field
    0       8     magic b"HEMSCKPT"
    8       4     uint32 format version (currently 1)
    12      4     uint32 input_dim
    16      4     uint32 hidden1
    20      4     uint32 hidden2
    24      4     uint32 n_actions
    28      8     uint64 adam step count
    36      32    float64 lr, beta1, beta2, eps
    68      ...   float64 row-major arrays: W1, b1, W2, b2, Wv, bv, Wa, ba,
                  then Adam first moments (same order/shapes), then Adam
                  second moments (same order/shapes)

Shapes follow from the header: W1 (input_dim, hidden1), b1 (hidden1,),
W2 (hidden1, hidden2), b2 (hidden2,), Wv (hidden2, 1), bv (1,),
Wa (hidden2, n_actions), ba (n_actions,).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError, UnsupportedVersionError
from ._dispatch import backend_name, kernels

MAGIC = b"HEMSCKPT"
FORMAT_VERSION = 1

PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wv", "bv", "Wa", "ba")


def _shapes(input_dim: int, hidden1: int, hidden2: int, n_actions: int):
    return (
        (input_dim, hidden1), (hidden1,),
        (hidden1, hidden2), (hidden2,),
        (hidden2, 1), (1,),
        (hidden2, n_actions), (n_actions,),
    )


@dataclass
class DuelingNetwork:
    input_dim: int
    hidden1: int
    hidden2: int
    n_actions: int
    params: tuple[np.ndarray, ...]

    @property
    def architecture(self) -> tuple[int, int, int, int]:
        return (self.input_dim, self.hidden1, self.hidden2, self.n_actions)

    def copy(self) -> "DuelingNetwork":
        return DuelingNetwork(self.input_dim, self.hidden1, self.hidden2,
                              self.n_actions, tuple(p.copy() for p in self.params))


def init_network(input_dim: int, n_actions: int, hidden1: int = 128,
                 hidden2: int = 128, seed: int | np.random.SeedSequence = 0) -> DuelingNetwork:
    """Fan-in scaled uniform init for weights, zeros for biases, seeded."""
    if min(input_dim, n_actions, hidden1, hidden2) < 1:
        raise ValueError("all layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    params = []
    for shape in _shapes(input_dim, hidden1, hidden2, n_actions):
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            params.append(rng.uniform(-bound, bound, size=shape))
        else:
            params.append(np.zeros(shape))
    return DuelingNetwork(input_dim, hidden1, hidden2, n_actions, tuple(params))


def forward(net: DuelingNetwork, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, V, A for a batch of observations (n, input_dim)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != net.input_dim:
        raise ValueError(f"expected observations of size {net.input_dim}, got {X.shape[1]}")
    return kernels.forward(*net.params, X)


def q_values(net: DuelingNetwork, obs: np.ndarray) -> np.ndarray:
    """Q row for a single observation."""
    q, _, _ = forward(net, obs.reshape(1, -1))
    return q[0]


def td_loss_and_gradients(net: DuelingNetwork, X: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray):
    """Mean squared TD error over the batch and gradients for every parameter."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if not (len(X) == len(actions) == len(targets)):
        raise ValueError("batch arrays must have equal length")
    if actions.min() < 0 or actions.max() >= net.n_actions:
        raise ValueError("action index out of range")
    return kernels.loss_and_grads(*net.params, X, actions, targets)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: tuple[np.ndarray, ...] = field(default_factory=tuple)
    v: tuple[np.ndarray, ...] = field(default_factory=tuple)

    @classmethod
    def for_network(cls, net: DuelingNetwork, lr: float = 1e-3) -> "AdamState":
        return cls(lr=lr,
                   m=tuple(np.zeros_like(p) for p in net.params),
                   v=tuple(np.zeros_like(p) for p in net.params))


def optimizer_step(net: DuelingNetwork, opt: AdamState, grads) -> None:
    """Apply one Adam update in place."""
    opt.step += 1
    kernels.adam_step(net.params, grads, opt.m, opt.v, opt.step,
                      opt.lr, opt.beta1, opt.beta2, opt.eps)


def sync_target(net: DuelingNetwork, target: DuelingNetwork) -> None:
    """Copy main parameters into the target network."""
    if net.architecture != target.architecture:
        raise ValueError("architecture mismatch between main and target networks")
    for p, t in zip(net.params, target.params):
        np.copyto(t, p)


# -- checkpoints -----------------------------------------------------------

_HEADER = struct.Struct("<8sIIIIIQdddd")


def save_checkpoint(path: str | Path, net: DuelingNetwork, opt: AdamState) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, net.input_dim, net.hidden1,
                          net.hidden2, net.n_actions, opt.step,
                          opt.lr, opt.beta1, opt.beta2, opt.eps)
    chunks = [header]
    for group in (net.params, opt.m, opt.v):
        for arr in group:
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[DuelingNetwork, AdamState]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    (magic, version, input_dim, hidden1, hidden2, n_actions, step,
     lr, beta1, beta2, eps) = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: format version {version} not supported (expected {FORMAT_VERSION})"
        )
    shapes = _shapes(input_dim, hidden1, hidden2, n_actions)
    n_params = sum(int(np.prod(s)) for s in shapes)
    expected = _HEADER.size + 3 * n_params * 8
    if len(raw) != expected:
        raise CheckpointFormatError(
            f"{path}: expected {expected} bytes for the declared architecture, got {len(raw)}"
        )
    offset = _HEADER.size
    groups = []
    for _ in range(3):
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
            arrays.append(arr)
            offset += count * 8
        groups.append(tuple(arrays))
    net = DuelingNetwork(input_dim, hidden1, hidden2, n_actions, groups[0])
    opt = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=step,
                    m=groups[1], v=groups[2])
    return net, opt


__all__ = [
    "AdamState", "DuelingNetwork", "FORMAT_VERSION", "MAGIC", "backend_name",
    "forward", "init_network", "load_checkpoint", "optimizer_step",
    "q_values", "save_checkpoint", "sync_target", "td_loss_and_gradients",
]
