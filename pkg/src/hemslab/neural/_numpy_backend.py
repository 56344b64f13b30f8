"""Pure-numpy kernels for the dueling network.

Same call signatures as the compiled backend in _kernels.pyx. Arrays are
float64, C-contiguous; weight matrices are laid out (fan_in, fan_out).
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def forward(W1, b1, W2, b2, Wv, bv, Wa, ba, X):
    """Batched dueling forward pass.

    Returns (Q, V, A) where Q = V + A - mean(A) row-wise.
    """
    h1 = np.maximum(X @ W1 + b1, 0.0)
    h2 = np.maximum(h1 @ W2 + b2, 0.0)
    v = h2 @ Wv + bv
    adv = h2 @ Wa + ba
    q = v + adv - adv.mean(axis=1, keepdims=True)
    return q, v, adv


def loss_and_grads(W1, b1, W2, b2, Wv, bv, Wa, ba, X, actions, targets):
    """Mean squared TD error on the chosen actions and its exact gradients.

    The advantage-mean subtraction is differentiated, not treated as a
    constant: dL/dA_ij = dQ_ij - mean_j(dQ_ij).
    """
    z1 = X @ W1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2 + b2
    h2 = np.maximum(z2, 0.0)
    v = h2 @ Wv + bv
    adv = h2 @ Wa + ba
    q = v + adv - adv.mean(axis=1, keepdims=True)

    n, n_actions = q.shape
    rows = np.arange(n)
    err = q[rows, actions] - targets
    loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / n
    dv = dq.sum(axis=1, keepdims=True)
    da = dq - dv / n_actions

    gWv = h2.T @ dv
    gbv = dv.sum(axis=0)
    gWa = h2.T @ da
    gba = da.sum(axis=0)

    dh2 = dv @ Wv.T + da @ Wa.T
    dz2 = dh2 * (z2 > 0.0)
    gW2 = h1.T @ dz2
    gb2 = dz2.sum(axis=0)

    dh1 = dz2 @ W2.T
    dz1 = dh1 * (z1 > 0.0)
    gW1 = X.T @ dz1
    gb1 = dz1.sum(axis=0)

    return loss, (gW1, gb1, gW2, gb2, gWv, gbv, gWa, gba)


def adam_step(params, grads, m, v, t, lr, beta1, beta2, eps):
    """One Adam update, in place on params, m, and v. t is 1-based."""
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, mi, vi in zip(params, grads, m, v):
        mi *= beta1
        mi += (1.0 - beta1) * g
        vi *= beta2
        vi += (1.0 - beta2) * g * g
        p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
