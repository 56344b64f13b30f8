"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot operations (batched forward pass, loss plus gradients,
Adam update) at training-realistic shapes. Runs with whichever backends are
importable; without the compiled extension it reports the python backend
alone.

Usage: python benchmarks/bench_backends.py [--batch 64] [--repeats 2000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hemslab.neural import numpy_kernels, compiled_kernels
from hemslab.neural.network import AdamState, init_network, td_loss_and_gradients


def _setup(batch: int):
    net = init_network(18, 16, 128, 128, seed=0)
    rng = np.random.default_rng(1)
    X = rng.random((batch, 18))
    actions = rng.integers(0, 16, size=batch)
    targets = rng.normal(size=batch)
    return net, X, actions, targets


def _time(fn, repeats: int) -> float:
    fn()   # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_backend(name: str, kernels, batch: int, repeats: int) -> dict[str, float]:
    net, X, actions, targets = _setup(batch)
    opt = AdamState.for_network(net)
    actions = np.asarray(actions, dtype=np.int64)

    def fwd():
        kernels.forward(*net.params, X)

    def loss():
        kernels.loss_and_grads(*net.params, X, actions, targets)

    _, grads = kernels.loss_and_grads(*net.params, X, actions, targets)

    def adam():
        kernels.adam_step(net.params, grads, opt.m, opt.v, 1, 1e-3, 0.9, 0.999, 1e-8)

    return {
        "forward": _time(fwd, repeats),
        "loss_and_grads": _time(loss, repeats),
        "adam_step": _time(adam, repeats),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    backends = {"python": numpy_kernels()}
    compiled = compiled_kernels()
    if compiled is not None:
        backends["cython"] = compiled
    else:
        print("compiled extension not available; timing the python backend only")

    results = {name: bench_backend(name, k, args.batch, args.repeats)
               for name, k in backends.items()}

    ops = ["forward", "loss_and_grads", "adam_step"]
    print(f"\nbatch={args.batch} repeats={args.repeats} (microseconds per call)")
    header = f"{'op':<16}" + "".join(f"{name:>12}" for name in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op in ops:
        row = f"{op:<16}" + "".join(f"{results[n][op] * 1e6:>12.1f}" for n in results)
        if len(results) == 2:
            row += f"{results['python'][op] / results['cython'][op]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
