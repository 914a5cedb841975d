"""Compare the numba kernel path against the pure-numpy reference.

Run with the package importable (`pip install -e .`):

    python3 benchmarks/bench_kernels.py [--batch 1000] [--dim 128] [--reps 200]

The active path follows MADIRL_NUMBA (auto/0/1); the numpy reference
implementations are timed alongside regardless, so one invocation reports the
speedup of whatever the active path is. A second section times one full
actor-critic training round under the active path.
"""

import argparse
import time

import numpy as np

from madirl.autodiff import kernels


def _time(fn, reps):
    fn()  # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_kernels(batch, dim, reps):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, dim)).astype(np.float32)
    g = rng.normal(size=(batch, dim)).astype(np.float32)
    p = rng.normal(size=(batch, dim)).astype(np.float32)
    m = np.zeros_like(p)
    v = np.zeros_like(p)

    active = [
        ("leaky_relu", lambda: kernels.leaky_relu(x, 0.01)),
        ("sigmoid", lambda: kernels.sigmoid(x)),
        ("log_sigmoid", lambda: kernels.log_sigmoid(x)),
        ("softmax_rows", lambda: kernels.softmax_rows(x)),
        ("log_softmax_rows", lambda: kernels.log_softmax_rows(x)),
        ("huber", lambda: kernels.huber(x, 1.0)),
        ("adam_update", lambda: kernels.adam_update(p, g, m, v, 1e-3, 0.9, 0.999,
                                                    1e-8, 0.1, 0.001)),
    ]
    reference = {
        "leaky_relu": lambda: kernels.numpy_impls["leaky_relu"](x, 0.01),
        "sigmoid": lambda: kernels.numpy_impls["sigmoid"](x),
        "log_sigmoid": lambda: kernels.numpy_impls["log_sigmoid"](x),
        "softmax_rows": lambda: kernels.numpy_impls["softmax_rows"](x),
        "log_softmax_rows": lambda: kernels.numpy_impls["log_softmax_rows"](x),
        "huber": lambda: kernels.numpy_impls["huber"](x, 1.0),
    }

    path = "numba" if kernels.NUMBA_ENABLED else "numpy"
    print(f"active path: {path}   array: ({batch}, {dim}) float32   reps: {reps}\n")
    print(f"{'kernel':<18}{'active µs':>12}{'numpy ref µs':>14}{'speedup':>9}")
    for name, fn in active:
        t_active = _time(fn, reps) * 1e6
        if name in reference:
            t_ref = _time(reference[name], reps) * 1e6
            print(f"{name:<18}{t_active:>12.1f}{t_ref:>14.1f}{t_ref / t_active:>9.2f}x")
        else:
            print(f"{name:<18}{t_active:>12.1f}{'-':>14}{'-':>9}")


def bench_training_round(reps):
    from madirl.actors import MAACLearner
    from madirl.envs import make_env
    from madirl.replay import Batch

    env = make_env("toy_coop")
    spec = env.spec
    rng = np.random.default_rng(0)
    learner = MAACLearner(spec, np.random.default_rng(1), np.random.default_rng(2),
                          tau_policy=0.01, tau_critic=0.01)
    batch = Batch(obs=[rng.normal(size=(1000, d)).astype(np.float32) for d in spec.obs_dims],
                  actions=[rng.integers(a, size=1000) for a in spec.n_actions],
                  next_obs=[rng.normal(size=(1000, d)).astype(np.float32) for d in spec.obs_dims],
                  done=np.zeros(1000, dtype=np.float32),
                  gt_rewards=rng.normal(size=(1000, 2)).astype(np.float32))

    def round_fn():
        learner.update_critic(batch, batch.gt_rewards)
        learner.update_policies(batch)
        learner.update_targets()

    t = _time(round_fn, reps)
    path = "numba" if kernels.NUMBA_ENABLED else "numpy"
    print(f"\nfull actor-critic round (batch 1000, hidden 128, {path} path): "
          f"{t * 1e3:.1f} ms")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--skip-round", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.batch, args.dim, args.reps)
    if not args.skip_round:
        bench_training_round(max(5, args.reps // 20))
