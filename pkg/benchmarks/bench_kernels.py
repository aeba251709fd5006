"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--batch 4096] [--dim 200] [--repeats 30]

Times the two hot training kernels (blockwise bilinear scores and the
gradient scatter) on a realistic minibatch shape.  The same comparison can
be driven end to end by running anything in this package with
ITERKG_NO_NUMBA=1.
"""

import argparse
import time

import numpy as np

from iterkg import kernels


def make_workload(rng, batch, dim, n_ent=20000, n_rel=300):
    ns = dim // 2
    nb = (dim - ns) // 2
    ent = rng.normal(size=(n_ent, dim))
    sc = rng.normal(size=(n_rel, ns))
    rot = rng.normal(size=(n_rel, nb, 2))
    s = rng.integers(n_ent, size=batch)
    r = rng.integers(n_rel, size=batch)
    o = rng.integers(n_ent, size=batch)
    vs, vo, msc = ent[s], ent[o], sc[r]
    ma = np.ascontiguousarray(rot[r, :, 0])
    mb = np.ascontiguousarray(rot[r, :, 1])
    rho = rng.normal(size=batch) / batch
    ent_ids, inv = np.unique(np.concatenate([s, o]), return_inverse=True)
    rel_ids, rinv = np.unique(r, return_inverse=True)
    return dict(
        vs=vs, vo=vo, msc=msc, ma=ma, mb=mb, rho=rho,
        es=inv[:batch], eo=inv[batch:], rr=rinv,
        shapes=((len(ent_ids), dim), (len(rel_ids), ns), (len(rel_ids), nb), (len(rel_ids), nb)),
    )


def time_fn(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=4096)
    parser.add_argument("--dim", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    w = make_workload(rng, args.batch, args.dim)
    score_args = (w["vs"], w["vo"], w["msc"], w["ma"], w["mb"])

    def grads(impl):
        bufs = [np.zeros(sh) for sh in w["shapes"]]
        impl(*score_args, w["rho"], w["es"], w["eo"], w["rr"], *bufs)
        return bufs

    rows = [("bilinear scores", "numpy", time_fn(lambda: kernels.bilinear_scores_numpy(*score_args), args.repeats))]
    if kernels.bilinear_scores_jit is not None:
        kernels.bilinear_scores_jit(*score_args)  # compile outside the timer
        rows.append(("bilinear scores", "numba", time_fn(lambda: kernels.bilinear_scores_jit(*score_args), args.repeats)))
        np.testing.assert_allclose(
            kernels.bilinear_scores_jit(*score_args), kernels.bilinear_scores_numpy(*score_args), atol=1e-10
        )

    rows.append(("gradient scatter", "numpy", time_fn(lambda: grads(kernels.accumulate_grads_numpy), args.repeats)))
    if kernels.accumulate_grads_jit is not None:
        grads(kernels.accumulate_grads_jit)
        rows.append(("gradient scatter", "numba", time_fn(lambda: grads(kernels.accumulate_grads_jit), args.repeats)))
        for a, b in zip(grads(kernels.accumulate_grads_jit), grads(kernels.accumulate_grads_numpy)):
            np.testing.assert_allclose(a, b, atol=1e-10)

    print(f"batch={args.batch} dim={args.dim} (best of {args.repeats})")
    base = {}
    for name, path, secs in rows:
        base.setdefault(name, secs)
        speedup = base[name] / secs
        print(f"  {name:18s} {path:6s} {secs * 1e3:8.3f} ms   x{speedup:4.1f}")
    if not kernels.NUMBA_ACTIVE:
        print("note: numba path inactive (ITERKG_NO_NUMBA set or numba missing)")


if __name__ == "__main__":
    main()
