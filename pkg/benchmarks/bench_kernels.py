"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Times the four hot kernels on the fixture chains plus one full closed-loop
session, and prints per-call latencies with speedups.

    python benchmarks/bench_kernels.py [--repeats 20000]
"""

import argparse
import time

import numpy as np

from teleloop._kernels import available_backends, get_backend
from teleloop.config import default_config
from teleloop.expert import ExpertDriver
from teleloop.kinematics import IkParams, builtin_chain
from teleloop.session import CopilotSession


def bench(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def kernel_benchmarks(chain_name, repeats):
    chain = builtin_chain(chain_name)
    pk = chain.pack
    rng = np.random.default_rng(0)
    margin = np.minimum(0.3, 0.25 * (chain.hi - chain.lo))
    q = rng.uniform(chain.lo + margin, chain.hi - margin)
    qdot = np.zeros(chain.n)
    cmd = chain.clamp(q + 0.05)
    kp = np.full(chain.n, 60.0)
    kd = np.full(chain.n, 3.0)
    inertia = np.full(chain.n, 0.05)
    visc = np.full(chain.n, 0.05)
    coul = np.full(chain.n, 0.01)
    masses = np.full(chain.n, 0.3)
    coms = np.full(chain.n, 0.1)
    g = np.array([0.0, 0.0, -9.81])
    params = IkParams(position_only=chain.n < 6)
    rows = {}
    for name in available_backends():
        be = get_backend(name)
        tp, tq = be.fk(pk, q)
        seed = chain.clamp(q + 0.08)
        rows[name] = {
            "fk": bench(lambda: be.fk(pk, q), repeats),
            "jacobian": bench(lambda: be.jacobian(pk, q), repeats),
            "ik_solve": bench(
                lambda: be.ik_solve(pk, seed, tp, tq, params.position_only,
                                    params.damping, params.max_iters,
                                    params.pos_tol, params.ori_tol,
                                    params.step_clip),
                max(repeats // 10, 1)),
            "arm_step": bench(
                lambda: be.arm_step(pk, q, qdot, cmd, kp, kd, inertia, visc,
                                    coul, masses, coms, g, True, True, 1.0, 0.002),
                repeats),
        }
    return rows


def session_benchmark(backend_name, seconds=4.0):
    import teleloop._kernels as kernels

    saved = kernels.impl
    kernels.impl = get_backend(backend_name)
    try:
        cfg = default_config("peg_insert")
        driver = ExpertDriver(cfg, seed=0)
        session = CopilotSession(cfg, 0, driver=driver)
        driver.reset(session.world, session.t)
        n = int(seconds / cfg.dt)
        t0 = time.perf_counter()
        for _ in range(n):
            session.tick()
        wall = time.perf_counter() - t0
        return wall / n, n / wall
    finally:
        kernels.impl = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20000)
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; benchmarking the pure backend only")

    for chain_name in ("planar3", "lift4", "spatial6"):
        rows = kernel_benchmarks(chain_name, args.repeats)
        print(f"\n== {chain_name} (per call) ==")
        header = f"{'kernel':<10}" + "".join(f"{b:>14}" for b in rows)
        if len(rows) == 2:
            header += f"{'speedup':>10}"
        print(header)
        for kernel in ("fk", "jacobian", "ik_solve", "arm_step"):
            line = f"{kernel:<10}"
            vals = [rows[b][kernel] for b in rows]
            for v in vals:
                line += f"{v * 1e6:>12.2f}us"
            if len(vals) == 2:
                line += f"{vals[0] / vals[1]:>9.1f}x"
            print(line)

    print("\n== full closed-loop session (teleop, insertion task) ==")
    results = {}
    for name in backends:
        per_tick, rate = session_benchmark(name)
        results[name] = per_tick
        print(f"{name:>9}: {per_tick * 1e6:8.1f} us/tick  ({rate / 500:.1f}x real time)")
    if len(results) == 2:
        print(f"  speedup: {results['pure'] / results['compiled']:.1f}x")


if __name__ == "__main__":
    main()
