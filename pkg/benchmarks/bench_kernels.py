"""Timing comparison of the numba kernels against the numpy fallbacks.

Covers the batched quadratic operations that dominate the barrier solver
and the gain tables that dominate the link simulator, at the default
problem size (K=4, M=10 -> n=80, m=11 constraints) and at the largest
sweep size (M=40 -> n=320), plus one end-to-end optimizer run per path.

Run:  python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time
import timeit

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from eed2d import _kernels  # noqa: E402


def bench(label, fn, *args, repeat=5, number=200):
    fn(*args)  # warm the JIT / cache
    best = min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number))
    per_call = best / number * 1e6
    print(f"  {label:<28s} {per_call:10.1f} us/call")
    return per_call


def make_problem(m_cons, n, rng):
    q = np.zeros((m_cons, n, n))
    for i in range(m_cons):
        a = rng.standard_normal((n, 4))
        q[i] = a @ a.T / n
    b = rng.standard_normal((m_cons, n))
    c = -rng.uniform(0.5, 2.0, size=m_cons)
    x = 0.1 * rng.standard_normal(n)
    grads = rng.standard_normal((m_cons, n))
    w_lin = -rng.uniform(0.5, 2.0, size=m_cons)
    w_out = -rng.uniform(0.5, 2.0, size=m_cons)
    return q, b, c, x, grads, w_lin, w_out


def main():
    rng = np.random.default_rng(0)
    print(f"numba path enabled: {_kernels.USE_NUMBA}")

    for n in (80, 320):
        m_cons = 11
        q, b, c, x, grads, w_lin, w_out = make_problem(m_cons, n, rng)
        print(f"\nbatched quadratics, m={m_cons}, n={n}")
        t_nb = {}
        t_np = {}
        pairs = [
            ("quad_values", _kernels.quad_values, _kernels.quad_values_np, (q, b, c, x)),
            ("quad_grads", _kernels.quad_grads, _kernels.quad_grads_np, (q, b, x)),
            (
                "quad_vals_grads",
                _kernels.quad_vals_grads,
                _kernels.quad_vals_grads_np,
                (q, b, c, x),
            ),
            (
                "barrier_hessian",
                _kernels.barrier_hessian,
                _kernels.barrier_hessian_np,
                (q, grads, w_lin, w_out),
            ),
        ]
        for label, fast, ref, args in pairs:
            t_nb[label] = bench(f"{label} (dispatched)", fast, *args)
            t_np[label] = bench(f"{label} (numpy)", ref, *args)
            fast_out, ref_out = fast(*args), ref(*args)
            if not isinstance(fast_out, tuple):
                fast_out, ref_out = (fast_out,), (ref_out,)
            for a_out, b_out in zip(fast_out, ref_out):
                assert np.allclose(a_out, b_out, rtol=1e-10, atol=1e-12)

    print("\ngain tables, 16 channels x 4 beams, M=10")
    ch = rng.standard_normal((16, 10)) + 1j * rng.standard_normal((16, 10))
    w = rng.standard_normal((4, 10)) + 1j * rng.standard_normal((4, 10))
    bench("beam_gains (dispatched)", _kernels.beam_gains, ch, w, number=2000)
    bench("beam_gains (numpy)", _kernels.beam_gains_np, ch, w, number=2000)

    print("\nend-to-end alternating solve (seed 0, paper scale)")
    snippet = (
        "import time\n"
        "from eed2d.params import SystemParams\n"
        "from eed2d.channel import draw_channels, generate_topology, trial_rng\n"
        "from eed2d.algorithms import alternating_optimize\n"
        "params = SystemParams()\n"
        "rng = trial_rng(0, 0)\n"
        "ch = draw_channels(generate_topology(params, rng), params, rng)\n"
        "alternating_optimize(ch, params)\n"
        "t0 = time.perf_counter()\n"
        "sol = alternating_optimize(ch, params)\n"
        "print('    EE %.1f in %.2fs' % (sol.ee, time.perf_counter() - t0))\n"
    )
    for flag in ("1", "0"):
        env = dict(os.environ, EED2D_NUMBA=flag)
        label = "numba" if flag == "1" else "numpy fallback"
        print(f"  {label}:")
        subprocess.run([sys.executable, "-c", snippet], env=env, check=True)


if __name__ == "__main__":
    main()
