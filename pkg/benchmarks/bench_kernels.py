"""Time the numba and numpy kernel backends on the same inputs.

Run with ``python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]``.
Each row reports the best of ``repeat`` runs after one warm-up call (the
warm-up absorbs JIT compilation) and checks that both backends agree.
"""
import argparse
import time

import numpy as np

from linefib import Composed, ConvexCollapse, DiskCollapse, FibrationModel, Hopf
from linefib import kernels
from linefib.geom import EPS_GEO


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _close(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-9, atol=1e-9, equal_nan=True) for x, y in zip(a, b))


def cases(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-5, 5, (n, 3))
    Q = rng.uniform(-3, 3, (n, 2))
    m_lines = int(np.sqrt(2 * n)) + 1
    bases = rng.uniform(-5, 5, (m_lines, 3))
    dirs = rng.normal(size=(m_lines, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    out = []
    for label, spec in (("hopf", Hopf()), ("disk", Composed(DiskCollapse())),
                        ("ellipse", Composed(ConvexCollapse.ellipse((0, 0), (1.5, 0.5), 0.3)))):
        m = FibrationModel(spec)
        g, s = m.generator, m.settings
        out.append((f"eval_B {label}", lambda be, g=g: kernels.eval_B(g.kind, g.params, Q, be)))
        out.append((f"invert {label}", lambda be, g=g, s=s: kernels.invert(
            g.kind, g.params, X, s.newton_tol, s.max_newton_iters, s.continuation_steps,
            s.fd_step, be)))
    out.append(("exotic_invert", lambda be: kernels.exotic_invert(X, be)[:2]))
    out.append((f"line_pairs ({m_lines} lines)",
                lambda be: kernels.line_pairs(bases, dirs, EPS_GEO, be)))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    print(f"{'kernel':<28}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for label, fn in cases(args.n, args.seed):
        tj, oj = best_of(lambda: fn("numba"), args.repeat)
        tn, on = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{label:<28}{1e3 * tj:>10.2f}{1e3 * tn:>10.2f}{tn / tj:>9.1f}  {_close(oj, on)}")


if __name__ == "__main__":
    main()
