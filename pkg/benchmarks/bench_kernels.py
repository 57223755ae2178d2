"""Compare the compiled and NumPy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``.
"""

import time

import numpy as np

from angletl._backend import available_backends


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    rng = np.random.default_rng(0)
    backends = available_backends()
    t = rng.uniform(0.1, 5.0, 200)
    w = np.full(200, 1 / 200)
    lam = np.logspace(-4, 4, 200)
    n, m, r = 50, 17, 50
    G = rng.standard_normal((m, r))
    s2 = np.sort(rng.uniform(0.1, 100.0, r))[::-1]
    t_y, t_w = rng.standard_normal((2, r))
    h_w, y = rng.standard_normal((2, m))
    lam_cv = np.logspace(-4, 4, 50)
    etas = lam_cv[:, None] * np.linspace(-1, 3, 21)[None, :]

    cases = {
        "stieltjes_solve (200 atoms x 200 lambdas)": lambda k: k.stieltjes_solve(t, w, 2.0, lam),
        "heldout_mse (50 x 21 grid, 17 held-out rows)": lambda k: k.heldout_mse(G, s2, t_y, t_w, h_w, y, n,
                                                                                  lam_cv, etas),
    }
    print(f"{'kernel':48s} " + " ".join(f"{b:>10s}" for b in backends))
    for name, call in cases.items():
        row = [best_of(lambda k=k: call(k)) for k in backends.values()]
        print(f"{name:48s} " + " ".join(f"{x * 1e3:8.3f}ms" for x in row))


if __name__ == "__main__":
    main()
