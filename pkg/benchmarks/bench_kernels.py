"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel on random inputs shaped like a mid-sized local game, then
a full local-game solve with each backend swapped in.
"""

from __future__ import annotations

import argparse
import timeit
import warnings

import numpy as np

from zsomg import _pykernels, kernels
from zsomg.hsvi import _Solver, SolverConfig
from zsomg.localgame import LocalGame, solve_maximin
from zsomg.model import builtin

try:
    from zsomg import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def random_case(rng, n_groups=6, n_actions=3, n_pieces=64, n_entries=200):
    nvar = n_groups * n_actions
    coord = np.sort(rng.integers(0, nvar, n_entries))
    eptr = np.searchsorted(coord, np.arange(nvar + 1)).astype(np.int64)
    gptr = np.arange(0, nvar + 1, n_actions, dtype=np.int64)
    alpha = rng.normal(size=(n_pieces, nvar))
    d = rng.uniform(0.0, 0.1, n_entries)
    W = rng.uniform(0.0, 0.1, (n_pieces, n_entries))
    eta = rng.uniform(0.5, 3.0, n_pieces)
    kappa = rng.normal(size=n_pieces)
    verts = np.tile(np.eye(n_actions), (n_groups, 1, 1))
    pieces = np.arange(n_pieces, dtype=np.int64)
    V = rng.uniform(size=(400, 256))
    return dict(alpha=alpha, d=d, W=W, eta=eta, kappa=kappa, eptr=eptr, gptr=gptr,
                verts=verts, pieces=pieces, V=V, q=rng.uniform(size=256))


def kernel_calls(mod, c):
    return {
        "separable_min": lambda: mod.separable_min(c["alpha"], c["d"], c["W"], c["eta"], c["kappa"],
                                                   c["eptr"], c["gptr"], c["pieces"]),
        "vertex_max": lambda: mod.vertex_max(c["alpha"], c["d"], c["W"], c["eta"], c["kappa"],
                                             c["eptr"], c["gptr"], c["verts"], c["pieces"]),
        "l1_rows": lambda: mod.l1_rows(c["V"], c["q"]),
    }


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def use_backend(mod):
    for name in ("separable_min", "vertex_max", "l1_rows"):
        setattr(kernels, name, getattr(mod, name))


def local_game_case():
    """A depth-0 upper game of the tiger after a few trials."""
    warnings.simplefilter("ignore")
    m = builtin("adversarial-tiger")
    s = _Solver(m, SolverConfig(epsilon=0.1, local_budget=300))
    for t in range(4):
        s.explore(s.o0, 0, t)
    return LocalGame(m, s.o0, s.U)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; nothing to compare")
        return
    c = random_case(np.random.default_rng(0))
    py, cc = kernel_calls(_pykernels, c), kernel_calls(_ckernels, c)
    print(f"{'kernel':<16}{'numpy (us)':>14}{'compiled (us)':>16}{'speedup':>10}")
    for name in py:
        tp = best_of(py[name], args.repeat, 20)
        tc = best_of(cc[name], args.repeat, 200)
        print(f"{name:<16}{tp * 1e6:>14.1f}{tc * 1e6:>16.1f}{tp / tc:>10.1f}")

    g = local_game_case()
    rows = []
    for label, mod in (("numpy", _pykernels), ("compiled", _ckernels)):
        use_backend(mod)
        t = best_of(lambda: solve_maximin(g, 0.01, budget=400), max(1, args.repeat // 2), 1)
        rows.append((label, t))
    use_backend(_ckernels if kernels.BACKEND == "compiled" else _pykernels)
    print(f"\nlocal game maximin, 400 nodes: numpy {rows[0][1]:.3f} s, compiled {rows[1][1]:.3f} s, "
          f"speedup {rows[0][1] / rows[1][1]:.1f}")


if __name__ == "__main__":
    main()
