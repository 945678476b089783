"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Kernel workloads import both modules directly; the end-to-end row runs one
subgroup enumeration per backend in a subprocess, switching with
BRANCHLAB_PURE.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from branchlab import _kernels_py as pure
from branchlab.selfsim import builtin_group, level_generators

try:
    from branchlab import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _table(mod, gens, p, L):
    t = mod.PcTable(p, L)
    t.extend(gens)
    return t


def workloads(mod, p, L, gens, rng):
    table = _table(mod, gens, p, L)
    elems = []
    x = np.arange(p ** L, dtype=mod.DTYPE)
    for _ in range(200):
        x = mod.mul(x, gens[int(rng.integers(len(gens)))])
        elems.append(x.copy())
    g = elems[-1]
    return {
        "pc closure": lambda: _table(mod, gens, p, L),
        "sift x200": lambda: [table.sift(e) for e in elems],
        "residue x200": lambda: [table.residue(e) for e in elems],
        "conjugate table": lambda: table.conjugated(g),
        "canonical key": lambda: table.key_bytes(),
        "orbit count": lambda: mod.orbit_count(gens, p ** L),
    }


END_TO_END = (
    "from branchlab.selfsim import builtin_group, level_quotient;"
    "from branchlab.lattice import EnumerationJob, run_enumeration;"
    "import time;Q=level_quotient(builtin_group('grigorchuk'),4);t=time.perf_counter();"
    "run_enumeration(EnumerationJob(Q,2,6,'conjugacy'));print(time.perf_counter()-t)"
)


def end_to_end(pure_backend: bool) -> float:
    env = dict(os.environ, BRANCHLAB_PURE="1" if pure_backend else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--level", type=int, default=6)
    ap.add_argument("--json")
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    G = builtin_group("grigorchuk")
    gens = level_generators(G, args.level)
    mods = [("pure", pure)] + ([("compiled", compiled)] if compiled is not None else [])
    results = {}
    for name, mod in mods:
        rng = np.random.default_rng(0)
        g = [np.asarray(x, dtype=mod.DTYPE) for x in gens]
        for label, fn in workloads(mod, 2, args.level, g, rng).items():
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results.setdefault(label, {})[name] = best
    if not args.skip_end_to_end:
        results["enumerate level 4, m<=6"] = {"pure": end_to_end(True)}
        if compiled is not None:
            results["enumerate level 4, m<=6"]["compiled"] = end_to_end(False)
    print(f"{'workload':28s} {'pure [s]':>10s} {'compiled [s]':>13s} {'speedup':>8s}")
    for label, row in results.items():
        c = row.get("compiled")
        speed = f"{row['pure'] / c:8.1f}" if c else "       -"
        print(f"{label:28s} {row['pure']:10.4f} {c if c is not None else float('nan'):13.4f} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"level": args.level, "results": results}, fh, indent=2)


if __name__ == "__main__":
    main()
