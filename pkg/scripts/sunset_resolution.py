"""Grid-doubling study of the sunset kernel.

Two independent routes are reported at each resolution:

* the double momentum convolution of the conformal-vacuum propagator
  (test oracle) against the closed-form smooth part of the kernel;
* the massive Minkowski sunset built from tabulated convolutions, for
  increasing table sizes.

    python scripts/sunset_resolution.py --t 1.0 --k 1.0 --nodes 24 48 96
"""
import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import sunset_smooth_oracle  # noqa: E402

from flrwren.background import Minkowski  # noqa: E402
from flrwren.kernels import full_sunset, sunset_ms  # noqa: E402


@dataclass
class ResolutionConfig:
    t: float = 1.0
    k: float = 1.0
    m: float = 1.0
    M: float = 1.0
    oracle_nodes: list = field(default_factory=lambda: [50, 100, 200])
    table_nodes: list = field(default_factory=lambda: [24, 48, 96])


def conformal_route(cfg):
    exact = sunset_ms(Minkowski(), cfg.M, cfg.t, 0.0, cfg.k).smooth
    print(f"closed-form smooth part: {exact:.10e}")
    prev = None
    for n in cfg.oracle_nodes:
        val = sunset_smooth_oracle(cfg.t, cfg.k, nodes=n)
        step = "" if prev is None else f"  change {abs(val - prev) / abs(val):.1e}"
        print(f"  oracle nodes={n:4d}  rel err {abs(val - exact) / abs(exact):.1e}{step}")
        prev = val


def massive_route(cfg):
    v = cfg.m**2 / 2
    s = abs(cfg.t)

    def d(p):
        # massive minus massless Minkowski Feynman hats
        p = np.asarray(p, dtype=float)
        w = np.sqrt(p * p + cfg.m**2)
        return np.exp(-1j * w * s) / (2 * w) - np.exp(-1j * p * s) / (2 * p)

    prev = None
    for n in cfg.table_nodes:
        t0 = time.perf_counter()
        val = full_sunset(d, v, Minkowski(), cfg.M, cfg.t, 0.0, cfg.k, nodes=n)
        step = "" if prev is None else f"  change {abs(val - prev) / abs(val):.1e}"
        print(f"  table nodes={n:4d}  value {val:.10e}  ({time.perf_counter() - t0:.1f} s){step}")
        prev = val


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--nodes", type=int, nargs="+", default=[24, 48, 96])
    p.add_argument("--skip-massive", action="store_true")
    args = p.parse_args()
    cfg = ResolutionConfig(t=args.t, k=args.k, table_nodes=args.nodes)
    conformal_route(cfg)
    if not args.skip_massive:
        print(f"massive Minkowski sunset, m={cfg.m}")
        massive_route(cfg)


if __name__ == "__main__":
    main()
