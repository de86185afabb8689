"""Convergence of the coincidence limit [w] with the momentum cutoff.

Compares the two subtraction routes for a massive field in the adiabatic
vacuum of de Sitter as the largest momentum of the grid grows, and the
conformal vacuum against 8 pi^2 [w] = -R/36.

    python scripts/coincidence_scan.py --k-max 25 50 100 200
"""
import argparse
from dataclasses import dataclass, field

import numpy as np

from flrwren.background import DeSitter
from flrwren.modes import ConformalVacuum, FieldParams, PositiveFrequency, make_k_grid, solve_modes
from flrwren.propagators import coincidence_w


@dataclass
class ScanConfig:
    m: float = 0.5
    xi: float = 0.25
    tau: float = -1.0
    tau0: float = -30.0
    k_max: list = field(default_factory=lambda: [25.0, 50.0, 100.0, 200.0])


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--k-max", type=float, nargs="+", default=ScanConfig().k_max)
    p.add_argument("--m", type=float, default=0.5)
    p.add_argument("--xi", type=float, default=0.25)
    args = p.parse_args()
    cfg = ScanConfig(m=args.m, xi=args.xi, k_max=args.k_max)
    bg = DeSitter(1.0, domain=(-300.0, -0.01))

    ms = solve_modes(bg, FieldParams(), ConformalVacuum(), make_k_grid(1e-3, 1.0, 50.0, 30),
                     np.array([-2.0, cfg.tau]))
    w = coincidence_w(bg, FieldParams(), ms, cfg.tau)
    print(f"conformal vacuum: 8 pi^2 [w] = {8 * np.pi**2 * w:.12f}  (-R/36 = {-bg.ricci(cfg.tau) / 36:.12f})")

    fp = FieldParams(m=cfg.m, xi=cfg.xi)
    for k_max in cfg.k_max:
        ks = make_k_grid(0.1, 4.0, k_max, n_log=60, dk=0.5)
        ms = solve_modes(bg, fp, PositiveFrequency(cfg.tau0, 2), ks, np.array([-2.0, cfg.tau]))
        w = coincidence_w(bg, fp, ms, cfg.tau)
        alt = coincidence_w(bg, fp, ms, cfg.tau, subtraction="F'")
        print(f"k_max={k_max:7.1f}  [w]={w:.12e}  F' route={alt:.12e}  rel diff {abs(alt - w) / abs(w):.1e}")


if __name__ == "__main__":
    main()
