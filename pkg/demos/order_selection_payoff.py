"""Multiplication counts of automatic order selection against fixed orders.

For a loose and a tight tolerance, the same 20 s fault scenario is solved with
the order chosen step by step and with several fixed orders.

    python3 demos/order_selection_payoff.py
"""
import logging

from dtsim import harness as hs
from dtsim.power import PowerSystem, bundled_case


def count(case, solver, K, tol):
    cfg = hs.RunConfig.from_dict({"solver": solver, "K": K, "t_end": 20.0, "step": {"tol": tol}})
    system = PowerSystem(case, "classical")
    tr = hs.integrate(system, cfg, system.default_events())
    return tr.multiplies, tr.n_steps


def main():
    logging.basicConfig(level=logging.ERROR)
    case = bundled_case("ieee9")
    for tol, orders in ((1e-5, (4, 8, 15)), (1e-15, (15, 30, 45))):
        print(f"Tol = {tol:g}")
        m, n = count(case, "vsoo-dt", 4, tol)
        print(f"  {'selected':>10}: {m:12.0f} multiplies, {n:4d} steps")
        for K in orders:
            m, n = count(case, "vs-dt", K, tol)
            print(f"  {'K = ' + str(K):>10}: {m:12.0f} multiplies, {n:4d} steps")


if __name__ == "__main__":
    main()
