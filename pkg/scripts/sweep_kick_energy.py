#!/usr/bin/env python3
"""Populations and LD_35/LD_13 ratio against kick energy, for a few prior N=3 fractions."""

import argparse

import numpy as np

from he2coherence.rotor import RotorBasis, default_calibration, kick_populations, ld_amplitude_ratio


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=15)
    ap.add_argument("--e-max", type=float, default=3.5)
    ap.add_argument("--steps", type=int, default=8)
    args = ap.parse_args()
    basis = RotorBasis(args.n_max)
    cal = default_calibration()
    energies = np.linspace(args.e_max / args.steps, args.e_max, args.steps)
    print(f"P per uJ = {cal.P_per_uJ:.5f}")
    print("E_uJ     P      pop1    pop3    pop5   ratio(p3=0)  ratio(p3=0.005)  ratio(p3=0.05)")
    for E in energies:
        pops = kick_populations(basis, {1: 1.0}, float(cal.strength(E)))
        r = [ld_amplitude_ratio([E], {1: 1 - p, 3: p}, cal, basis)[0] for p in (0.0, 0.005, 0.05)]
        print(
            f"{E:5.2f} {float(cal.strength(E)):6.3f} {pops[1]:7.4f} {pops[3]:7.4f} {pops[5]:7.4f}"
            f"   {r[0]:9.4f}   {r[1]:12.4f}   {r[2]:12.4f}"
        )


if __name__ == "__main__":
    main()
