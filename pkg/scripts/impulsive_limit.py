#!/usr/bin/env python3
"""Relative deviation of finite-pulse TDSE populations from the impulsive kick.

Also prints the weak-kick estimate exp(-w^2 tau^2 / (8 ln 2)) for the N=1->3 transfer,
which sets how short the pulse must be for the sudden approximation to hold.
"""

import argparse
import math

from he2coherence.rotor import Ensemble, KickPulse, MoleculeConstants, RotorBasis, apply_impulsive_kick, evolve_tdse


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=15)
    ap.add_argument("--strengths", type=float, nargs="+", default=[1.0, 2.0, 3.0, 4.0, 5.0])
    ap.add_argument("--durations", type=float, nargs="+", default=[5.0, 10.0, 20.0, 50.0, 70.0, 100.0])
    args = ap.parse_args()
    const = MoleculeConstants()
    ens = Ensemble.isotropic(RotorBasis(args.n_max), {1: 1.0})
    w13 = 2 * math.pi * const.line_thz(1)
    print(" P   fwhm_fs  dpop3    dpop5    weak-kick pop3 factor")
    for P in args.strengths:
        imp = ens.map(lambda psi: apply_impulsive_kick(psi, P)).populations()
        for fwhm in args.durations:
            td = ens.map(lambda psi: evolve_tdse(psi, KickPulse(duration_fwhm_fs=fwhm), const, strength=P)).populations()
            filt = math.exp(-((w13 * fwhm * 1e-3) ** 2) / (8 * math.log(2)))
            print(f"{P:3.1f} {fwhm:7.1f} {td[3] / imp[3] - 1:+8.3f} {td[5] / imp[5] - 1:+8.3f}   {filt:.3f}")


if __name__ == "__main__":
    main()
