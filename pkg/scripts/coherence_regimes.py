"""Tabulate the bunched-port probability P1 against phi for several coherence factors.

The fringe contrast equals gamma = 1 - tau / T_c; below T_c = tau the central
peak carries no phase information at all.
"""

import argparse

import numpy as np

from umzi_router.interferometer import UmziConfig, coherence_factor, routing_probabilities


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tau", type=float, default=100e-12, help="arm imbalance in seconds")
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    coherence_times = [args.tau, 2 * args.tau, 10 * args.tau, 10e-6]
    gammas = [coherence_factor(t, args.tau) for t in coherence_times]
    phis = np.linspace(0, np.pi, args.points)
    print("phi/pi  " + "  ".join(f"Tc={t:.1e}" for t in coherence_times))
    for phi in phis:
        row = [routing_probabilities(UmziConfig(tau=args.tau, phi=phi, coherence_factor=g)).p_bunched for g in gammas]
        print(f"{phi / np.pi:6.3f}  " + "  ".join(f"{p:9.6f}" for p in row))
    print("gamma   " + "  ".join(f"{g:9.6f}" for g in gammas))


if __name__ == "__main__":
    main()
