"""How far is a random subspace from its nearest RVQ codeword?

A base station holding an M-dimensional column space inside C^n can only
send an index into a codebook of 2**B random points.  This script measures
the mean squared chordal error of that index as B grows, and compares it to
the small-ball prediction ``r_bar = Gamma(2/G) / ((G/2) (c J)^(2/G))`` with
both the closed-form ball coefficient and the one calibrated from RVQ.

Run:  python3 demos/quantizer_geometry.py --n 6 --p 3
"""
import argparse

import numpy as np

from csitshare.linalg import chordal_distance, haar_truncated_unitary
from csitshare.perturbation import (
    ball_volume_coefficient,
    calibrate_ball_coefficient,
    perturbation_params,
    rvq_mean_squared_error,
)
from csitshare.quantizer import grassmann_real_dimension


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--queries", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    n, p = args.n, args.p
    G = grassmann_real_dimension(n, p)

    # The chordal distance is a genuine metric on G(n, p): quick sanity look.
    X, Y = haar_truncated_unitary(n, p, rng, size=2)
    print(f"G({n},{p}) has real dimension {G}; two Haar points sit at d_c = {chordal_distance(X, Y):.3f}"
          f" (max possible {np.sqrt(min(p, n - p)):.3f})")

    c_lit = ball_volume_coefficient(n, p)
    c_cal = calibrate_ball_coefficient(n, p, rng)
    print(f"ball coefficient: closed form {c_lit:.4g}, calibrated at 8 bits {c_cal:.4g}\n")

    print(f"{'bits':>4}  {'RVQ mean d^2':>12}  {'closed form':>11}  {'calibrated':>10}")
    for bits in (4, 6, 8, 10, 12):
        mc = rvq_mean_squared_error(n, p, bits, args.queries, rng)
        lit = perturbation_params(G, c_lit, bits).r_bar
        cal = perturbation_params(G, c_cal, bits).r_bar
        print(f"{bits:>4}  {mc:>12.4f}  {lit:>11.4f}  {cal:>10.4f}")

    # The error only shrinks by 2**(-2/G) per extra bit, which is why large
    # Grassmannians need many bits before quantization stops hurting.
    print(f"\neach extra bit divides the error by about {2 ** (2 / G):.3f}")


if __name__ == "__main__":
    main()
