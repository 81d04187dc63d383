"""One channel realization, end to end: perfect CSI versus quantized CSI.

Each base station knows only the channels from itself to the unintended
users.  It reduces that stack to its column space, quantizes it with B_b
bits, and the central node runs alternating leakage minimization on the
quantized subspaces.  The resulting precoders are quantized again (B_c
bits) on the way back.  We print the residual leakage and the sum rate at a
few SNRs so the loss due to the finite backhaul is visible.

Run:  python3 demos/perfect_vs_quantized.py --nb 10 --nc 12
"""
import argparse

import numpy as np

from csitshare.channel import SystemDims, generate_channel_set
from csitshare.harness import Resources, SimConfig, run_pipeline, snr_to_power, sum_rate
from csitshare.ia import leakage_power


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nb", type=int, default=10, help="CSI bits per base station")
    ap.add_argument("--nc", type=int, default=12, help="precoder bits per base station")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    dims = SystemDims(K=3, M=5, N=3, d=2)
    cs = generate_channel_set(dims, np.random.default_rng(args.seed))
    snrs = [0, 10, 20, 30, 40]
    print(f"K={dims.K} users, M={dims.M} tx / N={dims.N} rx antennas, d={dims.d} streams each\n")

    rows = {}
    for mode in ("perfect", "rvq", "perturbation"):
        cfg = SimConfig(dims=dims, snr_grid=snrs, csit_mode=mode, n_b=args.nb, n_c=args.nc, trials=1)
        res = Resources(cfg)
        res.prepare([(args.nb, args.nc)])
        U, V, _ = run_pipeline(cs, cfg, args.nb, args.nc, res, np.random.default_rng([args.seed, 1]))
        leak = leakage_power(cs, U, V, 1.0).total
        rates = [sum_rate(cs, U, V, snr_to_power(s)) for s in snrs]
        rows[mode] = (leak, rates)

    print(f"{'CSIT':>13}  {'leakage@P=1':>11}  " + "  ".join(f"{s:>5} dB" for s in snrs))
    for mode, (leak, rates) in rows.items():
        print(f"{mode:>13}  {leak:>11.2e}  " + "  ".join(f"{r:>8.2f}" for r in rates))

    # With perfect CSI leakage is numerically zero and the rate grows without
    # bound.  With a fixed bit budget the leakage is a constant fraction of the
    # transmit power, so interference eventually grows as fast as the signal.
    print("\nquantized rows flatten out at high SNR: residual leakage scales with P")


if __name__ == "__main__":
    main()
