"""Sensitivity of the fractional mean filter to its truncation lag.

Prints the RMS difference between residuals filtered at successive truncations
for several memory parameters. The tail of the (1-L)^d expansion decays like
k^(-1-d), so the gap shrinks slowly for small d.

    python scripts/truncation_study.py
"""

import argparse

import numpy as np

from ndigvix import fracts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6000)
    ap.add_argument("--d", type=float, nargs="+", default=(0.05, 0.15, 0.268, 0.4))
    ap.add_argument("--truncs", type=int, nargs="+", default=(250, 500, 1000, 2000, 4000))
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    vol = fracts.FigarchParams(0.05, 0.3, 0.5, 0.01)
    nu = np.random.default_rng(args.seed).standard_normal(args.n)
    pairs = list(zip(args.truncs, args.truncs[1:]))
    print("d      " + "  ".join(f"{a}->{b}".rjust(11) for a, b in pairs))
    for d in args.d:
        p = fracts.ArfimaParams(0.3, -0.2, d, 0.0)
        z = fracts.simulate(p, vol, nu, burn=1000)["z"]
        res = {t: fracts.arfima_filter(z, p, t) for t in args.truncs if t < z.size}
        rms = [np.sqrt(np.mean((res[a] - res[b]) ** 2)) if b in res else np.nan for a, b in pairs]
        print(f"{d:<6} " + "  ".join(f"{r:11.3e}" for r in rms))


if __name__ == "__main__":
    main()
