"""Central exponents on A^eps as the coupling-shear amplitudes vary.

For each (base amplitude, centre twist) pair, prints the mean central pair
of finite-time spectra at points of A^eps, the largest first central
exponent, the volume error of f and the C^1 distance of f from A x T.  A
negative-central class needs the largest first central exponent below 0.

    python3 scripts/amplitude_scan.py [--samples 64] [--n 2400]
"""

import argparse
import itertools

import numpy as np

from nuhlab.lyapunov import benettin_spectrum
from nuhlab.maps import max_abs_det_error
from nuhlab.perturbations import ShearParams, build_pipeline, sw_shear
from nuhlab.survey import middle_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--n", type=int, default=2400)
    ap.add_argument("--burn", type=int, default=240)
    ap.add_argument("--amplitudes", default="0.4,0.8,1.6")
    ap.add_argument("--twists", default="1.0,0.5")
    args = ap.parse_args()
    pipe = build_pipeline()
    rng = np.random.default_rng(0)
    X = pipe.region.sample(rng, args.samples, "A")
    Y = pipe.region.sample(rng, 10000, "M")
    amps = [float(a) for a in args.amplitudes.split(",")]
    twists = [float(t) for t in args.twists.split(",")]
    print("amplitude,twist,central1_mean,central2_mean,central1_max,det_error,c1_distance")
    for a, t in itertools.product(amps, twists):
        p = pipe.with_gadgets(sw=sw_shear(pipe.region, ShearParams(amplitude=a, twist=t)))
        e = middle_pair(benettin_spectrum(p.f, X, args.n, 1, args.burn).exponents)
        m = e.mean(axis=0)
        de = max_abs_det_error(p.f, Y)
        c1 = p.c1_distance(np.random.default_rng(1), 2000)
        print(f"{a},{t},{m[0]:.5f},{m[1]:.5f},{e[:, 0].max():.5f},{de:.1e},{c1:.3g}", flush=True)


if __name__ == "__main__":
    main()
