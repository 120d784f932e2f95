"""Centre displacement of su-quadrilaterals against leg length.

The displacement of the assembled map should scale like the product of the
two legs (ratio about 4 per halving of both legs); the unperturbed product
map gives exactly zero.

    python3 scripts/holonomy_scaling.py [--point 0.07,0.1]
"""

import argparse

import numpy as np

from nuhlab.hyperbolicity import LoopNotClosed, su_quadrilateral
from nuhlab.maps import hyperbolic_eigen
from nuhlab.perturbations import build_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--point", default="0.07,0.1", help="centre coordinates inside A^eps")
    ap.add_argument("--base", default="0.3,0.7")
    ap.add_argument("--legs", default="0.04,0.02,0.01,0.005")
    args = ap.parse_args()
    pipe = build_pipeline()
    _, eu, es = hyperbolic_eigen(pipe.A)
    x = np.array([float(v) for v in args.base.split(",")] + [float(v) for v in args.point.split(",")])
    print("map,leg,magnitude,error,ratio_to_previous")
    for name, f in (("pipeline", pipe.f), ("product", pipe.F)):
        prev = None
        for leg in (float(v) for v in args.legs.split(",")):
            try:
                r = su_quadrilateral(f, x, (leg, leg), eu, es)
            except LoopNotClosed as e:
                print(f"{name},{leg},nan,nan,nan  # {e}")
                prev = None
                continue
            ratio = prev / r.magnitude if prev and r.magnitude > 0 else float("nan")
            print(f"{name},{leg},{r.magnitude:.4e},{r.error:.2e},{ratio:.2f}")
            prev = r.magnitude


if __name__ == "__main__":
    main()
