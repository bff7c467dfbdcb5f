"""Generalization/memorization trade-off of kernel ERM on the RAF model.

Sweeps the ridge over lambda in [1e-5, 1e2] at alpha = 2/0.9, eps = 0.1 for
three kernel geometries (linear perceptron, erf, relu) and both losses,
prints the parametric curve lambda -> (E_gen, E_mem), and marks the
Bayes-optimal floor and the two analytic endpoints (ridgeless and
infinite-ridge limits).

Run:  python3 demos/tradeoff_curve.py
"""

import numpy as np

from raf import (ErmSpec, bo_gen_error, gen_error, infinite_lambda_errors,
                 kernel_family, mem_error, ridgeless_errors, solve_bo,
                 solve_kernel_state_eqs)
from raf.kernels import KernelGeometry

ALPHA, EPS = 2.0 / 0.9, 0.1

GEOMETRIES = {
    "perceptron": KernelGeometry(0.0, 1.0, 0.0),
    "erf": kernel_family("erf-arcsine").geometry(),
    "relu": kernel_family("relu-arccos").geometry(),
}


def main():
    sol = solve_bo(ALPHA, EPS)
    print("Bayes-optimal floor: E_gen = %.4f" % bo_gen_error(sol.q_b))
    print()

    for loss in ("square", "hinge"):
        for name, geom in GEOMETRIES.items():
            print("%s loss, %s kernel (mu1=%.3f, mustar=%.3f)"
                  % (loss, name, geom.mu1, geom.mu_star))
            eg0, em0 = ridgeless_errors(loss, ALPHA, EPS, geom)
            print("  lambda -> 0+   E_gen=%.4f  E_mem=%.4f" % (eg0, em0))
            for lam in np.geomspace(1e-5, 1e2, 8):
                op = solve_kernel_state_eqs(
                    ErmSpec(loss, geom, float(lam), ALPHA, EPS))
                print("  lambda=%-8.3g E_gen=%.4f  E_mem=%.4f"
                      % (lam, gen_error(op.m, op.q), mem_error(op.q, op.V)))
            eg_inf, em_inf = infinite_lambda_errors(ALPHA, EPS, geom)
            print("  lambda -> inf  E_gen=%.4f  E_mem=%.4f" % (eg_inf, em_inf))
            print()


if __name__ == "__main__":
    main()
