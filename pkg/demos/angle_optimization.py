"""Choosing the kernel: error as a function of the kernel angle.

A dot-product kernel enters the asymptotic theory only through the angle
gamma = arctan(mu1/mustar).  This demo sweeps gamma at the cross-validated
ridge and reports (i) the plateau of the square-loss generalization error
above gamma_mem_opt, (ii) the memorization-optimal angle, and (iii) the
angle minimizing the hinge generalization error, found by numeric search.

Run:  python3 demos/angle_optimization.py   (the hinge search takes ~30 s)
"""

import numpy as np

from raf import (geometry_from_angle, hinge_optimal_angle, krr_opt_errors,
                 optimal_mem_angle)

ALPHA, EPS = 2.0 / 0.9, 0.1


def main():
    print("square loss, cross-validated ridge, alpha=%.3f eps=%.1f"
          % (ALPHA, EPS))
    print("%8s %10s %10s" % ("gamma", "E_gen", "E_mem"))
    for gamma in np.linspace(0.3, np.pi / 2 - 0.02, 10):
        _, e_gen, e_mem = krr_opt_errors(ALPHA, EPS,
                                         geometry_from_angle(float(gamma)))
        print("%8.4f %10.4f %10.4f" % (gamma, e_gen, e_mem))

    g_mem = optimal_mem_angle(EPS)
    print()
    print("E_gen is flat above the memorization-optimal angle "
          "gamma_mem_opt = %.4f," % g_mem)
    print("where E_mem is smallest at the shared E_gen plateau.")

    print()
    print("hinge loss: searching for the angle minimizing E_gen ...")
    gamma, lam, e_gen, e_mem = hinge_optimal_angle(ALPHA, EPS)
    print("gamma_opt = %.4f  (lambda_opt = %.4g)" % (gamma, lam))
    print("E_gen = %.4f  E_mem = %.4f" % (e_gen, e_mem))


if __name__ == "__main__":
    main()
