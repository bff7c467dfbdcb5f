"""Interpolation threshold of the max-margin (hinge, ridgeless) perceptron.

Below alpha_c(eps) the max-margin classifier fits every random fact
(E_mem = 0); above it memorization sets in.  This demo prints the threshold
curve, its small-eps asymptote alpha_c ~ (2 pi^2 / 3 eps)^(1/3), and a small
empirical double-descent style scan of E_mem across the threshold.

Run:  python3 demos/double_descent.py
"""

import numpy as np

from raf import aggregate, empirical_svm, generate_raf_dataset, kernel_family
from raf.state_eqs import hinge_interp_threshold

D, REPEATS, EPS = 200, 10, 0.5


def main():
    print("%8s %12s %14s" % ("eps", "alpha_c", "asymptote"))
    for eps in (1.0, 0.5, 0.2, 0.05, 1e-2, 1e-4):
        a_c = hinge_interp_threshold(eps)
        asym = (2.0 * np.pi ** 2 / (3.0 * eps)) ** (1.0 / 3.0)
        print("%8.4g %12.4f %14.4f" % (eps, a_c, asym))

    a_c = hinge_interp_threshold(EPS)
    print()
    print("empirical scan at eps = %.1f (threshold alpha_c = %.3f), d = %d"
          % (EPS, a_c, D))
    kern = kernel_family("linear")
    print("%8s %12s %14s" % ("alpha", "E_mem_hat", "stderr"))
    for alpha in np.linspace(0.5 * a_c, 2.0 * a_c, 7):
        n = int(round(alpha * D))
        runs = [empirical_svm(generate_raf_dataset(n, D, EPS, seed), kern,
                              1e-4, n_test=100) for seed in range(REPEATS)]
        agg = aggregate(runs)
        print("%8.3f %12.4f %14.4f"
              % (alpha, agg.e_mem_hat, agg.stderr_mem))


if __name__ == "__main__":
    main()
