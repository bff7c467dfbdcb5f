"""Bayes-optimal baseline for the RAF model.

The Bayes-optimal overlap q_b solves the two coupled scalar equations

    q_b     = q_hat_b / (1 + q_hat_b)
    q_hat_b = (2 alpha (1-eps)^2 / pi) / sqrt(1 - q_b^2)
              * E_s[ 1 / (1 + (1-eps) erf(sqrt(q_b / (2 (1+q_b))) s) ) ]

(the expectation form follows from the substitution xi = s sqrt(1-q_b),
which keeps the integrand bounded as q_b -> 1), and the generalization
error is E_gen = arccos(sqrt(q_b)) / pi.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from .numerics import FixedPointConfig, damped_fixed_point, gauss_hermite

_QB_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class BoSolution:
    q_b: float
    q_hat_b: float
    iterations: int
    converged: bool


def _q_hat_b(q_b, alpha, eps, quad):
    c = np.sqrt(q_b / (2.0 * (1.0 + q_b)))
    # 1 + (1-eps) erf(c s) written via erfc for accuracy in the left tail
    expect = quad.integrate(lambda s: 1.0 / (eps + (1.0 - eps) * erfc(-c * s)))
    return (2.0 * alpha * (1.0 - eps) ** 2 / np.pi) * expect / np.sqrt(1.0 - q_b ** 2)


def solve_bo(alpha: float, eps: float, order: int = 400,
             cfg: FixedPointConfig = FixedPointConfig(),
             init: float = 0.5) -> BoSolution:
    """Fixed point of the Bayes-optimal system at sample complexity alpha."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    quad = gauss_hermite(order)

    def step(x):
        qb = min(max(x[0], 0.0), _QB_MAX)
        qh = _q_hat_b(qb, alpha, eps, quad)
        return [qh / (1.0 + qh)]

    x, iters, ok = damped_fixed_point(step, [init], cfg)
    q_b = min(max(float(x[0]), 0.0), _QB_MAX)
    return BoSolution(q_b=q_b, q_hat_b=_q_hat_b(q_b, alpha, eps, quad),
                      iterations=iters, converged=ok)


def bo_gen_error(q_b: float) -> float:
    """E_gen of the Bayes-optimal estimator, arccos(sqrt(q_b)) / pi."""
    if not 0.0 <= q_b <= 1.0:
        raise ValueError("q_b must lie in [0, 1]")
    return float(np.arccos(np.sqrt(q_b)) / np.pi)


def bo_rate_integral(eps: float, order: int = 400) -> float:
    """J(eps) = int e^{-t^2} dt / (1 + (1-eps) erf(t/sqrt(2))).

    Evaluated as sqrt(pi) E_u[1 / (1 + (1-eps) erf(u/2))] with u ~ N(0,1);
    the denominator is written as eps + (1-eps) erfc(-u/2) to stay accurate
    in the left tail where 1 + erf cancels.
    """
    quad = gauss_hermite(order)
    return float(np.sqrt(np.pi) * quad.integrate(
        lambda u: 1.0 / (eps + (1.0 - eps) * erfc(-u / 2.0))))


def bo_rate_constant(eps: float, order: int = 400) -> float:
    """Large-alpha rate constant: E_gen ~ C(eps)/alpha with
    C(eps) = sqrt(2 pi) / (2 (1-eps)^2 J(eps))."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return float(np.sqrt(2.0 * np.pi)
                 / (2.0 * (1.0 - eps) ** 2 * bo_rate_integral(eps, order)))
