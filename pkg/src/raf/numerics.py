"""Shared numerical engine: Gaussian quadrature, root finding, fixed-point iteration.

All quadrature in this package is against the standard-normal weight
(probabilists' convention), so that an expectation E_{xi~N(0,1)}[f(xi)]
is simply `quad.integrate(f)`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermitenorm


@dataclass(frozen=True)
class Quadrature:
    """Gaussian quadrature rule for the standard-normal measure."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f) -> float:
        """E[f(xi)] for xi ~ N(0,1), with f vectorized."""
        return float(self.weights @ f(self.nodes))


@lru_cache(maxsize=32)
def gauss_hermite(order: int) -> Quadrature:
    """Gauss-Hermite rule normalized to the N(0,1) measure.

    The weights sum to 1 and the rule integrates polynomials of degree
    <= 2*order - 1 exactly.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    nodes, weights = roots_hermitenorm(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(nodes=nodes, weights=weights, order=order)


@lru_cache(maxsize=8)
def _legendre_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_panel(lo: float, hi: float, n: int = 200):
    """Nodes/weights for an oriented integral over [lo, hi].

    When lo > hi the weights carry the sign flip, so
    `w @ f(x)` is always the oriented integral from lo to hi.
    """
    x, w = _legendre_rule(n)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid + half * x, half * w


def integrate_panel(f, lo: float, hi: float, n: int = 200) -> float:
    """Oriented Gauss-Legendre integral of a smooth f over [lo, hi]."""
    if lo == hi:
        return 0.0
    x, w = gauss_legendre_panel(lo, hi, n)
    return float(w @ f(x))


def bisect_root(f, lo: float, hi: float, tol: float = 1e-12,
                max_iter: int = 200) -> float:
    """Root of f on the bracket [lo, hi] by bisection.

    Requires a sign change on the bracket; returns the bracket midpoint
    once its width drops below tol.
    """
    if not lo < hi:
        raise ValueError("bracket requires lo < hi")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("no sign change on bracket [%g, %g]" % (lo, hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo <= tol:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FixedPointConfig:
    """Damped fixed-point iteration settings."""

    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 100000

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def damped_fixed_point(fmap, init, cfg: FixedPointConfig = FixedPointConfig()):
    """Iterate x <- (1 - damping) x + damping fmap(x) to a fixed point.

    Returns (x, iterations, converged).  Convergence is declared when the
    max-abs update falls below cfg.tol.
    """
    x = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    d = cfg.damping
    for it in range(1, cfg.max_iter + 1):
        fx = np.atleast_1d(np.asarray(fmap(x), dtype=float))
        x_new = (1.0 - d) * x + d * fx
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= cfg.tol:
            return x, it, True
    return x, cfg.max_iter, False
