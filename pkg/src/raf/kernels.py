"""Dot-product kernel geometry.

A dot-product kernel K(rho) on Gaussian/spherical data enters the
high-dimensional theory only through two coefficients:

    mu1^2    = K'(0)                (linear component)
    mu_star^2 = K(1) - K(0) - K'(0) (aggregate nonlinear components)
    mu0^2    = K(0)                 (constant component, irrelevant to errors)

and the associated angle gamma = arctan(mu1 / mu_star) in the
(mu_star, mu1) plane.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .numerics import bisect_root, gauss_hermite


@dataclass(frozen=True)
class KernelGeometry:
    mu0: float
    mu1: float
    mu_star: float


def mu_from_kernel(K, analytic_dK0=None) -> KernelGeometry:
    """Extract (mu0, mu1, mu_star) from a scalar kernel function K(rho).

    K'(0) is taken from `analytic_dK0` when supplied, otherwise by a
    Richardson-extrapolated central difference with step 1e-5.
    """
    k0 = float(K(0.0))
    k1 = float(K(1.0))
    if analytic_dK0 is not None:
        dk0 = float(analytic_dK0)
    else:
        h = 1e-5
        dk0 = (8.0 * (K(h) - K(-h)) - (K(2 * h) - K(-2 * h))) / (12.0 * h)
    mu1_sq = dk0
    mustar_sq = k1 - k0 - dk0
    if mustar_sq < -1e-8 or mu1_sq < -1e-8 or k0 < -1e-8:
        raise ValueError("not an admissible dot-product kernel")
    return KernelGeometry(
        mu0=float(np.sqrt(max(k0, 0.0))),
        mu1=float(np.sqrt(max(mu1_sq, 0.0))),
        mu_star=float(np.sqrt(max(mustar_sq, 0.0))),
    )


def mu_from_activation(sigma) -> KernelGeometry:
    """Geometry of the kernel induced by an activation via Gaussian moments.

    mu0 = E[sigma(g)], mu1 = E[g sigma(g)], mu_star^2 = E[sigma^2] - mu0^2 - mu1^2.
    Moments use adaptive quadrature with a breakpoint at 0 so that kinked or
    discontinuous activations (relu, sign) are handled accurately.
    """
    def moment(f):
        val, _ = integrate.quad(
            lambda g: f(g) * np.exp(-g * g / 2.0) / np.sqrt(2.0 * np.pi),
            -12.0, 12.0, points=[0.0], limit=200)
        return float(val)

    mu0 = moment(lambda g: sigma(g))
    mu1 = moment(lambda g: g * sigma(g))
    second = moment(lambda g: sigma(g) ** 2)
    mustar_sq = second - mu0 ** 2 - mu1 ** 2
    if mustar_sq < -1e-8:
        raise ValueError("quadrature failure: negative mu_star^2 = %g" % mustar_sq)
    return KernelGeometry(mu0=mu0, mu1=mu1, mu_star=float(np.sqrt(max(mustar_sq, 0.0))))


def angle(geom: KernelGeometry) -> float:
    """Angle gamma = arctan(mu1/mu_star) in [0, pi/2]; mu_star = 0 maps to pi/2."""
    if geom.mu1 == 0.0 and geom.mu_star == 0.0:
        raise ValueError("kernel has no non-constant component")
    if geom.mu_star == 0.0:
        return np.pi / 2.0
    return float(np.arctan(geom.mu1 / geom.mu_star))


def geometry_from_angle(gamma: float, scale: float = 1.0) -> KernelGeometry:
    """Unit-scale geometry realizing a given angle: (mu_star, mu1) = scale*(cos, sin)."""
    if not 0.0 < gamma <= np.pi / 2.0:
        raise ValueError("angle must lie in (0, pi/2]")
    return KernelGeometry(mu0=0.0, mu1=scale * float(np.sin(gamma)),
                          mu_star=scale * float(np.cos(gamma)))


def optimal_mem_angle(eps: float) -> float:
    """Angle that minimizes the square-loss memorization error at fixed E_gen.

    gamma = arctan[(pi/(2(1-eps)^2) - 1)^(-1/2)], strictly decreasing in eps.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return float(np.arctan((np.pi / (2.0 * (1.0 - eps) ** 2) - 1.0) ** -0.5))


# ---------------------------------------------------------------------------
# Kernel families
# ---------------------------------------------------------------------------

class KernelFamily:
    """A named dot-product kernel K(rho) with closed-form geometry."""

    def __init__(self, tag: str, K, geometry: KernelGeometry, params=None):
        self.tag = tag
        self.K = K
        self._geometry = geometry
        self.params = dict(params or {})

    def geometry(self) -> KernelGeometry:
        return self._geometry

    def __repr__(self):
        extra = "".join(", %s=%g" % kv for kv in self.params.items())
        return "KernelFamily(%r%s)" % (self.tag, extra)


def kernel_family(tag: str, **params) -> KernelFamily:
    """Construct a kernel family by tag.

    Tags: linear, sign-arcsine, erf-arcsine, relu-arccos, polynomial(c, m),
    exponential(beta), spherical-gaussian(eta), geometric(g),
    truncated-quadratic(mu1, mu_star).
    """
    required = {"polynomial": ("c", "m"), "exponential": ("beta",),
                "spherical-gaussian": ("eta",), "geometric": ("g",),
                "truncated-quadratic": ("mu1", "mu_star")}
    for name in required.get(tag, ()):
        if name not in params:
            raise ValueError("kernel family %r requires parameter %r"
                             % (tag, name))
    if tag == "linear":
        return KernelFamily(tag, lambda r: r, KernelGeometry(0.0, 1.0, 0.0))
    if tag == "sign-arcsine":
        geom = KernelGeometry(0.0, np.sqrt(2 / np.pi), np.sqrt(1 - 2 / np.pi))
        return KernelFamily(tag, lambda r: (2 / np.pi) * np.arcsin(r), geom)
    if tag == "erf-arcsine":
        geom = KernelGeometry(
            0.0, 2 / np.sqrt(3 * np.pi),
            np.sqrt((2 / np.pi) * np.arcsin(2.0 / 3.0) - 4 / (3 * np.pi)))
        return KernelFamily(tag, lambda r: (2 / np.pi) * np.arcsin(2.0 * r / 3.0), geom)
    if tag == "relu-arccos":
        geom = KernelGeometry(
            1 / np.sqrt(2 * np.pi), 0.5, np.sqrt(0.5 * (0.5 - 1 / np.pi)))

        def k_relu(r):
            r = np.clip(r, -1.0, 1.0)
            return (np.sqrt(1 - r ** 2) + (np.pi - np.arccos(r)) * r) / (2 * np.pi)

        return KernelFamily(tag, k_relu, geom)
    if tag == "polynomial":
        c, m = float(params["c"]), int(params["m"])
        if c < 0 or m < 1:
            raise ValueError("polynomial family requires c >= 0, m >= 1")
        geom = KernelGeometry(
            c ** (m / 2.0), np.sqrt(m * c ** (m - 1)),
            np.sqrt(max((c + 1.0) ** m - c ** m - m * c ** (m - 1), 0.0)))
        return KernelFamily(tag, lambda r: (c + r) ** m, geom, {"c": c, "m": m})
    if tag == "exponential":
        b = float(params["beta"])
        if b < 0:
            raise ValueError("exponential family requires beta >= 0")
        geom = KernelGeometry(1.0, np.sqrt(b), np.sqrt(max(np.expm1(b) - b, 0.0)))
        return KernelFamily(tag, lambda r: np.exp(b * r), geom, {"beta": b})
    if tag == "spherical-gaussian":
        e = float(params["eta"])
        if e < 0:
            raise ValueError("spherical-gaussian family requires eta >= 0")
        geom = KernelGeometry(
            np.exp(-e / 2.0), np.sqrt(e * np.exp(-e)),
            np.sqrt(max(1.0 - np.exp(-e) * (1.0 + e), 0.0)))
        return KernelFamily(tag, lambda r: np.exp(-e * (1.0 - r)), geom, {"eta": e})
    if tag == "geometric":
        g = float(params["g"])
        if not 0.0 <= g < 1.0:
            raise ValueError("geometric family requires 0 <= g < 1")
        geom = KernelGeometry(1.0, np.sqrt(g), g / np.sqrt(1.0 - g))
        return KernelFamily(tag, lambda r: 1.0 / (1.0 - g * r), geom, {"g": g})
    if tag == "truncated-quadratic":
        mu1, mus = float(params["mu1"]), float(params["mu_star"])
        geom = KernelGeometry(0.0, mu1, mus)
        return KernelFamily(
            tag, lambda r: mu1 ** 2 * r + mus ** 2 * np.asarray(r) ** 2, geom,
            {"mu1": mu1, "mu_star": mus})
    raise ValueError("unknown kernel family %r" % tag)


FAMILY_TAGS = ("linear", "sign-arcsine", "erf-arcsine", "relu-arccos",
               "polynomial", "exponential", "spherical-gaussian", "geometric",
               "truncated-quadratic")

# Activations inducing the first four families (identity, sign, erf, relu).
ACTIVATIONS = {
    "linear": lambda g: g,
    "sign-arcsine": np.sign,
    "erf-arcsine": special.erf,
    "relu-arccos": lambda g: np.maximum(g, 0.0),
}


def match_family_to_angle(tag: str, eps: float, m: int = 2) -> float:
    """Parameter making a one-parameter family realize the optimal angle.

    Solves mu1^2/mu_star^2 = tan^2(gamma_opt) for the family parameter;
    the geometric family admits the explicit solution cos^2(gamma_opt).
    """
    gamma = optimal_mem_angle(eps)
    target = np.tan(gamma) ** 2
    if tag == "geometric":
        return float(np.cos(gamma) ** 2)

    if tag == "polynomial":
        def ratio(c):
            return m * c ** (m - 1) / ((c + 1.0) ** m - c ** m - m * c ** (m - 1))
    elif tag == "exponential":
        def ratio(b):
            return b / (np.expm1(b) - b)
    elif tag == "spherical-gaussian":
        def ratio(e):
            return e * np.exp(-e) / (1.0 - np.exp(-e) * (1.0 + e))
    else:
        raise ValueError("family %r has no free scalar parameter" % tag)

    f = lambda p: ratio(p) - target
    grid = np.logspace(-8, 8, 257)
    vals = np.array([f(p) for p in grid])
    sign_change = np.nonzero(vals[:-1] * vals[1:] <= 0.0)[0]
    if len(sign_change) == 0:
        raise ValueError("target angle unreachable for family %r" % tag)
    i = sign_change[0]
    return bisect_root(f, grid[i], grid[i + 1], tol=1e-12)
