"""State equations for ERM on the RAF model in the high-dimensional limit.

Covers the kernel limit (square and hinge losses), the square-loss closed
forms, ridgeless and infinite-regularization limits, interpolation
thresholds, large-alpha rates, and the finite-width random-features system.

Order parameters: m (teacher overlap), q (self overlap), V (variance
parameter), with eta = m^2/q.  Errors:

    E_gen = arccos(m / sqrt(q)) / pi
    E_mem = erfc(V / sqrt(2 q)) / 2          (square and hinge alike)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf, erfc

from .channel import loss_model
from .kernels import KernelGeometry, optimal_mem_angle
from .numerics import (FixedPointConfig, bisect_root, damped_fixed_point,
                       gauss_hermite, gauss_legendre_panel)

_ETA_MAX = 1.0 - 1e-12
_SQRT_2_PI = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class OrderParams:
    m: float
    q: float
    V: float
    m_hat: float = 0.0
    q_hat: float = 0.0
    V_hat: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def eta(self) -> float:
        return min(self.m ** 2 / self.q, _ETA_MAX)


@dataclass(frozen=True)
class ErmSpec:
    loss: str
    geom: KernelGeometry
    lam: float
    alpha: float
    eps: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")


@dataclass(frozen=True)
class RfSpec(ErmSpec):
    kappa: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")


# ---------------------------------------------------------------------------
# Error functionals
# ---------------------------------------------------------------------------

def gen_error(m: float, q: float) -> float:
    """Generalization error arccos(m/sqrt(q)) / pi."""
    if q <= 0.0:
        raise ValueError("q must be positive")
    r = m / np.sqrt(q)
    if abs(r) > 1.0 + 1e-9:
        raise ValueError("|m| must not exceed sqrt(q)")
    return float(np.arccos(np.clip(r, -1.0, 1.0)) / np.pi)


def mem_error(q: float, V: float) -> float:
    """Memorization error erfc(V/sqrt(2q)) / 2 (square and hinge)."""
    if q <= 0.0:
        raise ValueError("q must be positive")
    if V < 0.0:
        raise ValueError("V must be nonnegative")
    return float(0.5 * erfc(V / np.sqrt(2.0 * q)))


def mem_error_proximal(loss, q: float, V: float) -> float:
    """Memorization error from the generic proximal sign test.

    E_mem = (1/2) E_xi[ theta(prox(-1, sqrt(q) xi, V)) +
                        theta(-prox(+1, sqrt(q) xi, V)) ].
    The proximal map is nondecreasing in omega for a convex loss, so each
    indicator expectation is an exact Gaussian tail located at the sign
    change of xi -> prox(y, sqrt(q) xi, V).
    """
    if q <= 0.0:
        raise ValueError("q must be positive")
    loss = loss_model(loss)
    sq = np.sqrt(q)
    p_minus = _sign_change_tail(loss, -1, sq, V)
    p_plus = _sign_change_tail(loss, +1, sq, V)
    return 0.5 * (p_minus + p_plus)


def _sign_change_tail(loss, y, sq, V):
    """P[ prox(y, sq*xi, V) has sign -y ], via the root of the monotone prox."""
    g = lambda xi: float(loss.prox(y, sq * xi, V))
    lo, hi = -60.0, 60.0
    glo, ghi = g(lo), g(hi)
    if glo >= 0.0 and ghi >= 0.0:
        return 0.0 if y > 0 else 1.0
    if glo <= 0.0 and ghi <= 0.0:
        return 1.0 if y > 0 else 0.0
    root = bisect_root(g, lo, hi, tol=1e-13)
    if y > 0:
        # misclassified when prox < 0, i.e. xi < root
        return float(0.5 * (1.0 + erf(root / np.sqrt(2.0))))
    # y = -1: misclassified when prox > 0, i.e. xi > root
    return float(0.5 * erfc(root / np.sqrt(2.0)))


def _eta_of(m, q):
    return min(max(m * m / q, 0.0), _ETA_MAX)


# ---------------------------------------------------------------------------
# Channel integrals (reduced hats):  m_hat = mu1 a Im, q_hat = mu1^2 a Iq,
# V_hat = mu1^2 a Iv, with a = alpha.
# ---------------------------------------------------------------------------

def square_channel_integrals(m, q, V, eps):
    """Closed-form Gaussian integrals for the square loss."""
    Im = (1.0 - eps) * _SQRT_2_PI / (1.0 + V)
    Iq = (1.0 + q - 2.0 * _SQRT_2_PI * (1.0 - eps) * m) / (1.0 + V) ** 2
    Iv = 1.0 / (1.0 + V)
    return Im, Iq, Iv


def _erf_weight(eta):
    return np.sqrt(eta / (2.0 * (1.0 - eta)))


_XI_CUT = 12.0  # phi(xi) support cutoff; phi(12) ~ 3e-32


def _oriented_erf_integral(lo, hi, c, weight_fn=None, n=200):
    """Oriented integral of phi(xi) erf(c xi) [weight_fn(xi)] over [lo, hi].

    Bounds are clipped to the effective Gaussian support so the panel
    always resolves the integrand even when the interval is huge.
    """
    sign = 1.0
    if lo > hi:
        lo, hi, sign = hi, lo, -1.0
    lo = max(lo, -_XI_CUT)
    hi = min(hi, _XI_CUT)
    if lo >= hi:
        return 0.0
    x, w = gauss_legendre_panel(lo, hi, n)
    w = sign * w
    vals = np.exp(-0.5 * x ** 2) / np.sqrt(2.0 * np.pi) * erf(c * x)
    if weight_fn is not None:
        vals = vals * weight_fn(x)
    return float(w @ vals)


def hinge_channel_integrals(m, q, V, eps, n=200):
    """Semi-analytic Gaussian integrals for the hinge loss (finite lambda)."""
    eta = _eta_of(m, q)
    s2 = q * (1.0 - eta)
    sq = np.sqrt(q)
    c = _erf_weight(eta)
    a, b = (1.0 - V) / sq, 1.0 / sq

    e_in = erf(1.0 / np.sqrt(2.0 * s2))
    e_av = erf((1.0 - V) / np.sqrt(2.0 * s2))
    g_in = np.exp(-1.0 / (2.0 * s2))
    g_av = np.exp(-(1.0 - V) ** 2 / (2.0 * s2))
    Im = (1.0 - eps) / np.sqrt(2.0 * np.pi) * (
        1.0 + (e_in - (1.0 - V) * e_av) / V
        + np.sqrt(2.0 * s2 / np.pi) * (g_in - g_av) / V)

    eq_in = erf(1.0 / np.sqrt(2.0 * q))
    eq_av = erf((1.0 - V) / np.sqrt(2.0 * q))
    gq_in = np.exp(-1.0 / (2.0 * q))
    gq_av = np.exp(-(1.0 - V) ** 2 / (2.0 * q))
    I1 = _oriented_erf_integral(-a, 0.0, c, n=n)
    I2 = _oriented_erf_integral(a, b, c, lambda x: (1.0 - sq * x) ** 2, n=n)
    I3 = _oriented_erf_integral(a, b, c, n=n)
    Iq = (0.5 * (1.0 + eq_av)
          + (0.5 * (1.0 + q) * (eq_in - eq_av)
             + np.sqrt(q / (2.0 * np.pi)) * (gq_in - (1.0 + V) * gq_av)) / V ** 2
          + (1.0 - eps) * (-np.arctan(np.sqrt(eta / (1.0 - eta))) / np.pi
                           - I1 + I2 / V ** 2))

    Iv = (0.5 * (eq_in - eq_av) + (1.0 - eps) * I3) / V
    return Im, Iq, Iv


_CHANNEL_INTEGRALS = {"square": square_channel_integrals,
                      "hinge": hinge_channel_integrals}


def channel_integrals(loss, m, q, V, eps):
    tag = loss if isinstance(loss, str) else loss.tag
    return _CHANNEL_INTEGRALS[tag](m, q, V, eps)


def quadrature_channel_integrals(loss, m, q, V, eps, order=400):
    """Direct quadrature of the three conjugate integrals for any loss.

    Slow path used for cross-checking the closed/semi-analytic forms.
    """
    loss = loss_model(loss)
    quad = gauss_hermite(order)
    eta = _eta_of(m, q)
    sq = np.sqrt(q)
    s = np.sqrt(q * (1.0 - eta))
    xi = quad.nodes
    wgt = quad.weights
    fp = loss.f_out(+1, sq * xi, V)
    fm = loss.f_out(-1, sq * xi, V)
    dp = loss.d_f_out_d_omega(+1, sq * xi, V)
    dm = loss.d_f_out_d_omega(-1, sq * xi, V)
    ew = erf(_erf_weight(eta) * xi)
    Im = (1.0 - eps) / np.sqrt(2.0 * np.pi) * float(
        wgt @ (loss.f_out(+1, s * xi, V) - loss.f_out(-1, s * xi, V)))
    Iq = float(wgt @ (0.5 * (fp ** 2 + fm ** 2)
                      + 0.5 * (1.0 - eps) * ew * (fp ** 2 - fm ** 2)))
    Iv = -float(wgt @ (0.5 * (dp + dm) + 0.5 * (1.0 - eps) * ew * (dp - dm)))
    return Im, Iq, Iv


# ---------------------------------------------------------------------------
# Kernel-limit fixed point
# ---------------------------------------------------------------------------

_INIT_Q = 0.5
_INIT_V = 1.0


def _init_overlaps(eps):
    return np.array([0.1 * (1.0 - eps), _INIT_Q, _INIT_V])


def solve_kernel_state_eqs(spec: ErmSpec,
                           cfg: FixedPointConfig = FixedPointConfig(),
                           init=None) -> OrderParams:
    """Damped fixed point of the six kernel-limit state equations."""
    if spec.lam <= 0.0:
        raise ValueError("lam must be positive (use the ridgeless operations "
                         "for the lambda -> 0+ limit)")
    mu1, mus = spec.geom.mu1, spec.geom.mu_star
    alpha, eps, lam = spec.alpha, spec.eps, spec.lam
    integrals = _CHANNEL_INTEGRALS[spec.loss]

    def step(x):
        m, q, V = x
        q = max(q, 1e-14)
        V = max(V, 1e-14)
        Im, Iq, Iv = integrals(m, q, V, eps)
        m_hat = mu1 * alpha * Im
        q_hat = mu1 ** 2 * alpha * Iq
        V_hat = mu1 ** 2 * alpha * Iv
        denom = lam + V_hat
        return [mu1 * m_hat / denom,
                mu1 ** 2 * (m_hat ** 2 + q_hat) / denom ** 2,
                mu1 ** 2 / denom + mus ** 2 / lam]

    x0 = _init_overlaps(eps) if init is None else np.asarray(init, float)
    x, iters, ok = damped_fixed_point(step, x0, cfg)
    m, q, V = x
    q = max(q, 1e-14)
    V = max(V, 1e-14)
    Im, Iq, Iv = integrals(m, q, V, eps)
    return OrderParams(m=float(m), q=float(q), V=float(V),
                       m_hat=float(mu1 * alpha * Im),
                       q_hat=float(mu1 ** 2 * alpha * Iq),
                       V_hat=float(mu1 ** 2 * alpha * Iv),
                       iterations=iters, converged=ok)


def kernel_residual(spec: ErmSpec, op: OrderParams) -> float:
    """Max-abs residual of the six state equations at a candidate point."""
    mu1, mus = spec.geom.mu1, spec.geom.mu_star
    Im, Iq, Iv = channel_integrals(spec.loss, op.m, op.q, op.V, spec.eps)
    m_hat = mu1 * spec.alpha * Im
    q_hat = mu1 ** 2 * spec.alpha * Iq
    V_hat = mu1 ** 2 * spec.alpha * Iv
    denom = spec.lam + V_hat
    res = [op.m - mu1 * m_hat / denom,
           op.q - mu1 ** 2 * (m_hat ** 2 + q_hat) / denom ** 2,
           op.V - (mu1 ** 2 / denom + mus ** 2 / spec.lam),
           op.m_hat - m_hat, op.q_hat - q_hat, op.V_hat - V_hat]
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Square-loss closed forms
# ---------------------------------------------------------------------------

def krr_closed_solution(spec: ErmSpec) -> OrderParams:
    """Analytic solution of the square-loss kernel state equations."""
    if spec.loss != "square":
        raise ValueError("closed solution exists only for the square loss")
    if spec.lam <= 0.0:
        raise ValueError("lam must be positive")
    mu1, mus = spec.geom.mu1, spec.geom.mu_star
    alpha, eps = spec.alpha, spec.eps
    if mu1 == 0.0:
        # rule unlearnable: pure ridge shrinkage of the nonlinear component
        V = mus ** 2 / spec.lam
        return OrderParams(m=0.0, q=1e-300, V=float(V))
    ell = spec.lam / mu1 ** 2
    inv_t2 = (mus / mu1) ** 2
    root = np.sqrt((alpha - 1.0 - ell - inv_t2) ** 2
                   + 4.0 * alpha * (ell + inv_t2))
    w = alpha - 1.0 + ell - inv_t2
    if w > 0.0:
        # rationalized form: avoids cancellation between root and w at
        # small ell when the ridgeless V stays finite
        V = 2.0 * (ell * (1.0 + inv_t2) + alpha * inv_t2) / (ell * (root + w))
    else:
        V = (root - w) / (2.0 * ell)
    A = alpha + ell * (1.0 + V)
    m = alpha * (1.0 - eps) * _SQRT_2_PI / A
    q = alpha * (1.0 + (2.0 * alpha * (1.0 - eps) ** 2 / np.pi)
                 * (A - 2.0) / A) / (A ** 2 - alpha)
    Im, Iq, Iv = square_channel_integrals(m, q, V, eps)
    return OrderParams(m=float(m), q=float(q), V=float(V),
                       m_hat=float(mu1 * alpha * Im),
                       q_hat=float(mu1 ** 2 * alpha * Iq),
                       V_hat=float(mu1 ** 2 * alpha * Iv))


def krr_lambda_opt(eps: float, geom: KernelGeometry) -> float:
    """Regularization minimizing the square-loss E_gen.

    Returns max{mu1^2 (pi/(2(1-eps)^2) - 1) - mu_star^2, 0}; a return of
    exactly 0 means the optimum is the ridgeless limit lambda -> 0+.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return float(max(geom.mu1 ** 2 * (np.pi / (2.0 * (1.0 - eps) ** 2) - 1.0)
                     - geom.mu_star ** 2, 0.0))


def krr_opt_errors(alpha: float, eps: float, geom: KernelGeometry):
    """(lambda_opt, E_gen, E_mem) for square loss at the optimal ridge."""
    lam = krr_lambda_opt(eps, geom)
    if lam > 0.0:
        op = krr_closed_solution(ErmSpec("square", geom, lam, alpha, eps))
        return lam, gen_error(op.m, op.q), mem_error(op.q, op.V)
    e_gen, e_mem = ridgeless_square_errors(alpha, eps, geom)
    return 0.0, e_gen, e_mem


def krr_large_alpha_coeff(eps: float) -> float:
    """KRR rate: E_gen ~ coeff / sqrt(alpha), coeff = sqrt(1-a^2)/(pi a)
    with a = (1-eps) sqrt(2/pi); independent of lambda and geometry."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    a = (1.0 - eps) * _SQRT_2_PI
    return float(np.sqrt(1.0 - a ** 2) / (np.pi * a))


# ---------------------------------------------------------------------------
# Ridgeless limits
# ---------------------------------------------------------------------------

def ridgeless_perceptron_square(alpha: float, eps: float):
    """(E_gen, E_mem) of min-norm linear regression (mu1 = 1, mu_star = 0)."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if alpha == 1.0:
        raise ValueError("alpha = 1 is the interpolation cusp")
    one = 1.0 - eps
    if alpha < 1.0:
        e_gen = np.arccos(one * np.sqrt(
            2.0 * alpha * (1.0 - alpha) / (np.pi - 2.0 * alpha * one ** 2))) / np.pi
        return float(e_gen), 0.0
    e_gen = np.arccos(one * np.sqrt(
        2.0 * (alpha - 1.0) / (np.pi + 2.0 * (alpha - 2.0) * one ** 2))) / np.pi
    e_mem = 0.5 * erfc(np.sqrt(np.pi / (2.0 * (alpha - 1.0)
                                        * (np.pi + 2.0 * one ** 2 * (alpha - 2.0)))))
    return float(e_gen), float(e_mem)


def ridgeless_square_errors(alpha: float, eps: float, geom: KernelGeometry):
    """(E_gen, E_mem) of square-loss ERM in the ridgeless limit."""
    if geom.mu_star == 0.0:
        return ridgeless_perceptron_square(alpha, eps)
    inv_t2 = (geom.mu_star / geom.mu1) ** 2
    V0 = 0.5 * (1.0 + inv_t2 - alpha
                + np.sqrt((alpha - 1.0 - inv_t2) ** 2 + 4.0 * alpha * inv_t2))
    A = alpha + V0
    m = alpha * (1.0 - eps) * _SQRT_2_PI / A
    q = alpha * (1.0 + (2.0 * alpha * (1.0 - eps) ** 2 / np.pi)
                 * (A - 2.0) / A) / (A ** 2 - alpha)
    return gen_error(m, q), 0.0


def _ridgeless_hinge_integrals(q, eta, eps, n=400):
    """The three hinge integrals in the rescaled lambda -> 0+ system."""
    s2 = q * (1.0 - eta)
    sq = np.sqrt(q)
    c = _erf_weight(eta)
    b = 1.0 / sq
    lo = -12.0
    hi = min(b, 12.0)
    Im = (1.0 - eps) / np.sqrt(2.0 * np.pi) * (
        1.0 + erf(1.0 / np.sqrt(2.0 * s2))
        + np.sqrt(2.0 * s2 / np.pi) * np.exp(-1.0 / (2.0 * s2)))
    Iq = (0.5 * (1.0 + q) * (1.0 + erf(1.0 / np.sqrt(2.0 * q)))
          + np.sqrt(q / (2.0 * np.pi)) * np.exp(-1.0 / (2.0 * q))
          + (1.0 - eps) * _oriented_erf_integral(
              lo, hi, c, lambda x: (1.0 - sq * x) ** 2, n=n))
    Iv = (0.5 * (1.0 + erf(1.0 / np.sqrt(2.0 * q)))
          + (1.0 - eps) * _oriented_erf_integral(lo, hi, c, n=n))
    return Im, Iq, Iv


def ridgeless_hinge_solution(alpha: float, eps: float, geom: KernelGeometry,
                             cfg: FixedPointConfig = FixedPointConfig()) -> OrderParams:
    """Fixed point of the rescaled hinge system in the lambda -> 0+ limit.

    Valid for any alpha when mu_star > 0, and below the interpolation
    threshold when mu_star = 0.  The returned V is the rescaled variable
    lambda*V of the original system; the unrescaled V diverges, so
    E_mem = 0 in this regime.
    """
    mu1, mus = geom.mu1, geom.mu_star

    def step(x):
        m, q, V = x
        q = max(q, 1e-14)
        V = max(V, 1e-14)
        eta = _eta_of(m, q)
        Im, Iq, Iv = _ridgeless_hinge_integrals(q, eta, eps)
        m_hat = mu1 * alpha * Im / V
        q_hat = mu1 ** 2 * alpha * Iq / V ** 2
        V_hat = mu1 ** 2 * alpha * Iv / V
        denom = 1.0 + V_hat
        return [mu1 * m_hat / denom,
                mu1 ** 2 * (m_hat ** 2 + q_hat) / denom ** 2,
                mu1 ** 2 / denom + mus ** 2]

    x, iters, ok = damped_fixed_point(step, _init_overlaps(eps), cfg)
    m, q, V = x
    return OrderParams(m=float(m), q=float(q), V=float(V),
                       iterations=iters, converged=ok)


def ridgeless_hinge_errors(alpha: float, eps: float, geom: KernelGeometry):
    """(E_gen, E_mem) of hinge-loss ERM in the ridgeless (max-margin) limit."""
    if geom.mu_star == 0.0 and eps > 0.0:
        a_c = hinge_interp_threshold(eps)
        if alpha >= a_c:
            # Above the interpolation threshold every variable stays finite:
            # evaluate at a vanishingly small ridge instead.
            spec = ErmSpec("hinge", geom, 1e-9, alpha, eps)
            op = solve_kernel_state_eqs(spec)
            return gen_error(op.m, op.q), mem_error(op.q, op.V)
    op = ridgeless_hinge_solution(alpha, eps, geom)
    return gen_error(op.m, op.q), 0.0


def ridgeless_errors(loss: str, alpha: float, eps: float, geom: KernelGeometry):
    """(E_gen, E_mem) in the lambda -> 0+ limit for either loss."""
    if loss == "square":
        return ridgeless_square_errors(alpha, eps, geom)
    if loss == "hinge":
        return ridgeless_hinge_errors(alpha, eps, geom)
    raise ValueError("unknown loss %r" % loss)


def hinge_interp_threshold(eps: float) -> float:
    """Interpolation threshold of the max-margin perceptron.

    Positive root of 1 = a [1/2 - ((1-eps)/pi) arctan(a (1-eps)/pi)];
    equals 2 at eps = 1 and diverges as (2 pi^2 / (3 eps))^{1/3} for
    eps -> 0 (an eps of exactly 0 returns +inf).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if eps == 0.0:
        return np.inf
    one = 1.0 - eps

    def f(a):
        return a * (0.5 - one / np.pi * np.arctan(a * one / np.pi)) - 1.0

    hi = 4.0
    while f(hi) < 0.0:
        hi *= 2.0
    return bisect_root(f, 1e-9, hi, tol=1e-12)


# ---------------------------------------------------------------------------
# Infinite regularization
# ---------------------------------------------------------------------------

def infinite_lambda_errors(alpha: float, eps: float, geom: KernelGeometry):
    """(E_gen, E_mem) in the lambda -> +infinity limit (any loss)."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    inv_t2 = (geom.mu_star / geom.mu1) ** 2 if geom.mu1 > 0 else np.inf
    a = alpha * (1.0 - eps) * _SQRT_2_PI
    e_mem = 0.5 * erfc((1.0 + inv_t2) / np.sqrt(2.0 * a ** 2 + 2.0 * alpha))
    r = (1.0 - eps) * np.sqrt(2.0 * alpha / np.pi)
    e_gen = np.arccos(r / np.sqrt(1.0 + r ** 2)) / np.pi
    return float(e_gen), float(e_mem)


# ---------------------------------------------------------------------------
# Hinge cross-validation and angle optimization
# ---------------------------------------------------------------------------

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, lo, hi, tol):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = c if fc < fd else d
    return x, min(fc, fd)


def hinge_lambda_opt(alpha: float, eps: float, geom: KernelGeometry,
                     log_lo: float = -8.0, log_hi: float = 3.0,
                     tol: float = 1e-3, n_grid: int = 45):
    """(lambda_opt, E_gen, E_mem) for the hinge loss, cross-validated on
    the generalization error over log lambda.

    A coarse log grid locates the optimum (the fixed-point map can stall
    or leave the physical region at tiny lambda, breaking unimodality),
    golden-section search refines it, and the dedicated ridgeless limit
    competes as an extra candidate.  A returned lambda_opt of 0 means the
    ridgeless limit wins.
    """
    cv_cfg = FixedPointConfig(damping=0.5, tol=1e-10, max_iter=20000)
    warm = {"x": None}

    def objective(log_lam):
        spec = ErmSpec("hinge", geom, 10.0 ** log_lam, alpha, eps)
        op = solve_kernel_state_eqs(spec, cv_cfg, init=warm["x"])
        if not op.converged or not 0.0 <= op.m <= np.sqrt(op.q):
            warm["x"] = None
            return np.inf
        warm["x"] = [op.m, op.q, op.V]
        return gen_error(op.m, op.q)

    # sweep large to small lambda, warm-starting each solve from the last;
    # once a point fails to converge, every smaller lambda is abandoned
    # (the solver only degrades further down the grid)
    grid = np.linspace(log_lo, log_hi, n_grid)
    vals = np.full(n_grid, np.inf)
    for j in range(n_grid - 1, -1, -1):
        vals[j] = objective(grid[j])
        if not np.isfinite(vals[j]):
            break
    i = int(np.argmin(vals))
    e_interior = vals[i]
    if np.isfinite(e_interior):
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, n_grid - 1)]
        log_lam, e_ref = _golden_min(objective, lo, hi, tol)
        if e_ref < e_interior:
            e_interior = e_ref
        else:
            log_lam = grid[i]
    e_ridgeless, mem_ridgeless = ridgeless_hinge_errors(alpha, eps, geom)
    if e_ridgeless <= e_interior:
        return 0.0, e_ridgeless, mem_ridgeless
    lam = 10.0 ** log_lam
    op = solve_kernel_state_eqs(ErmSpec("hinge", geom, lam, alpha, eps))
    return lam, gen_error(op.m, op.q), mem_error(op.q, op.V)


def hinge_optimal_angle(alpha: float, eps: float, tol: float = 1e-2):
    """(gamma_opt, lambda_opt, E_gen, E_mem) minimizing the cross-validated
    hinge E_gen over the kernel angle.

    The angle search uses a coarsened inner cross-validation (the optimum
    is shallow in gamma, so a loose angle tolerance costs little in E_gen);
    the returned errors come from a full-accuracy solve at the optimum.
    """
    from .kernels import geometry_from_angle

    def objective(gamma):
        geom = geometry_from_angle(gamma)
        return hinge_lambda_opt(alpha, eps, geom, n_grid=25, tol=1e-2)[1]

    gamma, _ = _golden_min(objective, 0.1, np.pi / 2 - 0.02, tol)
    lam, e_gen, e_mem = hinge_lambda_opt(alpha, eps,
                                         geometry_from_angle(gamma))
    return gamma, lam, e_gen, e_mem


# ---------------------------------------------------------------------------
# Finite-width random features
# ---------------------------------------------------------------------------

def mp_stieltjes(z: float, gamma: float) -> float:
    """Stieltjes transform of the Marchenko-Pastur law of F F^T / p, z < 0."""
    return (1.0 - z - gamma - np.sqrt((z - 1.0 - gamma) ** 2 - 4.0 * gamma)) \
        / (2.0 * gamma * z)


@dataclass(frozen=True)
class RfSolution:
    params: OrderParams
    m_s: float
    q_s: float
    V_s: float
    q_w: float
    V_w: float


def _rf_overlaps(hats, lam, gamma):
    m_hs, q_hs, V_hs, q_hw, V_hw = hats
    z = (lam + V_hw) / V_hs
    delta = np.sqrt((1.0 + gamma + z) ** 2 - 4.0 * gamma)
    low = (z + 1.0 + gamma - delta) / (2.0 * gamma)
    cross = (z * delta - z ** 2 - (gamma + 1.0) * z) / delta
    m_s = m_hs / V_hs * low
    q_s = ((m_hs ** 2 + q_hs) / V_hs ** 2
           * ((2.0 * z + gamma + 1.0) * delta - 2.0 * z ** 2
              - 3.0 * (gamma + 1.0) * z - (gamma - 1.0) ** 2) / (2.0 * gamma * delta)
           - q_hw / ((lam + V_hw) * V_hs) * cross / (2.0 * gamma))
    V_s = low / V_hs
    q_w = (q_hw / (lam + V_hw) ** 2
           * ((1.0 - gamma) * delta + (gamma + 1.0) * z + (gamma - 1.0) ** 2)
           / (2.0 * delta)
           - (m_hs ** 2 + q_hs) / ((lam + V_hw) * V_hs) * cross / 2.0)
    V_w = (1.0 - gamma - z + delta) / (2.0 * (lam + V_hw))
    return m_s, q_s, V_s, q_w, V_w


def solve_rf_state_eqs(spec: RfSpec,
                       cfg: FixedPointConfig = FixedPointConfig()) -> RfSolution:
    """Damped fixed point of the ten-equation finite-width system.

    Composite overlaps: m = mu1 m_s, q = mu1^2 q_s + mu_star^2 q_w,
    V = mu1^2 V_s + mu_star^2 V_w.
    """
    if spec.lam <= 0.0:
        raise ValueError("lam must be positive")
    mu1, mus = spec.geom.mu1, spec.geom.mu_star
    alpha, eps, lam = spec.alpha, spec.eps, spec.lam
    gamma = 1.0 / spec.kappa
    integrals = _CHANNEL_INTEGRALS[spec.loss]

    def hats_from_overlaps(m, q, V):
        q = max(q, 1e-14)
        V = max(V, 1e-14)
        Im, Iq, Iv = integrals(m, q, V, eps)
        return np.array([mu1 * alpha * Im,
                         mu1 ** 2 * alpha * Iq,
                         mu1 ** 2 * alpha * Iv,
                         gamma * mus ** 2 * alpha * Iq,
                         gamma * mus ** 2 * alpha * Iv])

    def step(hats):
        m_s, q_s, V_s, q_w, V_w = _rf_overlaps(hats, lam, gamma)
        m = mu1 * m_s
        q = mu1 ** 2 * q_s + mus ** 2 * q_w
        V = mu1 ** 2 * V_s + mus ** 2 * V_w
        return hats_from_overlaps(m, q, V)

    m0, q0, V0 = _init_overlaps(eps)
    hats0 = hats_from_overlaps(m0, q0, V0)
    hats, iters, ok = damped_fixed_point(step, hats0, cfg)
    m_s, q_s, V_s, q_w, V_w = _rf_overlaps(hats, lam, gamma)
    m = mu1 * m_s
    q = mu1 ** 2 * q_s + mus ** 2 * q_w
    V = mu1 ** 2 * V_s + mus ** 2 * V_w
    params = OrderParams(m=float(m), q=float(q), V=float(V),
                         m_hat=float(hats[0]), q_hat=float(hats[1]),
                         V_hat=float(hats[2]), iterations=iters, converged=ok)
    return RfSolution(params=params, m_s=float(m_s), q_s=float(q_s),
                      V_s=float(V_s), q_w=float(q_w), V_w=float(V_w))
