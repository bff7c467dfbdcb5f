"""RAF output channel and loss machinery.

The teacher channel emits the rule label sign(w.x/sqrt(d)) with probability
1 - eps and a Rademacher fact label with probability eps.  Its partition
function and denoising function are

    Z_out*(y, omega, tau) = 1/2 + y (1-eps)/2 erf(omega / sqrt(2 tau))
    f_out*(y, omega, tau) = d/d omega log Z_out*

Losses are exposed through their proximal operator

    prox(y, omega, V) = argmin_z { loss(y, z) + (z - omega)^2 / (2V) }

and the denoising function f_out = (prox - omega)/V.
"""

import numpy as np
from scipy.special import erf


def _check_tau(tau):
    if tau <= 0.0:
        raise ValueError("tau must be positive")


def z_out_star(y, omega, tau, eps):
    """Teacher channel partition function; lies in [eps/2, 1 - eps/2]."""
    _check_tau(tau)
    return 0.5 + 0.5 * y * (1.0 - eps) * erf(omega / np.sqrt(2.0 * tau))


def f_out_star(y, omega, tau, eps):
    """Teacher channel denoising function, d/d omega log Z_out*."""
    _check_tau(tau)
    phi = np.exp(-np.asarray(omega) ** 2 / (2.0 * tau)) / np.sqrt(2.0 * np.pi * tau)
    return y * (1.0 - eps) * phi / z_out_star(y, omega, tau, eps)


class SquareLoss:
    """loss(y, z) = (y - z)^2 / 2."""

    tag = "square"

    @staticmethod
    def value(y, z):
        return 0.5 * (y - np.asarray(z)) ** 2

    @staticmethod
    def prox(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        return (omega + V * y) / (1.0 + V)

    @staticmethod
    def f_out(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        return (y - np.asarray(omega)) / (1.0 + V)

    @staticmethod
    def d_f_out_d_omega(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        return np.full_like(np.asarray(omega, dtype=float), -1.0 / (1.0 + V))


class HingeLoss:
    """loss(y, z) = max(0, 1 - y z).

    The proximal operator is piecewise; branch boundaries resolve to the
    adjacent closed branch so the mapping is deterministic.
    """

    tag = "hinge"

    @staticmethod
    def value(y, z):
        return np.maximum(0.0, 1.0 - y * np.asarray(z))

    @staticmethod
    def prox(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        omega = np.asarray(omega, dtype=float)
        yo = y * omega
        return np.where(yo <= 1.0 - V, omega + V * y,
                        np.where(yo <= 1.0, y * np.ones_like(omega), omega))

    @staticmethod
    def f_out(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        omega = np.asarray(omega, dtype=float)
        yo = y * omega
        return np.where(yo <= 1.0 - V, y * np.ones_like(omega),
                        np.where(yo <= 1.0, (y - omega) / V, 0.0))

    @staticmethod
    def d_f_out_d_omega(y, omega, V):
        if V <= 0.0:
            raise ValueError("V must be positive")
        omega = np.asarray(omega, dtype=float)
        yo = y * omega
        return np.where((yo > 1.0 - V) & (yo <= 1.0), -1.0 / V, 0.0)


_LOSSES = {"square": SquareLoss, "hinge": HingeLoss}


def loss_model(tag):
    """Look up a loss by tag ('square' or 'hinge'); passes through classes."""
    if isinstance(tag, str):
        try:
            return _LOSSES[tag]
        except KeyError:
            raise ValueError("unknown loss %r" % tag) from None
    return tag
