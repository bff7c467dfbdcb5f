"""Finite-size Monte Carlo oracle for the RAF model.

Generates Gaussian RAF datasets, trains empirical kernel ridge regression,
kernel SVM, and finite-width random-features models, and measures the
empirical memorization error (on the randomly labeled training subset) and
generalization error (against the teacher rule on fresh test inputs).
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from numba import njit

from .channel import loss_model
from .kernels import ACTIVATIONS, KernelFamily, kernel_family


def _sign(x):
    """sign with the deterministic convention sign(0) = +1."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class RafDataset:
    inputs: np.ndarray
    labels: np.ndarray
    fact_index: np.ndarray
    rule_index: np.ndarray
    teacher: np.ndarray
    seed: int


@dataclass(frozen=True)
class EmpiricalResult:
    e_gen_hat: float
    e_mem_hat: float
    stderr_gen: float
    stderr_mem: float
    n_repeats: int


def generate_raf_dataset(n: int, d: int, eps: float, seed: int) -> RafDataset:
    """Draw n Gaussian inputs; each label is the teacher rule with
    probability 1 - eps and an independent Rademacher fact otherwise."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    X = rng.standard_normal((n, d))
    teacher = rng.standard_normal(d)
    rule_labels = _sign(X @ teacher / np.sqrt(d))
    fact_mask = rng.random(n) < eps
    rademacher = _sign(rng.random(n) - 0.5)
    labels = np.where(fact_mask, rademacher, rule_labels)
    idx = np.arange(n)
    return RafDataset(inputs=X, labels=labels,
                      fact_index=idx[fact_mask], rule_index=idx[~fact_mask],
                      teacher=teacher, seed=int(seed))


def generate_test_set(data: RafDataset, n_test: int = 2000):
    """Fresh teacher-labeled inputs drawn from a stream independent of the
    training draw but deterministic in the dataset seed."""
    d = data.inputs.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence([data.seed, 1]))
    X_test = rng.standard_normal((n_test, d))
    y_test = _sign(X_test @ data.teacher / np.sqrt(d))
    return X_test, y_test


def kernel_gram(kernel: KernelFamily, X: np.ndarray,
                Y: Optional[np.ndarray] = None) -> np.ndarray:
    """Gram matrix K(x.y/d) with the normalized inner product clipped to
    the kernel domain [-1, 1]."""
    d = X.shape[1]
    rho = (X @ (X if Y is None else Y).T) / d
    if kernel.tag != "linear":
        np.clip(rho, -1.0, 1.0, out=rho)
    return np.asarray(kernel.K(rho), dtype=float)


# ---------------------------------------------------------------------------
# Kernel ridge regression
# ---------------------------------------------------------------------------

def krr_coefficients(G: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (G + lam I) c = y; lam = 0 uses the min-norm pseudo-inverse."""
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    n = G.shape[0]
    if lam == 0.0:
        return np.linalg.lstsq(G, y, rcond=None)[0]
    try:
        cf = sla.cho_factor(G + lam * np.eye(n), lower=True,
                            check_finite=False)
        return sla.cho_solve(cf, y, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(G + lam * np.eye(n), y, rcond=None)[0]


def _errors_from_coefficients(data, G, K_test, y_test, c):
    train_pred = _sign(G @ c)
    facts = data.fact_index
    e_mem = float(np.mean(train_pred[facts] != data.labels[facts])) \
        if len(facts) else 0.0
    e_gen = float(np.mean(_sign(K_test @ c) != y_test))
    return EmpiricalResult(e_gen_hat=e_gen, e_mem_hat=e_mem,
                           stderr_gen=0.0, stderr_mem=0.0, n_repeats=1)


def empirical_krr(data: RafDataset, kernel: KernelFamily, lam: float,
                  n_test: int = 2000) -> EmpiricalResult:
    """Train KRR on the Gram matrix and measure both empirical errors."""
    G = kernel_gram(kernel, data.inputs)
    X_test, y_test = generate_test_set(data, n_test)
    K_test = kernel_gram(kernel, X_test, data.inputs)
    c = krr_coefficients(G, data.labels, lam)
    return _errors_from_coefficients(data, G, K_test, y_test, c)


# ---------------------------------------------------------------------------
# Support vector machine (kernelized hinge loss)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _svm_dual_cd(G, y, lam, beta, max_epochs, gap_rtol):
    """Coordinate ascent on the hinge dual
        max_{0 <= beta <= 1}  sum(beta) - (beta y)^T G (beta y) / (2 lam)
    with coefficients c = beta * y / lam.  Returns (epochs, relative gap)."""
    n = G.shape[0]
    f = G @ (beta * y) / lam
    gap = np.inf
    for epoch in range(max_epochs):
        for mu in range(n):
            gmm = G[mu, mu]
            if gmm <= 0.0:
                continue
            b_new = beta[mu] + lam * (1.0 - y[mu] * f[mu]) / gmm
            if b_new < 0.0:
                b_new = 0.0
            elif b_new > 1.0:
                b_new = 1.0
            db = b_new - beta[mu]
            if db != 0.0:
                beta[mu] = b_new
                coef = db * y[mu] / lam
                for j in range(n):
                    f[j] += coef * G[mu, j]
        # duality gap check
        primal = 0.0
        byf = 0.0
        s_beta = 0.0
        for i in range(n):
            u = 1.0 - y[i] * f[i]
            if u > 0.0:
                primal += u
            byf += beta[i] * y[i] * f[i]
            s_beta += beta[i]
        primal += 0.5 * byf
        dual = s_beta - 0.5 * byf
        denom = primal if primal > 1.0 else 1.0
        gap = (primal - dual) / denom
        if gap <= gap_rtol:
            return epoch + 1, gap
    return max_epochs, gap


def svm_coefficients(G: np.ndarray, y: np.ndarray, lam: float,
                     beta: Optional[np.ndarray] = None,
                     max_epochs: int = 2000, gap_rtol: float = 1e-6):
    """Dual coefficients c = beta*y/lam of the kernel SVM
        min_c sum_mu max(0, 1 - y_mu (G c)_mu) + (lam/2) c^T G c
    solved to relative duality gap <= gap_rtol."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if beta is None:
        beta = np.zeros(len(y))
    epochs, gap = _svm_dual_cd(np.ascontiguousarray(G, dtype=np.float64),
                               np.ascontiguousarray(y, dtype=np.float64),
                               float(lam), beta, max_epochs, gap_rtol)
    return beta * y / lam, beta, gap


def empirical_svm(data: RafDataset, kernel: KernelFamily, lam: float,
                  n_test: int = 2000) -> EmpiricalResult:
    """Train a kernel SVM to duality-gap tolerance and measure both errors."""
    G = kernel_gram(kernel, data.inputs)
    X_test, y_test = generate_test_set(data, n_test)
    K_test = kernel_gram(kernel, X_test, data.inputs)
    c, _, _ = svm_coefficients(G, data.labels, lam)
    return _errors_from_coefficients(data, G, K_test, y_test, c)


# ---------------------------------------------------------------------------
# Finite-width random features
# ---------------------------------------------------------------------------

def rf_features(X: np.ndarray, p: int, activation, seed_features: int):
    """Features sigma(F^T x / sqrt(d)) / sqrt(p) with Gaussian F from its
    own seed stream."""
    d = X.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed_features), 2]))
    F = rng.standard_normal((d, p))
    sigma = ACTIVATIONS[activation] if isinstance(activation, str) else activation
    return sigma(X @ F / np.sqrt(d)) / np.sqrt(p), F


def empirical_rf(data: RafDataset, width_p: int, activation, loss: str,
                 lam: float, seed_features: int,
                 n_test: int = 2000) -> EmpiricalResult:
    """Train the p-dimensional linear model on random features."""
    if width_p < 1:
        raise ValueError("width_p must be >= 1")
    Z, F = rf_features(data.inputs, width_p, activation, seed_features)
    X_test, y_test = generate_test_set(data, n_test)
    sigma = ACTIVATIONS[activation] if isinstance(activation, str) else activation
    Z_test = sigma(X_test @ F / np.sqrt(data.inputs.shape[1])) / np.sqrt(width_p)
    G = Z @ Z.T
    K_test = Z_test @ Z.T
    tag = loss_model(loss).tag
    if tag == "square":
        c = krr_coefficients(G, data.labels, lam)
    else:
        c, _, _ = svm_coefficients(G, data.labels, lam)
    return _errors_from_coefficients(data, G, K_test, y_test, c)


# ---------------------------------------------------------------------------
# Aggregation and sweep driver
# ---------------------------------------------------------------------------

def aggregate(results: Sequence[EmpiricalResult]) -> EmpiricalResult:
    """Mean and standard error over repeats."""
    if len(results) == 0:
        raise ValueError("no results to aggregate")
    gens = np.array([r.e_gen_hat for r in results])
    mems = np.array([r.e_mem_hat for r in results])
    R = len(results)
    se = lambda v: float(np.std(v, ddof=1) / np.sqrt(R)) if R > 1 else 0.0
    return EmpiricalResult(e_gen_hat=float(gens.mean()),
                           e_mem_hat=float(mems.mean()),
                           stderr_gen=se(gens), stderr_mem=se(mems),
                           n_repeats=R)


def mc_sweep(loss: str, kernel: KernelFamily, alpha: float, eps: float,
             d: int, lams: Sequence[float], repeats: int, seed: int,
             n_test: int = 2000):
    """Empirical errors over a lambda grid, averaged over seeded repeats.

    Grams and the eigendecomposition (square loss) are computed once per
    repeat and shared across the grid; the SVM dual is warm-started along
    the grid.  Returns a list of EmpiricalResult, one per lambda.
    """
    tag = loss_model(loss).tag
    n = int(round(alpha * d))
    lams = list(lams)
    per_lam = [[] for _ in lams]
    root = np.random.SeedSequence(int(seed))
    repeat_seeds = [int(s.generate_state(1)[0] % (2 ** 31)) for s in
                    root.spawn(repeats)]
    for rep_seed in repeat_seeds:
        data = generate_raf_dataset(n, d, eps, rep_seed)
        G = kernel_gram(kernel, data.inputs)
        X_test, y_test = generate_test_set(data, n_test)
        K_test = kernel_gram(kernel, X_test, data.inputs)
        y = data.labels
        if tag == "square":
            w, U = np.linalg.eigh(G)
            Uty = U.T @ y
            # pseudo-inverse cutoff for the ridgeless (min-norm) endpoint
            w_floor = 1e-10 * float(w[-1])
            for i, lam in enumerate(lams):
                if lam == 0.0:
                    inv = np.where(w > w_floor, 1.0 / np.maximum(w, w_floor),
                                   0.0)
                    c = U @ (Uty * inv)
                else:
                    c = U @ (Uty / (w + lam))
                per_lam[i].append(
                    _errors_from_coefficients(data, G, K_test, y_test, c))
        else:
            beta = np.zeros(n)
            order = np.argsort(lams)[::-1]  # large to small: warm start path
            for i in order:
                c, beta, _ = svm_coefficients(G, y, lams[i], beta=beta)
                per_lam[i].append(
                    _errors_from_coefficients(data, G, K_test, y_test, c))
    return [aggregate(rs) for rs in per_lam]
