"""Exact (dense) t-SNE for analyzing emotion-feature geometry.

O(n^2) affinities are fine at this corpus scale (<= 1200 points per
language). Conditional distributions use a per-point binary search on the
Gaussian precision to hit the target perplexity; the low-dimensional layout
is optimized by momentum gradient descent with the usual early-exaggeration
phase. The KL trace is always computed against the *unexaggerated* joint
distribution so values before and after the exaggeration cutoff compare on
one scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
PERPLEXITY_TOL = 1e-5
P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneResult:
    embedding: np.ndarray  # n x 2
    kl_trace: np.ndarray  # KL divergence per iteration, unexaggerated P

    @property
    def final_kl(self) -> float:
        return float(self.kl_trace[-1])

    @property
    def post_exaggeration_kl(self) -> float:
        return float(self.kl_trace[min(EXAGGERATION_ITERS, self.kl_trace.size - 1)])


def _conditional_probs(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-stochastic P(j|i) whose entropy matches log(perplexity).

    Binary search on beta = 1/(2 sigma^2) per point, to within
    PERPLEXITY_TOL in nats.
    """
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(100):
            logits = -beta * d
            logits -= logits.max()
            p = np.exp(logits)
            total = p.sum()
            p /= total
            # Entropy in nats of the conditional distribution.
            entropy = -np.sum(p * np.log(np.maximum(p, 1e-300)))
            diff = entropy - target
            if abs(diff) < PERPLEXITY_TOL:
                break
            if diff > 0:  # too flat -> sharpen
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
        row = np.insert(p, i, 0.0)
        P[i] = row
    return P


def tsne(
    X: np.ndarray,
    perplexity: float = 30.0,
    iters: int = 1000,
    lr: float = 200.0,
    seed: int = 0,
) -> TsneResult:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 5:
        raise ConfigError("t-SNE needs an n x d matrix with n >= 5")
    n = X.shape[0]
    if not perplexity < (n - 1) / 3:
        raise ConfigError(f"perplexity {perplexity} too large for n={n}; need < (n-1)/3")
    if not np.all(np.isfinite(X)):
        raise ConfigError("t-SNE input contains non-finite values")

    sq = np.sum(X**2, axis=1)
    sq_dists = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(sq_dists, 0.0)
    if sq_dists.max() == 0.0:
        raise ConfigError("t-SNE input is degenerate: all points identical")

    cond = _conditional_probs(sq_dists, perplexity)
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)

    rng = np.random.default_rng(seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    velocity = np.zeros_like(Y)
    kl_trace = np.empty(iters)

    for it in range(iters):
        ysq = np.sum(Y**2, axis=1)
        num = 1.0 / (1.0 + np.maximum(ysq[:, None] + ysq[None, :] - 2.0 * Y @ Y.T, 0.0))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), P_FLOOR)

        kl_trace[it] = float(np.sum(P * np.log(P / Q)))

        P_eff = P * EXAGGERATION if it < EXAGGERATION_ITERS else P
        PQ = (P_eff - Q) * num
        grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)

        momentum = MOMENTUM_EARLY if it < EXAGGERATION_ITERS else MOMENTUM_LATE
        velocity = momentum * velocity - lr * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    if not np.all(np.isfinite(Y)):
        raise ConfigError("t-SNE diverged to non-finite coordinates; lower the learning rate")
    return TsneResult(embedding=Y, kl_trace=kl_trace)
