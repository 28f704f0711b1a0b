"""Evaluation metrics and sampling-based test oracles.

AUC uses the Mann-Whitney convention: ties receive half credit.  Snapshots
with no edges or nothing but edges have no defined AUC and are reported as
NaN rather than a silent 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .model import DynamicNetwork, link_probability

__all__ = [
    "auc",
    "in_sample_auc",
    "distance_ratio_stats",
    "DistanceRatioSummary",
    "movement_stats",
    "MovementStats",
    "beta_mse",
    "mc_expectation_oracle",
    "McExpectation",
]

RATIO_GRID_MAX = 3.0
RATIO_GRID_BINS = 256


def auc(scores, labels) -> float:
    """Area under the ROC curve: P(score+ > score-) + P(tie)/2.

    Computed from average ranks in O(m log m).  Requires both classes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equally long")
    pos = int(np.sum(labels == 1))
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("AUC requires at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    u = float(np.sum(ranks[labels == 1])) - pos * (pos + 1) / 2.0
    return u / (pos * neg)


def in_sample_auc(net: DynamicNetwork, positions, beta: float) -> np.ndarray:
    """Per-snapshot AUC of plug-in link probabilities against observed edges.

    ``positions`` is any (n, T, d) array of point estimates.  Snapshots with a
    single label class yield NaN.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n, T, _ = positions.shape
    if (n, T) != (net.n, net.T):
        raise ValueError("positions shape does not match network")
    off = ~np.eye(n, dtype=bool)
    out = np.empty(T)
    for t in range(T):
        X = positions[:, t, :]
        P = link_probability(beta, X[:, None, :], X[None, :, :])
        labels = net.adjacency(t + 1)[off]
        if labels.size == 0 or labels.min() == labels.max():
            out[t] = np.nan
        else:
            out[t] = auc(P[off], labels)
    return out


@dataclass(frozen=True)
class DistanceRatioSummary:
    median: float
    q1: float
    q3: float
    grid: np.ndarray       # bin centers on [0, RATIO_GRID_MAX]
    density: np.ndarray    # integrates to 1 over the grid
    n_ratios: int


def distance_ratio_stats(mu_hat, x_true) -> DistanceRatioSummary:
    """Ratios ||mu_hat_it - mu_hat_jt|| / ||x_it - x_jt|| over all unordered
    pairs and snapshots; pairs with true distance below 1e-12 are dropped.
    Ratios beyond the grid end are counted in the last bin.
    """
    mu_hat = np.asarray(mu_hat, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if mu_hat.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {mu_hat.shape} vs {x_true.shape}")
    n, T, _ = mu_hat.shape
    iu = np.triu_indices(n, k=1)
    ratios = []
    for t in range(T):
        dh = np.linalg.norm(mu_hat[:, t, None, :] - mu_hat[None, :, t, :], axis=-1)[iu]
        dt = np.linalg.norm(x_true[:, t, None, :] - x_true[None, :, t, :], axis=-1)[iu]
        keep = dt > 1e-12
        ratios.append(dh[keep] / dt[keep])
    ratios = np.concatenate(ratios) if ratios else np.empty(0)
    if ratios.size == 0:
        raise ValueError("no valid pairs for distance ratios")
    q1, med, q3 = np.percentile(ratios, [25, 50, 75])
    clipped = np.minimum(ratios, RATIO_GRID_MAX)
    density, edges = np.histogram(
        clipped, bins=RATIO_GRID_BINS, range=(0.0, RATIO_GRID_MAX), density=True
    )
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DistanceRatioSummary(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        grid=centers,
        density=density,
        n_ratios=int(ratios.size),
    )


@dataclass(frozen=True)
class MovementStats:
    squared_displacements: np.ndarray  # (T-1, n)
    summaries: list[tuple[float, float, float, float, float]]  # five numbers per transition


def movement_stats(mu) -> MovementStats:
    """Per-transition squared displacements ||mu_it - mu_i(t-1)||^2 with
    boxplot five-number summaries (min, q1, median, q3, max)."""
    mu = np.asarray(mu, dtype=np.float64)
    n, T, _ = mu.shape
    if T < 2:
        raise ValueError("movement stats require at least two snapshots")
    disp = np.sum((mu[:, 1:, :] - mu[:, :-1, :]) ** 2, axis=2).T  # (T-1, n)
    summaries = []
    for row in disp:
        q1, med, q3 = np.percentile(row, [25, 50, 75])
        summaries.append((float(row.min()), float(q1), float(med), float(q3), float(row.max())))
    return MovementStats(squared_displacements=disp, summaries=summaries)


def beta_mse(estimates, beta_true: float) -> float:
    """Mean squared deviation of intercept estimates from the truth."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.size == 0:
        raise ValueError("beta_mse requires at least one estimate")
    return float(np.mean((estimates - beta_true) ** 2))


@dataclass(frozen=True)
class McExpectation:
    exp_term: float      # MC estimate of E[exp(beta - ||X_i - X_j||^2)]
    log_term: float      # MC estimate of E[log(1 + exp(beta - ||X_i - X_j||^2))]
    exp_se: float
    log_se: float


def mc_expectation_oracle(
    mu_i, mu_j, sigma, xi_tilde, psi2_tilde, n_samples: int = 200_000, seed: int = 0
) -> McExpectation:
    """Monte-Carlo estimates of the two pair expectations under the
    variational factors; the closed forms used by the fit are pinned against
    these in the test suite."""
    if n_samples < 1000:
        raise ValueError("use at least 1000 samples")
    mu_i = np.asarray(mu_i, dtype=np.float64)
    mu_j = np.asarray(mu_j, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    d = mu_i.size
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(sigma)
    x_i = mu_i + rng.standard_normal((n_samples, d)) @ L.T
    x_j = mu_j + rng.standard_normal((n_samples, d)) @ L.T
    beta = xi_tilde + np.sqrt(psi2_tilde) * rng.standard_normal(n_samples)
    z = beta - np.sum((x_i - x_j) ** 2, axis=1)
    e = np.exp(z)
    lg = np.logaddexp(0.0, z)
    return McExpectation(
        exp_term=float(e.mean()),
        log_term=float(lg.mean()),
        exp_se=float(e.std(ddof=1) / np.sqrt(n_samples)),
        log_se=float(lg.std(ddof=1) / np.sqrt(n_samples)),
    )
