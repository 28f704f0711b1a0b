"""Domain types and exact probability kernels of the dynamic latent space model.

A dynamic network is a time series of directed binary adjacency matrices on a
fixed node set.  Each node carries an unobserved trajectory in R^d: the initial
position is N(0, sigma2*I), and positions evolve by a Gaussian random walk with
step variance tau2.  Conditional on positions, every ordered pair (i, j) at
snapshot t forms an edge independently with

    logit P(edge) = beta - ||x_i - x_j||^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import expit

__all__ = [
    "DynamicNetwork",
    "Hyperparameters",
    "LatentConfiguration",
    "link_probability",
    "log_likelihood",
    "log_prior_latent",
    "log_joint",
]

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DynamicNetwork:
    """Fixed node set, T snapshots of directed binary edges, no self-loops.

    ``edges`` holds one frozenset of ordered (src, dst) pairs per snapshot.
    Snapshots are indexed 1..T in file formats and t-arguments; internally the
    tuple is 0-based.  Undirected networks are stored symmetrized: both
    orientations of every edge are present.
    """

    n: int
    T: int
    edges: tuple[frozenset[tuple[int, int]], ...]
    directed: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("node count must be positive")
        if self.T < 1:
            raise ValueError("snapshot count must be positive")
        if len(self.edges) != self.T:
            raise ValueError(f"expected {self.T} snapshots, got {len(self.edges)}")
        object.__setattr__(
            self, "edges", tuple(frozenset(map(tuple, es)) for es in self.edges)
        )
        for t, es in enumerate(self.edges):
            for (i, j) in es:
                if i == j:
                    raise ValueError(f"self-loop ({i},{i}) at snapshot {t + 1}")
                if not (0 <= i < self.n and 0 <= j < self.n):
                    raise ValueError(
                        f"edge ({i},{j}) at snapshot {t + 1} out of range [0,{self.n})"
                    )
            if not self.directed:
                for (i, j) in es:
                    if (j, i) not in es:
                        raise ValueError(
                            f"undirected network missing mirror of ({i},{j}) "
                            f"at snapshot {t + 1}"
                        )

    @classmethod
    def from_snapshots(cls, n, edges, directed=True):
        """Build from an iterable of per-snapshot edge collections.

        For undirected networks each edge may be given in either (or both)
        orientations; storage is symmetrized.
        """
        snaps = []
        for es in edges:
            es = set(map(tuple, es))
            if not directed:
                es |= {(j, i) for (i, j) in es}
            snaps.append(frozenset(es))
        return cls(n=n, T=len(snaps), edges=tuple(snaps), directed=directed)

    @property
    def edge_count(self) -> int:
        """Total number of ordered edges across all snapshots."""
        return sum(len(es) for es in self.edges)

    @cached_property
    def _adjacency(self) -> np.ndarray:
        Y = np.zeros((self.T, self.n, self.n), dtype=np.int8)
        for t, es in enumerate(self.edges):
            if es:
                idx = np.array(sorted(es))
                Y[t, idx[:, 0], idx[:, 1]] = 1
        return Y

    def adjacency(self, t: int | None = None) -> np.ndarray:
        """Dense 0/1 adjacency; snapshot ``t`` in 1..T, or all (T, n, n)."""
        if t is None:
            return self._adjacency
        if not 1 <= t <= self.T:
            raise ValueError(f"snapshot index {t} out of range [1,{self.T}]")
        return self._adjacency[t - 1]

    @cached_property
    def _edge_arrays(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per snapshot, sorted (src, dst) index arrays of the ordered edges."""
        out = []
        for es in self.edges:
            if es:
                idx = np.array(sorted(es), dtype=np.intp)
                out.append((idx[:, 0], idx[:, 1]))
            else:
                empty = np.empty(0, dtype=np.intp)
                out.append((empty, empty))
        return out


@dataclass(frozen=True)
class Hyperparameters:
    """Model hyperparameters: latent dimension, prior variances, and alpha.

    ``alpha`` in (0, 1] scales the prior-discrepancy penalty on the intercept
    block of the variational objective; alpha = 1 is the standard procedure.
    """

    d: int = 2
    sigma2: float = 1.0
    tau2: float = 0.1
    xi: float = 0.0
    psi2: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("latent dimension must be positive")
        for name in ("sigma2", "tau2", "psi2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")


@dataclass(frozen=True)
class LatentConfiguration:
    """Latent positions (n, T, d) plus the intercept."""

    positions: np.ndarray
    beta: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 3:
            raise ValueError("positions must have shape (n, T, d)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.positions.shape


def link_probability(beta, x_i, x_j):
    """Edge probability sigma(beta - ||x_i - x_j||^2).

    Accepts single d-vectors or broadcastable stacks of them (the vector
    dimension is the last axis).  Returns a float for a single pair.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape[-1] != x_j.shape[-1]:
        raise ValueError(f"dimension mismatch: {x_i.shape} vs {x_j.shape}")
    try:
        np.broadcast_shapes(x_i.shape, x_j.shape)
    except ValueError as exc:
        raise ValueError(f"dimension mismatch: {x_i.shape} vs {x_j.shape}") from exc
    if not (np.all(np.isfinite(x_i)) and np.all(np.isfinite(x_j)) and np.isfinite(beta)):
        raise ValueError("inputs must be finite")
    d2 = np.sum((x_i - x_j) ** 2, axis=-1)
    p = expit(beta - d2)
    return float(p) if np.ndim(p) == 0 else p


def _check_shapes(net: DynamicNetwork, latent: LatentConfiguration):
    n, T, _ = latent.shape
    if (n, T) != (net.n, net.T):
        raise ValueError(
            f"latent shape {(n, T)} does not match network ({net.n}, {net.T})"
        )


def _pairwise_sq_distances(Xt: np.ndarray) -> np.ndarray:
    v = np.sum(Xt * Xt, axis=1)
    D2 = v[:, None] + v[None, :] - 2.0 * (Xt @ Xt.T)
    np.maximum(D2, 0.0, out=D2)
    return D2


def log_likelihood(net: DynamicNetwork, latent: LatentConfiguration) -> float:
    """Bernoulli log-likelihood summed over snapshots and ordered pairs.

    sum_t sum_{i != j} [ Y_ijt * z_ijt - log(1 + exp(z_ijt)) ] with
    z_ijt = beta - ||x_it - x_jt||^2.  Always < 0 for finite parameters.
    """
    _check_shapes(net, latent)
    X, beta = latent.positions, latent.beta
    n = net.n
    off = ~np.eye(n, dtype=bool)
    total = 0.0
    for t in range(net.T):
        Z = beta - _pairwise_sq_distances(X[:, t, :])
        Y = net.adjacency(t + 1)
        # serial reduction: fixed summation order for determinism
        total += float(np.sum((Y * Z - np.logaddexp(0.0, Z))[off]))
    return total


def log_prior_latent(latent: LatentConfiguration, hyper: Hyperparameters) -> float:
    """Gaussian log-density of the latent trajectories, normalizers included."""
    X = latent.positions
    n, T, d = X.shape
    if not hyper.sigma2 > 0 or not hyper.tau2 > 0:
        raise ValueError("variances must be positive")
    out = -0.5 * np.sum(X[:, 0, :] ** 2) / hyper.sigma2
    out -= 0.5 * n * d * (LOG_2PI + np.log(hyper.sigma2))
    if T > 1:
        steps = X[:, 1:, :] - X[:, :-1, :]
        out -= 0.5 * np.sum(steps**2) / hyper.tau2
        out -= 0.5 * n * (T - 1) * d * (LOG_2PI + np.log(hyper.tau2))
    return float(out)


def log_joint(
    net: DynamicNetwork, latent: LatentConfiguration, hyper: Hyperparameters
) -> float:
    """Unnormalized log-posterior: likelihood + latent prior + intercept prior."""
    _check_shapes(net, latent)
    lp_beta = -0.5 * (latent.beta - hyper.xi) ** 2 / hyper.psi2
    lp_beta -= 0.5 * (LOG_2PI + np.log(hyper.psi2))
    return log_likelihood(net, latent) + log_prior_latent(latent, hyper) + float(lp_beta)
