"""Parallel-tempering Metropolis-within-Gibbs baseline sampler.

Each temperature level k targets pi_k proportional to exp(log_joint / T_k);
the coldest level (T_1 = 1) is the posterior.  A step either sweeps every
level with random-walk proposals (probability a0) or proposes one uniformly
chosen neighboring-temperature swap.  Latent draws are aligned by an
orthogonal Procrustes transformation (all n*T points stacked as one cloud)
before averaging, which removes the model's rotational non-identifiability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _pair_kernels as _k
from .model import DynamicNetwork, Hyperparameters, LatentConfiguration, log_joint
from .vb import NumericalDivergenceError, init_mds

__all__ = [
    "McmcOptions",
    "ChainState",
    "McmcResult",
    "AcceptanceReport",
    "init_chain",
    "full_conditional_logdensity_latent",
    "mh_sweep",
    "pt_step",
    "swap_log_ratio",
    "procrustes_align",
    "ProcrustesResult",
    "run_mcmc",
]


@dataclass(frozen=True)
class McmcOptions:
    temperatures: tuple[float, ...] = (1.0, 10.0, 20.0)
    a0: float = 0.9
    proposal_sd_latent: float = 0.1
    proposal_sd_beta: float = 0.05
    burn_in: int = 10_000
    samples: int = 90_000
    thin: int = 1
    seed: int = 0
    init: str = "prior"  # "prior" draws the chain start from the model prior

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temperatures)
        object.__setattr__(self, "temperatures", temps)
        if not temps or temps[0] != 1.0:
            raise ValueError("first temperature must be 1")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ValueError("temperatures must be strictly increasing")
        if not 0.0 < self.a0 < 1.0:
            raise ValueError("a0 must lie in (0, 1)")
        if self.proposal_sd_latent <= 0 or self.proposal_sd_beta <= 0:
            raise ValueError("proposal standard deviations must be positive")
        if self.burn_in < 1 or self.samples < 1 or self.thin < 1:
            raise ValueError("burn_in, samples and thin must be positive")
        if self.init not in ("prior", "mds"):
            raise ValueError(f"unknown chain init {self.init!r}")


@dataclass
class ChainState:
    """Positions and intercepts per temperature plus acceptance counters."""

    temperatures: tuple[float, ...]
    positions: np.ndarray  # (K, n, T, d)
    betas: np.ndarray  # (K,)
    rng: np.random.Generator
    latent_proposals: np.ndarray | None = None
    latent_accepts: np.ndarray | None = None
    beta_proposals: np.ndarray | None = None
    beta_accepts: np.ndarray | None = None
    swap_attempts: np.ndarray | None = None
    swap_accepts: np.ndarray | None = None
    iteration: int = 0

    def __post_init__(self):
        K = len(self.temperatures)
        if self.temperatures[0] != 1.0 or any(
            b <= a for a, b in zip(self.temperatures, self.temperatures[1:])
        ):
            raise ValueError("temperatures must be increasing and start at 1")
        for name in ("latent_proposals", "latent_accepts", "beta_proposals", "beta_accepts"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(K, dtype=np.int64))
        for name in ("swap_attempts", "swap_accepts"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(max(K - 1, 1), dtype=np.int64))

    @property
    def n_temperatures(self) -> int:
        return len(self.temperatures)

    def config(self, k: int = 0) -> LatentConfiguration:
        return LatentConfiguration(self.positions[k].copy(), float(self.betas[k]))


def init_chain(
    net: DynamicNetwork, hyper: Hyperparameters, opts: McmcOptions
) -> ChainState:
    """Fresh chain: every temperature initialized from the model prior (one
    independent draw per level) or from the MDS embedding of the network."""
    rng = np.random.default_rng(opts.seed)
    K = len(opts.temperatures)
    n, T, d = net.n, net.T, hyper.d
    X = np.empty((K, n, T, d))
    betas = np.empty(K)
    mds = init_mds(net, d).mu if opts.init == "mds" else None
    for k in range(K):
        if mds is not None:
            X[k] = mds
        else:
            X[k, :, 0, :] = math.sqrt(hyper.sigma2) * rng.standard_normal((n, d))
            for t in range(1, T):
                X[k, :, t, :] = X[k, :, t - 1, :] + math.sqrt(hyper.tau2) * rng.standard_normal((n, d))
        betas[k] = hyper.xi + math.sqrt(hyper.psi2) * rng.standard_normal()
    return ChainState(temperatures=opts.temperatures, positions=X, betas=betas, rng=rng)


def full_conditional_logdensity_latent(
    net: DynamicNetwork,
    latent: LatentConfiguration,
    hyper: Hyperparameters,
    i: int,
    t: int,
) -> float:
    """Log full conditional of X_it (up to a constant): the Gaussian chain
    terms containing X_it plus the likelihood terms of every ordered pair
    containing node i at snapshot t.  ``t`` in 1..T."""
    n, T, _ = latent.shape
    if (n, T) != (net.n, net.T):
        raise ValueError("latent shape does not match network")
    if not 0 <= i < n:
        raise ValueError(f"node index {i} out of range [0,{n})")
    if not 1 <= t <= T:
        raise ValueError(f"snapshot index {t} out of range [1,{T}]")
    X = latent.positions
    t0 = t - 1
    x = X[i, t0, :]
    out = 0.0
    if t0 == 0:
        out -= float(x @ x) / (2.0 * hyper.sigma2)
        if T > 1:
            step = X[i, 1, :] - x
            out -= float(step @ step) / (2.0 * hyper.tau2)
    else:
        step = x - X[i, t0 - 1, :]
        out -= float(step @ step) / (2.0 * hyper.tau2)
        if t0 < T - 1:
            step = X[i, t0 + 1, :] - x
            out -= float(step @ step) / (2.0 * hyper.tau2)
    Y = net.adjacency(t)
    w = (Y[i, :] + Y[:, i]).astype(np.float64)
    d2 = np.sum((x - X[:, t0, :]) ** 2, axis=1)
    z = latent.beta - d2
    mask = np.arange(n) != i
    out += float(np.sum(w[mask] * z[mask] - 2.0 * np.logaddexp(0.0, z[mask])))
    return out


def _w_tensor(net: DynamicNetwork) -> np.ndarray:
    Y = net.adjacency().astype(np.float64)
    return Y + Y.transpose(0, 2, 1)


def mh_sweep(
    net: DynamicNetwork,
    chain: ChainState,
    hyper: Hyperparameters,
    opts: McmcOptions,
    temperature_index: int,
    trace: list | None = None,
) -> ChainState:
    """One sweep at one temperature: a random-walk proposal and accept/reject
    decision for every X_it (t ascending, i ascending) and then for beta, with
    acceptance exponent 1/T_k.  With ``trace`` given, runs an equivalent
    instrumented pure-Python path recording
    (kind, i, t, tempered_log_ratio, u, accepted) tuples.
    """
    k = temperature_index
    if not 0 <= k < chain.n_temperatures:
        raise ValueError("temperature index out of range")
    W = _w_tensor(net)
    inv_temp = 1.0 / chain.temperatures[k]
    n, T = net.n, net.T
    if trace is None:
        beta_arr = np.array([chain.betas[k]])
        acc_lat, acc_beta = _k.mh_sweep_kernel(
            chain.positions[k],
            beta_arr,
            W,
            hyper.sigma2,
            hyper.tau2,
            hyper.xi,
            hyper.psi2,
            inv_temp,
            opts.proposal_sd_latent,
            opts.proposal_sd_beta,
            chain.rng,
        )
        chain.betas[k] = beta_arr[0]
    else:
        acc_lat, acc_beta = _mh_sweep_traced(
            chain.positions[k], chain.betas, k, W, hyper, opts, inv_temp, chain.rng, trace
        )
    chain.latent_proposals[k] += n * T
    chain.latent_accepts[k] += acc_lat
    chain.beta_proposals[k] += 1
    chain.beta_accepts[k] += acc_beta
    return chain


def _mh_sweep_traced(X, betas, k, W, hyper, opts, inv_temp, rng, trace):
    """Pure-Python mirror of the JIT sweep with identical RNG consumption."""
    n, T, d = X.shape
    beta = float(betas[k])
    acc_lat = 0
    for t in range(T):
        for i in range(n):
            xcur = X[i, t, :].copy()
            xprop = xcur + opts.proposal_sd_latent * np.array(
                [rng.standard_normal() for _ in range(d)]
            )
            cur = _k.site_pair_loglik(X[:, t, :], W[t, i], i, xcur, beta)
            cur += _k.site_chain_logprior(X, i, t, xcur, hyper.sigma2, hyper.tau2)
            new = _k.site_pair_loglik(X[:, t, :], W[t, i], i, xprop, beta)
            new += _k.site_chain_logprior(X, i, t, xprop, hyper.sigma2, hyper.tau2)
            log_ratio = (new - cur) * inv_temp
            u = rng.random()
            accepted = math.log(u) < log_ratio
            if accepted:
                X[i, t, :] = xprop
                acc_lat += 1
            trace.append(("latent", i, t + 1, log_ratio, u, accepted))
    bprop = beta + opts.proposal_sd_beta * rng.standard_normal()
    ll_old, ll_new = _k.beta_pair_logliks(X, W, beta, bprop)
    cur = ll_old - (beta - hyper.xi) ** 2 / (2.0 * hyper.psi2)
    new = ll_new - (bprop - hyper.xi) ** 2 / (2.0 * hyper.psi2)
    log_ratio = (new - cur) * inv_temp
    u = rng.random()
    accepted = math.log(u) < log_ratio
    acc_beta = 0
    if accepted:
        betas[k] = bprop
        acc_beta = 1
    trace.append(("beta", -1, -1, log_ratio, u, accepted))
    return acc_lat, acc_beta


def swap_log_ratio(
    net: DynamicNetwork, chain: ChainState, hyper: Hyperparameters, pair: int
) -> float:
    """Log acceptance ratio of swapping levels (pair, pair+1):
    (1/T_i - 1/T_{i+1}) * (log_joint(z_{i+1}) - log_joint(z_i))."""
    if not 0 <= pair < chain.n_temperatures - 1:
        raise ValueError("swap pair index out of range")
    li = log_joint(net, chain.config(pair), hyper)
    lj = log_joint(net, chain.config(pair + 1), hyper)
    t_lo, t_hi = chain.temperatures[pair], chain.temperatures[pair + 1]
    return (lj - li) * (1.0 / t_lo - 1.0 / t_hi)


def pt_step(
    net: DynamicNetwork,
    chain: ChainState,
    hyper: Hyperparameters,
    opts: McmcOptions,
) -> ChainState:
    """One parallel-tempering step: with probability a0 a full sweep at every
    temperature, otherwise one uniformly chosen neighboring-pair swap proposal
    accepted with the symmetric tempered ratio.  For a single temperature the
    swap branch is unreachable and no branch uniform is drawn."""
    K = chain.n_temperatures
    rng = chain.rng
    u = rng.random() if K > 1 else 0.0
    if u <= opts.a0 or K == 1:
        for k in range(K):
            mh_sweep(net, chain, hyper, opts, k)
    else:
        pair = int(rng.integers(0, K - 1))
        log_ratio = swap_log_ratio(net, chain, hyper, pair)
        chain.swap_attempts[pair] += 1
        if math.log(rng.random()) < log_ratio:
            chain.positions[[pair, pair + 1]] = chain.positions[[pair + 1, pair]]
            chain.betas[[pair, pair + 1]] = chain.betas[[pair + 1, pair]]
            chain.swap_accepts[pair] += 1
    chain.iteration += 1
    return chain


# ---------------------------------------------------------------------------
# Procrustes alignment
# ---------------------------------------------------------------------------

class ProcrustesResult(NamedTuple):
    aligned: np.ndarray
    rotation: np.ndarray
    degenerate: bool


def procrustes_align(x, reference) -> ProcrustesResult:
    """Center both point sets and rotate (reflections allowed) the centered
    ``x`` to minimize the Frobenius distance to the centered reference.

    A rank-deficient cross-covariance leaves x centered but unrotated, with
    ``degenerate`` set.
    """
    x = np.asarray(x, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if x.shape != reference.shape or x.ndim != 2:
        raise ValueError("point sets must share a 2-D shape")
    m, d = x.shape
    if m < d:
        raise ValueError("need at least d points")
    xc = x - x.mean(axis=0)
    yc = reference - reference.mean(axis=0)
    cross = xc.T @ yc
    U, S, Vt = np.linalg.svd(cross)
    if S[-1] <= 1e-12 * max(S[0], 1e-300):
        return ProcrustesResult(xc, np.eye(d), True)
    R = U @ Vt
    return ProcrustesResult(xc @ R, R, False)


# ---------------------------------------------------------------------------
# the full run
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AcceptanceReport:
    latent_rate: np.ndarray
    beta_rate: np.ndarray
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray


@dataclass
class McmcResult:
    beta_mean: float
    positions_mean: np.ndarray  # (n, T, d), aligned cold-chain mean
    beta_draws: np.ndarray
    acceptance: AcceptanceReport
    auc_per_time: np.ndarray
    n_retained: int


def run_mcmc(
    net: DynamicNetwork, hyper: Hyperparameters, opts: McmcOptions = McmcOptions()
) -> McmcResult:
    """Run burn_in + samples tempering steps; retain the cold chain after
    burn-in (thinned), align every retained latent draw to the first one, and
    summarize with posterior means and in-sample AUC."""
    from .metrics import in_sample_auc

    chain = init_chain(net, hyper, opts)
    n, T, d = net.n, net.T, hyper.d
    total = opts.burn_in + opts.samples
    pos_sum = np.zeros((n, T, d))
    beta_draws = []
    reference = None
    align = n * T > d  # too few points to orient: average raw draws
    retained = 0
    for step in range(total):
        pt_step(net, chain, hyper, opts)
        if not np.isfinite(chain.betas).all():
            raise NumericalDivergenceError(
                f"non-finite intercept at step {step + 1}"
            )
        if step < opts.burn_in or (step - opts.burn_in) % opts.thin:
            continue
        cold = chain.positions[0]
        if not np.isfinite(cold).all():
            raise NumericalDivergenceError(
                f"non-finite latent positions at step {step + 1}"
            )
        flat = cold.reshape(n * T, d)
        if align:
            if reference is None:
                reference = flat - flat.mean(axis=0)
            flat = procrustes_align(flat, reference).aligned
        pos_sum += flat.reshape(n, T, d)
        beta_draws.append(float(chain.betas[0]))
        retained += 1
    pos_mean = pos_sum / retained
    beta_draws = np.array(beta_draws)
    beta_mean = float(beta_draws.mean())
    report = AcceptanceReport(
        latent_rate=chain.latent_accepts / np.maximum(chain.latent_proposals, 1),
        beta_rate=chain.beta_accepts / np.maximum(chain.beta_proposals, 1),
        swap_attempts=chain.swap_attempts.copy(),
        swap_accepts=chain.swap_accepts.copy(),
    )
    return McmcResult(
        beta_mean=beta_mean,
        positions_mean=pos_mean,
        beta_draws=beta_draws,
        acceptance=report,
        auc_per_time=in_sample_auc(net, pos_mean, beta_mean),
        n_retained=retained,
    )
