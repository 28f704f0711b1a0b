"""Hot loops of the Metropolis-within-Gibbs sweep, JIT-compiled.

The random-number consumption order is part of the contract (mirrored by the
traced Python implementation in ``mcmc``): for every snapshot t ascending and
node i ascending, d standard normals for the proposal then one uniform; after
all sites, one standard normal and one uniform for the intercept.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def softplus(z):
    return np.log1p(np.exp(-abs(z))) + max(z, 0.0)


@njit(cache=True)
def site_pair_loglik(X_t, w_row, i, x, beta):
    """Likelihood terms of all ordered pairs containing node i at one
    snapshot, with node i at position x.  w_row counts both orientations."""
    n, d = X_t.shape
    total = 0.0
    for j in range(n):
        if j == i:
            continue
        dsq = 0.0
        for k in range(d):
            diff = x[k] - X_t[j, k]
            dsq += diff * diff
        z = beta - dsq
        total += w_row[j] * z - 2.0 * softplus(z)
    return total


@njit(cache=True)
def total_pair_loglik(X, W, beta):
    """Likelihood terms over all snapshots and ordered pairs."""
    n, T, d = X.shape
    total = 0.0
    for t in range(T):
        for i in range(n):
            for j in range(i + 1, n):
                dsq = 0.0
                for k in range(d):
                    diff = X[i, t, k] - X[j, t, k]
                    dsq += diff * diff
                z = beta - dsq
                total += W[t, i, j] * z - 2.0 * softplus(z)
    return total


@njit(cache=True)
def beta_pair_logliks(X, W, beta_old, beta_new):
    """One fused pass returning the pair log-likelihood at both intercepts."""
    n, T, d = X.shape
    tot_old = 0.0
    tot_new = 0.0
    for t in range(T):
        for i in range(n):
            for j in range(i + 1, n):
                dsq = 0.0
                for k in range(d):
                    diff = X[i, t, k] - X[j, t, k]
                    dsq += diff * diff
                w = W[t, i, j]
                z_old = beta_old - dsq
                z_new = beta_new - dsq
                tot_old += w * z_old - 2.0 * softplus(z_old)
                tot_new += w * z_new - 2.0 * softplus(z_new)
    return tot_old, tot_new


@njit(cache=True)
def site_chain_logprior(X, i, t, x, sigma2, tau2):
    """Gaussian chain terms containing X_it, with node i at time t at x."""
    n, T, d = X.shape
    total = 0.0
    if t == 0:
        for k in range(d):
            total -= x[k] * x[k] / (2.0 * sigma2)
        if T > 1:
            for k in range(d):
                diff = X[i, 1, k] - x[k]
                total -= diff * diff / (2.0 * tau2)
    else:
        for k in range(d):
            diff = x[k] - X[i, t - 1, k]
            total -= diff * diff / (2.0 * tau2)
        if t < T - 1:
            for k in range(d):
                diff = X[i, t + 1, k] - x[k]
                total -= diff * diff / (2.0 * tau2)
    return total


@njit(cache=True)
def mh_sweep_kernel(
    X, beta_arr, W, sigma2, tau2, xi, psi2, inv_temp, sd_x, sd_beta, rng
):
    """One Metropolis-within-Gibbs sweep on the tempered target.

    Mutates X and beta_arr (length-1 array) in place; returns the numbers of
    accepted latent-site and intercept proposals.
    """
    n, T, d = X.shape
    beta = beta_arr[0]
    acc_latent = 0
    acc_beta = 0
    xprop = np.empty(d)
    xcur = np.empty(d)
    for t in range(T):
        for i in range(n):
            for k in range(d):
                xcur[k] = X[i, t, k]
                xprop[k] = xcur[k] + sd_x * rng.standard_normal()
            w_row = W[t, i]
            cur = site_pair_loglik(X[:, t, :], w_row, i, xcur, beta)
            cur += site_chain_logprior(X, i, t, xcur, sigma2, tau2)
            new = site_pair_loglik(X[:, t, :], w_row, i, xprop, beta)
            new += site_chain_logprior(X, i, t, xprop, sigma2, tau2)
            u = rng.random()
            if np.log(u) < (new - cur) * inv_temp:
                for k in range(d):
                    X[i, t, k] = xprop[k]
                acc_latent += 1
    bprop = beta + sd_beta * rng.standard_normal()
    ll_old, ll_new = beta_pair_logliks(X, W, beta, bprop)
    cur = ll_old - (beta - xi) ** 2 / (2.0 * psi2)
    new = ll_new - (bprop - xi) ** 2 / (2.0 * psi2)
    u = rng.random()
    if np.log(u) < (new - cur) * inv_temp:
        beta_arr[0] = bprop
        acc_beta = 1
    return acc_latent, acc_beta
