"""Variational engine for the dynamic latent space model.

The approximate posterior factorizes into a Gaussian N(xi_tilde, psi2_tilde)
for the intercept and one Gaussian N(mu_it, Sigma) per node and snapshot with
a covariance Sigma shared by all factors.  The fit minimizes a surrogate
objective: an upper bound on the KL divergence to the true posterior obtained
by bounding the expected log-likelihood from below with a single application
of Jensen's inequality.

The pair coupling enters through

    f = sum_t sum_{i != j} log(1 + exp(z_ijt)),
    z_ijt = xi_tilde + psi2_tilde/2 - log det(I + 4*Sigma)/2
            - (mu_it - mu_jt)^T (I + 4*Sigma)^{-1} (mu_it - mu_jt),

where exp(z_ijt) is the exact variational expectation of
exp(beta - ||X_i - X_j||^2).  The per-pair weight 1/A_ijt appearing in the
coordinate updates is the logistic function of z_ijt.  All derivatives of f
used by the updates are the true gradients/Hessians of f as defined above;
every one of them is pinned to central finite differences by the test suite.

Coordinate updates run in the order Sigma -> mu (t ascending, i ascending,
consuming values updated earlier in the same sweep) -> xi_tilde -> psi2_tilde
until the relative change of the objective falls below ``rel_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.special import expit

from .model import DynamicNetwork, Hyperparameters

__all__ = [
    "VariationalState",
    "FitOptions",
    "FitResult",
    "NumericalDivergenceError",
    "expected_sq_distance",
    "jensen_edge_term",
    "a_factor",
    "coupling_f",
    "surrogate_objective",
    "grad_f_mu",
    "hess_f_mu",
    "jac_f_sigma",
    "f_derivs_xi",
    "f_deriv_psi2",
    "update_sigma",
    "update_mu",
    "update_xi",
    "update_psi2",
    "fit",
    "init_random",
    "init_mds",
]

VAR_FLOOR = 1e-8


class NumericalDivergenceError(RuntimeError):
    """The optimization left the numerically representable region."""


@dataclass
class VariationalState:
    """Variational parameters: means (n, T, d), shared covariance, intercept factor."""

    mu: np.ndarray
    sigma: np.ndarray
    xi_tilde: float
    psi2_tilde: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.ndim != 3:
            raise ValueError("mu must have shape (n, T, d)")
        d = self.mu.shape[2]
        if self.sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.mu.shape

    def copy(self) -> "VariationalState":
        return VariationalState(
            self.mu.copy(), self.sigma.copy(), self.xi_tilde, self.psi2_tilde
        )

    def validate(self, min_eig: float = 0.0):
        """Raise ValueError unless all entries are finite, psi2_tilde > 0 and
        sigma is (near-)symmetric with smallest eigenvalue above ``min_eig``."""
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma))):
            raise ValueError("state contains non-finite entries")
        if not (np.isfinite(self.xi_tilde) and np.isfinite(self.psi2_tilde)):
            raise ValueError("state contains non-finite scalars")
        if self.psi2_tilde <= min_eig:
            raise ValueError("psi2_tilde must be positive")
        asym = np.max(np.abs(self.sigma - self.sigma.T))
        if asym > 1e-3 * max(1.0, float(np.max(np.abs(self.sigma)))):
            raise ValueError("sigma must be symmetric")
        w = np.linalg.eigvalsh(0.5 * (self.sigma + self.sigma.T))
        if w.min() <= min_eig:
            raise ValueError(f"sigma must be positive definite (min eig {w.min():g})")


@dataclass(frozen=True)
class FitOptions:
    """Controls for the coordinate-ascent loop.

    ``init`` is "random", "mds", or an explicit VariationalState used as the
    starting point.  ``damping`` < 1 blends each mu update with its previous
    value; the loop halves it when a sweep increases the objective by more
    than 10%.
    """

    max_iters: int = 500
    rel_tol: float = 1e-6
    damping: float = 1.0
    init: "str | VariationalState" = "random"
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if isinstance(self.init, str) and self.init not in ("random", "mds"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class FitResult:
    state: VariationalState
    objective_trace: list[float]
    iterations: int
    converged: bool
    auc_per_time: np.ndarray
    diverged: bool = False
    hyper: Hyperparameters | None = None
    options: FitOptions | None = None


# ---------------------------------------------------------------------------
# closed-form expectations
# ---------------------------------------------------------------------------

def _check_spd(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma must be square")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("sigma must be finite")
    w = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    if w.min() <= 0:
        raise ValueError("sigma must be positive definite")
    return sigma


def expected_sq_distance(mu_i, mu_j, sigma) -> float:
    """E||X_i - X_j||^2 = 2 tr(sigma) + ||mu_i - mu_j||^2 under independent
    Gaussian factors sharing the covariance ``sigma``."""
    sigma = _check_spd(sigma)
    mu_i = np.asarray(mu_i, dtype=np.float64)
    mu_j = np.asarray(mu_j, dtype=np.float64)
    return float(2.0 * np.trace(sigma) + np.sum((mu_i - mu_j) ** 2))


def _pair_z(mu_i, mu_j, sigma, xi_tilde, psi2_tilde) -> float:
    d = len(mu_i)
    B = np.eye(d) + 4.0 * sigma
    M = np.linalg.inv(B)
    diff = np.asarray(mu_i, dtype=np.float64) - np.asarray(mu_j, dtype=np.float64)
    return float(
        xi_tilde
        + 0.5 * psi2_tilde
        - 0.5 * np.linalg.slogdet(B)[1]
        - diff @ M @ diff
    )


def jensen_edge_term(mu_i, mu_j, sigma, xi_tilde, psi2_tilde) -> float:
    """One pair's summand of f: log(1 + E[exp(beta - ||X_i - X_j||^2)])."""
    sigma = _check_spd(sigma)
    if not psi2_tilde > 0:
        raise ValueError("psi2_tilde must be positive")
    z = _pair_z(mu_i, mu_j, sigma, xi_tilde, psi2_tilde)
    return float(np.logaddexp(0.0, z))


def a_factor(mu_i, mu_j, sigma, xi_tilde, psi2_tilde) -> float:
    """A_ijt = 1 + 1/E[exp(beta - ||X_i - X_j||^2)]; its reciprocal is the
    logistic weight attached to the pair in every coordinate update."""
    sigma = _check_spd(sigma)
    if not psi2_tilde > 0:
        raise ValueError("psi2_tilde must be positive")
    z = _pair_z(mu_i, mu_j, sigma, xi_tilde, psi2_tilde)
    return float(1.0 + np.exp(-z))


# ---------------------------------------------------------------------------
# pair scans
# ---------------------------------------------------------------------------

def _prep(sigma: np.ndarray):
    d = sigma.shape[0]
    B = np.eye(d) + 4.0 * sigma
    M = np.linalg.inv(B)
    sign, logdet = np.linalg.slogdet(B)
    if sign <= 0:
        raise NumericalDivergenceError("I + 4*sigma is not positive definite")
    return M, float(logdet)


def _chunk_rows(n: int) -> int:
    return max(1, min(n, 4_000_000 // max(n, 1)))


def _scan_snapshot(mu_t, M, c0, want_outer=False):
    """Accumulate, over ordered pairs (i, j), i != j, of one snapshot:
    sum softplus(z), sum s, sum s(1-s), and optionally sum s * diff diff^T,
    with s = expit(z).  Row-chunked; fixed reduction order.

    The quadratic forms expand as u_i + u_j - x_i^T (M + M^T) x_j, which
    stays valid for the asymmetric sigma perturbations used by the
    finite-difference oracles.
    """
    n, d = mu_t.shape
    sp_sum = 0.0
    s_sum = 0.0
    s1_sum = 0.0
    outer = np.zeros((d, d)) if want_outer else None
    u = np.sum((mu_t @ M) * mu_t, axis=1)
    cross_right = (mu_t @ (M + M.T)).T  # (d, n)
    block = _chunk_rows(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        z = (c0 - u[lo:hi, None] - u[None, :]) + mu_t[lo:hi] @ cross_right
        rows = np.arange(lo, hi)
        z[rows - lo, rows] = -np.inf  # drop the diagonal
        sp_sum += float(np.sum(np.logaddexp(0.0, z)))
        s = expit(z)
        s_sum += float(np.sum(s))
        s1_sum += float(np.sum(s * (1.0 - s)))
        if want_outer:
            diff = (mu_t[lo:hi, None, :] - mu_t[None, :, :]).reshape(-1, d)
            outer += diff.T @ (s.reshape(-1)[:, None] * diff)
    return sp_sum, s_sum, s1_sum, outer


def coupling_f(net: DynamicNetwork, state: VariationalState) -> float:
    """The pair-coupling function f summed over snapshots and ordered pairs."""
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    total = 0.0
    for t in range(net.T):
        sp, _, _, _ = _scan_snapshot(state.mu[:, t, :], M, c0)
        total += sp
    return total


def _f_scan(net, state, want_outer=False):
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    s_sum = 0.0
    s1_sum = 0.0
    outer = np.zeros_like(state.sigma) if want_outer else None
    for t in range(net.T):
        _, s, s1, out = _scan_snapshot(state.mu[:, t, :], M, c0, want_outer)
        s_sum += s
        s1_sum += s1
        if want_outer:
            outer += out
    return M, s_sum, s1_sum, outer


# ---------------------------------------------------------------------------
# surrogate objective
# ---------------------------------------------------------------------------

def surrogate_objective(
    net: DynamicNetwork, state: VariationalState, hyper: Hyperparameters
) -> float:
    """KL upper bound (additive constants dropped), the quantity the fit
    monitors.  The intercept block is the exact KL of the beta factor scaled
    by 1/alpha, so it vanishes at the prior for every alpha.
    """
    n, T, d = state.shape
    if (n, T) != (net.n, net.T):
        raise ValueError("state shape does not match network")
    state.validate()
    mu, sigma = state.mu, state.sigma
    xi_t, psi2_t = state.xi_tilde, state.psi2_tilde
    sign, logdet_sigma = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise NumericalDivergenceError("sigma is not positive definite")
    tr = float(np.trace(sigma))

    obj = -(n * T / 2.0) * logdet_sigma
    obj += (n / (2.0 * hyper.sigma2) + n * (T - 1) / hyper.tau2) * tr
    obj += float(np.sum(mu[:, 0, :] ** 2)) / (2.0 * hyper.sigma2)
    if T > 1:
        obj += float(np.sum((mu[:, 1:, :] - mu[:, :-1, :]) ** 2)) / (2.0 * hyper.tau2)
    r = psi2_t / hyper.psi2
    obj += (r - math.log(r) + (xi_t - hyper.xi) ** 2 / hyper.psi2 - 1.0) / (
        2.0 * hyper.alpha
    )
    # observed-edge block and pair coupling
    M, logdet = _prep(sigma)
    c0 = xi_t + 0.5 * psi2_t - 0.5 * logdet
    for t in range(T):
        mu_t = mu[:, t, :]
        sp, _, _, _ = _scan_snapshot(mu_t, M, c0)
        obj += sp
        src, dst = net._edge_arrays[t]
        e_t = src.size
        obj -= e_t * (xi_t - 2.0 * tr)
        if e_t:
            obj += float(np.sum((mu_t[src] - mu_t[dst]) ** 2))
    return float(obj)


# ---------------------------------------------------------------------------
# derivatives of f
# ---------------------------------------------------------------------------

def _site_terms(mu_t, M, c0, i):
    """diff (n, d), logistic weights s and s(1-s) for all pairs containing
    node i at one snapshot (self entry zeroed)."""
    diff = mu_t[i] - mu_t
    z = c0 - np.sum((diff @ M) * diff, axis=1)
    z[i] = -np.inf
    s = expit(z)
    return diff, s, s * (1.0 - s)


def grad_f_mu(net: DynamicNetwork, state: VariationalState, i: int, t: int) -> np.ndarray:
    """Gradient of f with respect to mu_it (both pair orientations counted),
    t in 1..T."""
    _check_site(net, state, i, t)
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    diff, s, _ = _site_terms(state.mu[:, t - 1, :], M, c0, i)
    return -4.0 * (M @ (s[:, None] * diff).sum(axis=0))


def hess_f_mu(net: DynamicNetwork, state: VariationalState, i: int, t: int) -> np.ndarray:
    """Hessian of f with respect to mu_it; symmetric by construction."""
    _check_site(net, state, i, t)
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    diff, s, s1 = _site_terms(state.mu[:, t - 1, :], M, c0, i)
    H = 8.0 * M @ (diff.T @ (s1[:, None] * diff)) @ M - 4.0 * float(s.sum()) * M
    return 0.5 * (H + H.T)


def jac_f_sigma(net: DynamicNetwork, state: VariationalState) -> np.ndarray:
    """Matrix derivative of f with respect to sigma (symmetrized), including
    the log-determinant contribution of each summand."""
    M, s_sum, _, outer = _f_scan(net, state, want_outer=True)
    J = 4.0 * M @ outer @ M - 2.0 * s_sum * M
    return 0.5 * (J + J.T)


def f_derivs_xi(net: DynamicNetwork, state: VariationalState) -> tuple[float, float]:
    """(f', f'') with respect to xi_tilde: sums of s and s(1-s) over pairs."""
    _, s_sum, s1_sum, _ = _f_scan(net, state)
    return s_sum, s1_sum


def f_deriv_psi2(net: DynamicNetwork, state: VariationalState) -> float:
    """df/d(psi2_tilde) = f'(xi_tilde)/2 through the xi_tilde + psi2_tilde/2
    dependence."""
    return 0.5 * f_derivs_xi(net, state)[0]


def _check_site(net, state, i, t):
    n, T, _ = state.shape
    if (n, T) != (net.n, net.T):
        raise ValueError("state shape does not match network")
    if not 0 <= i < n:
        raise ValueError(f"node index {i} out of range [0,{n})")
    if not 1 <= t <= T:
        raise ValueError(f"snapshot index {t} out of range [1,{T}]")


# ---------------------------------------------------------------------------
# coordinate updates
# ---------------------------------------------------------------------------

def _floor_spd(sigma: np.ndarray, floor: float = VAR_FLOOR) -> np.ndarray:
    sigma = 0.5 * (sigma + sigma.T)
    w, V = np.linalg.eigh(sigma)
    out = (V * np.maximum(w, floor)) @ V.T
    return 0.5 * (out + out.T)


def update_sigma(
    net: DynamicNetwork, state: VariationalState, hyper: Hyperparameters
) -> np.ndarray:
    """Shared-covariance update: (nT/2) [ c I + J(sigma) ]^{-1} with
    c = n/(2 sigma2) + n(T-1)/tau2 + 2 * (total ordered edges); the result is
    symmetrized and eigenvalue-floored."""
    state.validate(min_eig=0.0)
    n, T, d = state.shape
    J = jac_f_sigma(net, state)
    c = n / (2.0 * hyper.sigma2) + n * (T - 1) / hyper.tau2 + 2.0 * net.edge_count
    A = c * np.eye(d) + J
    try:
        new = (n * T / 2.0) * np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalDivergenceError("singular bracket matrix in sigma update") from exc
    if not np.all(np.isfinite(new)):
        raise NumericalDivergenceError("non-finite sigma update")
    return _floor_spd(new)


def _chain_coeffs(mu_i, t0, T, sigma2, tau2, d):
    """Time-chain precision and neighbor pull for node trajectory mu_i at
    0-based snapshot t0; boundary forms for t=1, t=T and T=1."""
    if T == 1:
        return 1.0 / sigma2, np.zeros(d)
    if t0 == 0:
        return 1.0 / sigma2 + 1.0 / tau2, mu_i[1] / tau2
    if t0 == T - 1:
        return 1.0 / tau2, mu_i[T - 2] / tau2
    return 2.0 / tau2, (mu_i[t0 - 1] + mu_i[t0 + 1]) / tau2


def _solve_small(A, b):
    if A.shape[0] == 2:
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if det == 0.0 or not np.isfinite(det):
            raise np.linalg.LinAlgError("singular 2x2 system")
        return np.array(
            [
                (A[1, 1] * b[0] - A[0, 1] * b[1]) / det,
                (A[0, 0] * b[1] - A[1, 0] * b[0]) / det,
            ]
        )
    return np.linalg.solve(A, b)


def _mu_site_update(mu, W_t, i, t0, M, c0, sigma2, tau2, damping):
    n, T, d = mu.shape
    mu_t = mu[:, t0, :]
    diff, s, s1 = _site_terms(mu_t, M, c0, i)
    G = -4.0 * (M @ (s @ diff))
    H = 8.0 * M @ ((diff * s1[:, None]).T @ diff) @ M - (4.0 * float(s.sum())) * M
    H = 0.5 * (H + H.T)
    w = 2.0 * W_t[i]
    c_chain, b_chain = _chain_coeffs(mu[i], t0, T, sigma2, tau2, d)
    A = H + (c_chain + float(w.sum())) * np.eye(d)
    rhs = w @ mu_t + b_chain + H @ mu_t[i] - G
    new = _solve_small(A, rhs)
    if damping < 1.0:
        new = damping * new + (1.0 - damping) * mu_t[i]
    return new


def update_mu(
    net: DynamicNetwork,
    state: VariationalState,
    hyper: Hyperparameters,
    i: int,
    t: int,
    damping: float = 1.0,
) -> np.ndarray:
    """Newton-style update of a single mean mu_it (t in 1..T); does not
    modify ``state``.  Raises NumericalDivergenceError on a singular system."""
    _check_site(net, state, i, t)
    state.validate(min_eig=0.0)
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    Y = net.adjacency(t)
    W_t = Y + Y.T
    try:
        return _mu_site_update(
            state.mu, W_t, i, t - 1, M, c0, hyper.sigma2, hyper.tau2, damping
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalDivergenceError(
            f"singular system in mu update at (i={i}, t={t})"
        ) from exc


def update_xi(
    net: DynamicNetwork, state: VariationalState, hyper: Hyperparameters
) -> float:
    """Newton step for xi_tilde; alpha scales the prior-precision weight.
    Falls back to bisection of the 1-D stationarity condition if the Newton
    denominator is not positive (cannot occur for valid states, kept as a
    hard guard)."""
    state.validate(min_eig=0.0)
    f1, f2 = f_derivs_xi(net, state)
    a_psi2 = hyper.alpha * hyper.psi2
    denom = 1.0 + a_psi2 * f2
    if denom <= 0:
        return _xi_stationary_bisection(net, state, hyper)
    s_y = float(net.edge_count)
    return (hyper.xi + a_psi2 * (s_y + f2 * state.xi_tilde - f1)) / denom


def _xi_stationary_bisection(net, state, hyper, tol=1e-12, max_iter=200):
    """Solve (x - xi)/(alpha psi2) - E_Y + f'(x) = 0; f' is increasing in x so
    the stationarity condition has a unique root."""
    s_y = float(net.edge_count)
    a_psi2 = hyper.alpha * hyper.psi2

    def g(x):
        shifted = replace_xi(state, x)
        return (x - hyper.xi) / a_psi2 - s_y + f_derivs_xi(net, shifted)[0]

    lo = hi = state.xi_tilde
    step = 1.0
    while g(lo) > 0:
        lo -= step
        step *= 2.0
        if step > 1e8:
            raise NumericalDivergenceError("xi bisection failed to bracket")
    step = 1.0
    while g(hi) < 0:
        hi += step
        step *= 2.0
        if step > 1e8:
            raise NumericalDivergenceError("xi bisection failed to bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def replace_xi(state: VariationalState, xi_tilde: float) -> VariationalState:
    """State sharing arrays with ``state`` but a different xi_tilde."""
    return VariationalState(state.mu, state.sigma, float(xi_tilde), state.psi2_tilde)


def update_psi2(
    net: DynamicNetwork, state: VariationalState, hyper: Hyperparameters
) -> float:
    """psi2_tilde <- 1 / (1/psi2 + 2 alpha df/dpsi2_tilde), floored."""
    state.validate(min_eig=0.0)
    fp = f_deriv_psi2(net, state)
    return max(1.0 / (1.0 / hyper.psi2 + 2.0 * hyper.alpha * fp), VAR_FLOOR)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def init_random(
    n: int, T: int, d: int, seed: int = 0, scale: float = 1.0, psi2: float = 1.0
) -> VariationalState:
    """Means i.i.d. N(0, scale^2), sigma = I, xi_tilde = 0, psi2_tilde = psi2."""
    rng = np.random.default_rng(seed)
    mu = scale * rng.standard_normal((n, T, d))
    return VariationalState(mu, np.eye(d), 0.0, float(psi2))


def init_mds(net: DynamicNetwork, d: int, psi2: float = 1.0) -> VariationalState:
    """Classical MDS on shortest-path distances of the time-aggregated,
    symmetrized graph; the same coordinates are copied across snapshots.
    Connected components are embedded separately and offset on a grid.
    """
    n = net.n
    agg = np.zeros((n, n), dtype=np.int8)
    for t in range(net.T):
        Y = net.adjacency(t + 1)
        np.maximum(agg, Y, out=agg)
    agg = np.maximum(agg, agg.T)
    if agg.sum() == 0:
        raise ValueError("MDS init requires at least one edge")
    n_comp, labels = connected_components(csr_matrix(agg), directed=False)
    coords = np.zeros((n, d))
    radii = np.zeros(n_comp)
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        if members.size == 1:
            continue
        sub = csr_matrix(agg[np.ix_(members, members)])
        D = shortest_path(sub, method="D", directed=False, unweighted=True)
        coords[members] = _classical_mds(D, d)
        radii[c] = float(np.max(np.linalg.norm(coords[members], axis=1)))
    if n_comp > 1:
        spacing = 2.0 * max(float(radii.max()), 0.5) + 1.0
        side = math.ceil(math.sqrt(n_comp))
        for c in range(n_comp):
            offset = np.zeros(d)
            offset[0] = spacing * (c % side)
            if d > 1:
                offset[1] = spacing * (c // side)
            coords[labels == c] += offset
    mu = np.repeat(coords[:, None, :], net.T, axis=1)
    return VariationalState(mu, np.eye(d), 0.0, float(psi2))


def _classical_mds(D: np.ndarray, d: int) -> np.ndarray:
    m = D.shape[0]
    D2 = D * D
    J = np.eye(m) - np.ones((m, m)) / m
    B = -0.5 * J @ D2 @ J
    w, V = np.linalg.eigh(B)
    order = np.argsort(w)[::-1][:d]
    lam = np.maximum(w[order], 0.0)
    return V[:, order] * np.sqrt(lam)


# ---------------------------------------------------------------------------
# the fit loop
# ---------------------------------------------------------------------------

def _sweep(net, state, hyper, W, damping):
    """One full coordinate sweep, mutating ``state`` in place."""
    n, T, d = state.shape
    state.sigma = update_sigma(net, state, hyper)
    M, logdet = _prep(state.sigma)
    c0 = state.xi_tilde + 0.5 * state.psi2_tilde - 0.5 * logdet
    for t0 in range(T):
        for i in range(n):
            state.mu[i, t0, :] = _mu_site_update(
                state.mu, W[t0], i, t0, M, c0, hyper.sigma2, hyper.tau2, damping
            )
    state.xi_tilde = update_xi(net, state, hyper)
    state.psi2_tilde = update_psi2(net, state, hyper)


def fit(
    net: DynamicNetwork, hyper: Hyperparameters, opts: FitOptions = FitOptions()
) -> FitResult:
    """Run coordinate sweeps until the relative objective change drops below
    ``opts.rel_tol`` or ``opts.max_iters`` sweeps have run.

    Safeguards: a sweep that raises the objective by more than 10% of its
    magnitude (or hits a singular mu system) is rolled back and repeated once
    with the damping halved; the halved damping persists.  A non-finite
    objective aborts with the last finite state and ``diverged`` set.
    """
    if net.n < 2:
        raise ValueError("fit requires at least two nodes")
    from .metrics import in_sample_auc  # local import, avoids module cycle

    if isinstance(opts.init, VariationalState):
        state = opts.init.copy()
        if state.shape[:2] != (net.n, net.T):
            raise ValueError("explicit init state does not match network shape")
    elif opts.init == "mds":
        state = init_mds(net, hyper.d, psi2=hyper.psi2)
    else:
        state = init_random(
            net.n, net.T, hyper.d, seed=opts.seed, scale=opts.init_scale, psi2=hyper.psi2
        )
    state.validate(min_eig=0.0)

    W = [net.adjacency(t + 1) + net.adjacency(t + 1).T for t in range(net.T)]

    def result(trace, iters, converged, diverged):
        auc = in_sample_auc(net, state.mu, state.xi_tilde)
        return FitResult(
            state=state,
            objective_trace=trace,
            iterations=iters,
            converged=converged,
            auc_per_time=auc,
            diverged=diverged,
            hyper=hyper,
            options=opts,
        )

    with np.errstate(over="ignore", invalid="ignore"):
        obj = surrogate_objective(net, state, hyper)
    if not np.isfinite(obj):
        return result([obj], 0, False, True)
    trace = [obj]
    damping = opts.damping
    converged = False
    diverged = False
    for _ in range(opts.max_iters):
        backup = state.copy()
        prev = trace[-1]
        retried = False
        while True:
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    _sweep(net, state, hyper, W, damping)
                    obj = surrogate_objective(net, state, hyper)
                bad = not np.isfinite(obj)
            except NumericalDivergenceError:
                obj = np.nan
                bad = True
            jumped = (not bad) and obj > prev + 0.1 * abs(prev)
            if (bad or jumped) and not retried:
                state = backup.copy()
                damping = 0.5 * damping
                retried = True
                continue
            break
        if bad:
            state = backup
            diverged = True
            break
        trace.append(obj)
        if abs(obj - prev) / max(abs(prev), 1e-300) < opts.rel_tol:
            converged = True
            break
    return result(trace, len(trace) - 1, converged, diverged)
