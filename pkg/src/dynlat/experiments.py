"""Replicated experiment suites behind the ``experiment`` CLI command.

Every suite runs R seeded replicates and writes one aggregate CSV whose cells
carry the replicate mean and standard error.  Replicate seeds derive
deterministically from the base seed, so reruns are bit-identical; with
``parallel`` the replicates are farmed out to processes while each fit stays
serial.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .mcmc import McmcOptions, run_mcmc
from .metrics import beta_mse
from .simulate import preset_designs, preset_fit_hyperparameters, sample_network
from .vb import FitOptions, fit

__all__ = ["EXPERIMENTS", "run_experiment"]

# shortened chain for the sampler comparison; the paper-scale run
# (10k/90k) is not desk-sized
MCMC_COMPARE = McmcOptions(
    burn_in=5000,
    samples=20_000,
    thin=10,
    proposal_sd_latent=0.03,
    proposal_sd_beta=0.05,
    init="mds",
)


def _replicate_seed(base: int, case: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, case, rep]).generate_state(1)[0])


def _mean_se(values: np.ndarray, axis=0):
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean(axis=axis)
    if values.shape[0] < 2:
        se = np.zeros_like(mean)
    else:
        se = values.std(axis=axis, ddof=1) / np.sqrt(values.shape[0])
    return mean, se


def _fit_case(args):
    design_name, overrides, alpha, init, seed = args
    design = replace(preset_designs()[design_name], seed=seed, **overrides)
    hyper = preset_fit_hyperparameters(design_name)
    hyper = replace(hyper, alpha=alpha, tau2=design.tau2)
    net, truth = sample_network(design)
    opts = FitOptions(init=init, seed=seed)
    res = fit(net, hyper, opts)
    return res.auc_per_time, res.state.xi_tilde, truth.beta


def _map(tasks, fn, parallel):
    if parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _auc_columns(T):
    cols = []
    for t in range(1, T + 1):
        cols += [f"auc_t{t}_mean", f"auc_t{t}_se"]
    return cols


def _interleave(mean, se):
    out = []
    for m, s in zip(mean, se):
        out += [f"{m:.6f}", f"{s:.6f}"]
    return out


def _exp_alpha_sensitivity(replicates, seed, out_dir, large, parallel):
    alphas = (0.2, 0.5, 0.9, 1.0)
    rows = []
    T = preset_designs()["alpha-study"].T
    for a_idx, alpha in enumerate(alphas):
        tasks = [
            ("alpha-study", {}, alpha, "random", _replicate_seed(seed, 0, r))
            for r in range(replicates)
        ]
        results = _map(tasks, _fit_case, parallel)
        aucs = np.array([r[0] for r in results])
        mean, se = _mean_se(aucs)
        rows.append([f"{alpha}"] + _interleave(mean, se))
    path = Path(out_dir) / "alpha-sensitivity.csv"
    _write_csv(path, ["alpha"] + _auc_columns(T), rows)
    return path


def _exp_auc_n100(replicates, seed, out_dir, large, parallel):
    cases = [
        f"sim100-{density}-{trans}"
        for density in ("dense", "moderate", "sparse")
        for trans in ("small", "large")
    ]
    rows = []
    T = preset_designs()[cases[0]].T
    for c_idx, case in enumerate(cases):
        tasks = [
            (case, {}, 1.0, "random", _replicate_seed(seed, c_idx, r))
            for r in range(replicates)
        ]
        results = _map(tasks, _fit_case, parallel)
        aucs = np.array([r[0] for r in results])
        mean, se = _mean_se(aucs)
        rows.append([case] + _interleave(mean, se))
    path = Path(out_dir) / "auc-n100.csv"
    _write_csv(path, ["design"] + _auc_columns(T), rows)
    return path


def _exp_mse_vs_n(replicates, seed, out_dir, large, parallel):
    sizes = (100, 200, 400) + ((800,) if large else ())
    rows = []
    for c_idx, n in enumerate(sizes):
        tasks = [
            ("asym-n", {"n": n}, 1.0, "random", _replicate_seed(seed, c_idx, r))
            for r in range(replicates)
        ]
        results = _map(tasks, _fit_case, parallel)
        estimates = np.array([r[1] for r in results])
        beta_true = results[0][2]
        sq_err = (estimates - beta_true) ** 2
        mse = beta_mse(estimates, beta_true)
        _, se = _mean_se(sq_err)
        rows.append([n, f"{mse:.6f}", f"{float(se):.6f}"])
    path = Path(out_dir) / "mse-vs-n.csv"
    _write_csv(path, ["n", "mse", "se"], rows)
    return path


def _exp_auc_vs_T(replicates, seed, out_dir, large, parallel):
    horizons = (10, 20, 40) + ((80, 160, 320) if large else ())
    rows = []
    for c_idx, T in enumerate(horizons):
        tasks = [
            ("asym-T", {"T": T}, 1.0, "mds", _replicate_seed(seed, c_idx, r))
            for r in range(replicates)
        ]
        results = _map(tasks, _fit_case, parallel)
        mean_aucs = np.array([np.nanmean(r[0]) for r in results])
        mean, se = _mean_se(mean_aucs[:, None])
        rows.append([T, f"{float(mean[0]):.6f}", f"{float(se[0]):.6f}"])
    path = Path(out_dir) / "auc-vs-T.csv"
    _write_csv(path, ["T", "mean_auc", "se"], rows)
    return path


def _vb_mcmc_case(args):
    seed = args
    design = replace(preset_designs()["sim50-dense-small"], seed=seed)
    hyper = preset_fit_hyperparameters("sim50-dense-small")
    net, _ = sample_network(design)
    vb_res = fit(net, hyper, FitOptions(init="mds", seed=seed))
    mcmc_res = run_mcmc(net, hyper, replace(MCMC_COMPARE, seed=seed))
    return vb_res.auc_per_time, mcmc_res.auc_per_time


def _exp_vb_vs_mcmc(replicates, seed, out_dir, large, parallel):
    tasks = [_replicate_seed(seed, 0, r) for r in range(replicates)]
    results = _map(tasks, _vb_mcmc_case, parallel)
    T = results[0][0].size
    rows = []
    for label, idx in (("vb", 0), ("mcmc", 1)):
        aucs = np.array([r[idx] for r in results])
        mean, se = _mean_se(aucs)
        rows.append([label] + _interleave(mean, se))
    path = Path(out_dir) / "vb-vs-mcmc-n50.csv"
    _write_csv(path, ["method"] + _auc_columns(T), rows)
    return path


EXPERIMENTS = {
    "vb-vs-mcmc-n50": _exp_vb_vs_mcmc,
    "auc-n100": _exp_auc_n100,
    "alpha-sensitivity": _exp_alpha_sensitivity,
    "mse-vs-n": _exp_mse_vs_n,
    "auc-vs-T": _exp_auc_vs_T,
}


def run_experiment(
    name: str,
    replicates: int,
    seed: int,
    out_dir,
    large: bool = False,
    parallel: bool = False,
) -> Path:
    """Run a named suite; returns the path of the aggregate CSV."""
    if name not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ValueError(f"unknown experiment {name!r}; known: {known}")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return EXPERIMENTS[name](replicates, seed, out, large, parallel)
