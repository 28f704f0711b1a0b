"""File formats: temporal edge lists, fit results, latent configurations.

Edge lists are UTF-8 text.  Lines starting with '#' are comments; the first
non-comment line is the header ``n=<int> T=<int> directed=<true|false>``;
every following line is ``t src dst`` with t in 1..T and 0-indexed nodes.
Undirected networks store each unordered edge exactly once with src < dst.

Result files are JSON with every float rendered at 17 significant digits, so
writing is byte-deterministic and read(write(x)) is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DynamicNetwork, Hyperparameters, LatentConfiguration
from .vb import FitOptions, FitResult, VariationalState

__all__ = [
    "read_temporal_edgelist",
    "write_temporal_edgelist",
    "write_fit_result",
    "read_fit_result",
    "write_mcmc_result",
    "read_mcmc_result",
    "read_positions_estimate",
    "write_latent_configuration",
    "read_latent_configuration",
    "RunConfig",
]

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------

def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "null"
        if math.isinf(v):
            raise ValueError("cannot serialize infinity")
        return format(v, ".17g")
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(k)}: {_render(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _dump_json(doc: dict, path) -> None:
    Path(path).write_text(_render(doc) + "\n", encoding="utf-8")


def _load_json(path, kind: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(
            f"{kind} file {path}: unsupported version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    return doc


# ---------------------------------------------------------------------------
# temporal edge lists
# ---------------------------------------------------------------------------

def read_temporal_edgelist(path) -> DynamicNetwork:
    """Parse and validate a temporal edge-list file; every error message
    carries the offending line number."""
    n = T = None
    directed = True
    snapshots: list[set] = []
    seen_header = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not seen_header:
                n, T, directed = _parse_header(line, lineno, path)
                snapshots = [set() for _ in range(T)]
                seen_header = True
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(
                    f"{path}: line {lineno}: expected 't src dst', got {line!r}"
                )
            try:
                t, src, dst = (int(p) for p in parts)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer field") from None
            if not 1 <= t <= T:
                raise ValueError(
                    f"{path}: line {lineno}: snapshot {t} out of range [1,{T}]"
                )
            if src == dst:
                raise ValueError(f"{path}: line {lineno}: self-loop ({src},{dst})")
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(
                    f"{path}: line {lineno}: node index out of range [0,{n})"
                )
            if not directed and src > dst:
                raise ValueError(
                    f"{path}: line {lineno}: undirected edges must satisfy src < dst"
                )
            if (src, dst) in snapshots[t - 1]:
                raise ValueError(
                    f"{path}: line {lineno}: duplicate edge ({src},{dst}) at t={t}"
                )
            snapshots[t - 1].add((src, dst))
    if not seen_header:
        raise ValueError(f"{path}: missing header line")
    return DynamicNetwork.from_snapshots(n, snapshots, directed=directed)


def _parse_header(line: str, lineno: int, path) -> tuple[int, int, bool]:
    fields = {}
    for token in line.split():
        if "=" not in token:
            raise ValueError(f"{path}: line {lineno}: malformed header token {token!r}")
        key, _, value = token.partition("=")
        fields[key] = value
    try:
        n = int(fields["n"])
        T = int(fields["T"])
        directed_str = fields["directed"].lower()
    except KeyError as exc:
        raise ValueError(f"{path}: line {lineno}: header missing {exc}") from None
    except ValueError:
        raise ValueError(f"{path}: line {lineno}: non-integer header field") from None
    if directed_str not in ("true", "false"):
        raise ValueError(f"{path}: line {lineno}: directed must be true or false")
    if n < 1 or T < 1:
        raise ValueError(f"{path}: line {lineno}: n and T must be positive")
    return n, T, directed_str == "true"


def write_temporal_edgelist(net: DynamicNetwork, path) -> None:
    """Canonical serialization: header, then edges sorted by (t, src, dst);
    undirected networks emit each unordered edge once (src < dst)."""
    lines = [f"n={net.n} T={net.T} directed={'true' if net.directed else 'false'}"]
    for t, es in enumerate(net.edges, start=1):
        if net.directed:
            rows = sorted(es)
        else:
            rows = sorted({(min(i, j), max(i, j)) for (i, j) in es})
        lines.extend(f"{t} {i} {j}" for i, j in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# fit results
# ---------------------------------------------------------------------------

def write_fit_result(result: FitResult, path) -> None:
    hyper = result.hyper or Hyperparameters()
    opts = result.options or FitOptions()
    init = opts.init if isinstance(opts.init, str) else "explicit"
    doc = {
        "version": FORMAT_VERSION,
        "hyper": {
            "d": hyper.d,
            "sigma2": hyper.sigma2,
            "tau2": hyper.tau2,
            "xi": hyper.xi,
            "psi2": hyper.psi2,
            "alpha": hyper.alpha,
        },
        "options": {
            "max_iters": opts.max_iters,
            "rel_tol": opts.rel_tol,
            "damping": opts.damping,
            "init": init,
            "seed": opts.seed,
            "init_scale": opts.init_scale,
        },
        "xi_tilde": result.state.xi_tilde,
        "psi2_tilde": result.state.psi2_tilde,
        "sigma": result.state.sigma,
        "mu": result.state.mu,
        "objective_trace": list(result.objective_trace),
        "iterations": result.iterations,
        "converged": result.converged,
        "diverged": result.diverged,
        "auc_per_time": list(result.auc_per_time),
    }
    _dump_json(doc, path)


def read_fit_result(path) -> FitResult:
    doc = _load_json(path, "fit result")
    hyper = Hyperparameters(**doc["hyper"])
    opts = FitOptions(**doc["options"])
    state = VariationalState(
        mu=np.array(doc["mu"], dtype=np.float64),
        sigma=np.array(doc["sigma"], dtype=np.float64),
        xi_tilde=float(doc["xi_tilde"]),
        psi2_tilde=float(doc["psi2_tilde"]),
    )
    auc = np.array(
        [math.nan if v is None else float(v) for v in doc["auc_per_time"]]
    )
    return FitResult(
        state=state,
        objective_trace=[float(v) for v in doc["objective_trace"]],
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        auc_per_time=auc,
        diverged=bool(doc.get("diverged", False)),
        hyper=hyper,
        options=opts,
    )


# ---------------------------------------------------------------------------
# sampler results
# ---------------------------------------------------------------------------

def write_mcmc_result(result, path) -> None:
    """Posterior summary of a sampler run: means, intercept variance,
    acceptance rates, in-sample AUC."""
    doc = {
        "version": FORMAT_VERSION,
        "method": "mcmc",
        "beta_mean": result.beta_mean,
        "beta_variance": float(np.var(result.beta_draws)) if result.beta_draws.size else 0.0,
        "positions": result.positions_mean,
        "acceptance": {
            "latent_rate": result.acceptance.latent_rate,
            "beta_rate": result.acceptance.beta_rate,
            "swap_attempts": result.acceptance.swap_attempts,
            "swap_accepts": result.acceptance.swap_accepts,
        },
        "auc_per_time": list(result.auc_per_time),
        "n_retained": result.n_retained,
    }
    _dump_json(doc, path)


def read_mcmc_result(path) -> dict:
    doc = _load_json(path, "sampler result")
    doc["positions"] = np.array(doc["positions"], dtype=np.float64)
    doc["auc_per_time"] = np.array(
        [math.nan if v is None else float(v) for v in doc["auc_per_time"]]
    )
    return doc


def read_positions_estimate(path) -> tuple[np.ndarray, float]:
    """Plug-in point estimates (positions, intercept) from either a fit
    result or a sampler result file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("method") == "mcmc":
        return np.array(doc["positions"], dtype=np.float64), float(doc["beta_mean"])
    result = read_fit_result(path)
    return result.state.mu, result.state.xi_tilde


# ---------------------------------------------------------------------------
# latent configurations (simulation ground truth)
# ---------------------------------------------------------------------------

def write_latent_configuration(latent: LatentConfiguration, path) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "beta": latent.beta,
        "positions": latent.positions,
    }
    _dump_json(doc, path)


def read_latent_configuration(path) -> LatentConfiguration:
    doc = _load_json(path, "latent configuration")
    return LatentConfiguration(
        positions=np.array(doc["positions"], dtype=np.float64),
        beta=float(doc["beta"]),
    )


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """What to run: exactly one of a named design or an input file, plus the
    hyperparameters, method options and output directory."""

    output_dir: str
    design: str | None = None
    input_path: str | None = None
    hyper: Hyperparameters = Hyperparameters()
    fit_options: FitOptions = FitOptions()
    mcmc_options: "McmcOptions | None" = None

    def __post_init__(self):
        if (self.design is None) == (self.input_path is None):
            raise ValueError("exactly one of design / input_path must be set")
