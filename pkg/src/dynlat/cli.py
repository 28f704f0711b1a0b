"""Command-line surface: simulate, fit, eval, report, experiment.

Exit codes: 0 success, 2 validation error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as dio
from .mcmc import McmcOptions, run_mcmc
from .metrics import distance_ratio_stats, in_sample_auc, movement_stats
from .model import Hyperparameters
from .simulate import (
    MixtureComponent,
    MixtureInit,
    SimDesign,
    preset_designs,
    sample_network,
)
from .vb import FitOptions, NumericalDivergenceError, fit

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _design_from_file(path) -> SimDesign:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        components = tuple(
            MixtureComponent(float(c["weight"]), tuple(map(float, c["mean"])), float(c["var"]))
            for c in doc["init"]["components"]
        )
        return SimDesign(
            n=int(doc["n"]),
            T=int(doc["T"]),
            d=int(doc["d"]),
            beta=float(doc["beta"]),
            init=MixtureInit(components),
            tau2=float(doc["tau2"]),
            directed=bool(doc.get("directed", True)),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"design file {path}: missing field {exc}") from None


def cmd_simulate(args) -> int:
    if (args.preset is None) == (args.design is None):
        print("simulate: exactly one of --preset / --design is required", file=sys.stderr)
        return EXIT_VALIDATION
    if args.preset is not None:
        catalog = preset_designs()
        if args.preset not in catalog:
            known = "\n  ".join(sorted(catalog))
            print(
                f"unknown preset {args.preset!r}; available presets:\n  {known}",
                file=sys.stderr,
            )
            return EXIT_VALIDATION
        design = catalog[args.preset]
    else:
        design = _design_from_file(args.design)
    if args.seed is not None:
        design = replace(design, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net, truth = sample_network(design)
    dio.write_temporal_edgelist(net, out / "network.tsv")
    dio.write_latent_configuration(truth, out / "truth.json")
    print(f"wrote {out / 'network.tsv'} ({net.edge_count} edges) and {out / 'truth.json'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    net = dio.read_temporal_edgelist(args.input)
    hyper = Hyperparameters(
        d=args.d,
        sigma2=args.sigma2,
        tau2=args.tau2,
        xi=args.prior_xi,
        psi2=args.prior_psi2,
        alpha=args.alpha,
    )
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    if args.method == "mcmc":
        opts = McmcOptions(seed=args.seed, init=args.init if args.init == "mds" else "prior")
        result = run_mcmc(net, hyper, opts)
        dio.write_mcmc_result(result, out)
        print(f"retained draws: {result.n_retained}")
        print(f"posterior mean intercept: {result.beta_mean:.6f}")
        print("AUC per snapshot:", " ".join(f"{a:.4f}" for a in result.auc_per_time))
        return EXIT_OK
    opts = FitOptions(
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        init=args.init,
        seed=args.seed,
    )
    result = fit(net, hyper, opts)
    dio.write_fit_result(result, out)
    if result.diverged:
        print(f"fit diverged; partial result saved to {out}", file=sys.stderr)
        return EXIT_DIVERGENCE
    status = "converged" if result.converged else "reached max-iters"
    print(f"{status} after {result.iterations} sweeps")
    print(f"final objective: {result.objective_trace[-1]:.6f}")
    print("AUC per snapshot:", " ".join(f"{a:.4f}" for a in result.auc_per_time))
    return EXIT_OK


def cmd_eval(args) -> int:
    net = dio.read_temporal_edgelist(args.input)
    positions, beta = dio.read_positions_estimate(args.fit)
    if positions.shape[:2] != (net.n, net.T):
        raise ValueError(
            f"estimate shape {positions.shape[:2]} does not match network "
            f"({net.n}, {net.T})"
        )
    aucs = in_sample_auc(net, positions, beta)
    print("t auc")
    for t, a in enumerate(aucs, start=1):
        print(f"{t} {a:.4f}")
    if args.truth:
        truth = dio.read_latent_configuration(args.truth)
        if truth.positions.shape != positions.shape:
            raise ValueError("truth shape does not match estimate")
        summary = distance_ratio_stats(positions, truth.positions)
        print(f"distance ratio median {summary.median:.4f} "
              f"quartiles [{summary.q1:.4f}, {summary.q3:.4f}]")
        err = beta - truth.beta
        print(f"intercept error {err:+.4f} (squared {err * err:.6f})")
    return EXIT_OK


def cmd_report(args) -> int:
    positions, beta = dio.read_positions_estimate(args.fit)
    n, T, d = positions.shape
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "positions.csv", "w", encoding="utf-8") as fh:
        fh.write("node,t," + ",".join(f"x{k + 1}" for k in range(d)) + "\n")
        for i in range(n):
            for t in range(T):
                coords = ",".join(f"{v:.8g}" for v in positions[i, t])
                fh.write(f"{i},{t + 1},{coords}\n")

    if T >= 2:
        moves = movement_stats(positions)
        cols = [f"sq_move_t{t}_to_t{t + 1}" for t in range(1, T)]
        with open(out / "movements.csv", "w", encoding="utf-8") as fh:
            fh.write("node," + ",".join(cols) + "\n")
            for i in range(n):
                vals = ",".join(f"{v:.8g}" for v in moves.squared_displacements[:, i])
                fh.write(f"{i},{vals}\n")

    if args.truth:
        truth = dio.read_latent_configuration(args.truth)
        summary = distance_ratio_stats(positions, truth.positions)
        with open(out / "ratios.csv", "w", encoding="utf-8") as fh:
            fh.write("ratio,density\n")
            for x, y in zip(summary.grid, summary.density):
                fh.write(f"{x:.8g},{y:.8g}\n")

    _scatter_plots(positions, out)
    print(f"report written to {out}")
    return EXIT_OK


def _scatter_plots(positions, out: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n, T, d = positions.shape
    for t in range(T):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(positions[:, t, 0], positions[:, t, 1 if d > 1 else 0], s=12)
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2" if d > 1 else "x1")
        ax.set_title(f"latent positions, t={t + 1}")
        fig.tight_layout()
        fig.savefig(out / f"positions_t{t + 1}.svg")
        plt.close(fig)


def cmd_experiment(args) -> int:
    from .experiments import run_experiment

    path = run_experiment(
        args.name,
        replicates=args.replicates,
        seed=args.seed,
        out_dir=args.out,
        large=args.large,
        parallel=args.parallel,
    )
    print(f"experiment table written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynlat",
        description="Dynamic latent space network models: simulation, "
        "variational and MCMC fits, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a synthetic dynamic network")
    p.add_argument("--preset", help="named design from the catalog")
    p.add_argument("--design", help="JSON design file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model to an edge-list file")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("vb", "mcmc"), default="vb")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--sigma2", type=float, default=0.5)
    p.add_argument("--tau2", type=float, default=0.1)
    p.add_argument("--prior-xi", type=float, default=0.0)
    p.add_argument("--prior-psi2", type=float, default=2.0)
    p.add_argument("--init", choices=("random", "mds"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", required=True, help="result file path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a saved fit against a network")
    p.add_argument("--fit", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="write CSV tables and scatter images")
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run a replicated experiment suite")
    p.add_argument("--name", required=True)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--large", action="store_true", help="include the largest cases")
    p.add_argument("--parallel", action="store_true", help="replicate-level parallelism")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalDivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
