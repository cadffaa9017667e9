"""Command-line surface: simulate, fit, predict, diagnose, score.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, posterior, scoring
from .partition import LogZTable, build_table
from .perms import METRICS, ranking_of
from .sampler import Priors, SampleLog, Tuning, run_chain
from .simulate import SimConfig, generate_dataset


class ConfigError(ValueError):
    pass


def _add_common_fit_flags(p):
    p.add_argument("--model", choices=["bm", "lm"], default="bm")
    p.add_argument("--metric", choices=list(METRICS), default="footrule")
    p.add_argument("--clusters", default="1", help="G, or a range like 1-5")
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=20_000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l-star", type=int, default=3)
    p.add_argument("--l-star-r", type=int, default=1)
    p.add_argument("--sigma-alpha", type=float, default=0.15)
    p.add_argument("--sigma-beta", type=float, default=0.5)
    p.add_argument("--chi", type=float, default=20.0)
    p.add_argument("--kappa1", type=float, default=1.0)
    p.add_argument("--kappa2", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lambda", dest="lambda_rate", type=float, default=0.1)
    p.add_argument("--logz-cache", type=Path, default=None)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--n-items", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mallowspair",
        description=(
            "Bayesian inference of consensus and individual rankings from "
            "sparse, possibly non-transitive pairwise comparison data."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic preference data")
    p.add_argument("--n-items", type=int, required=True)
    p.add_argument("--assessors", type=int, required=True)
    p.add_argument("--lambda-pairs", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--clusters", type=int, default=1)
    p.add_argument("--metric", choices=list(METRICS), default="footrule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-pairs", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("fit", help="run the sampler on a preference CSV")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common_fit_flags(p)

    p = sub.add_parser("predict", help="pair-order probabilities from samples")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--pairs", type=Path, required=True,
                   help="CSV: assessor,item_a,item_b (1-based items)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("diagnose", help="trace export and IAT report")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("score", help="simulation metrics against a truth file")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _parse_cluster_spec(spec: str) -> list[int]:
    spec = spec.strip()
    for sep in ("-", "..", ":"):
        if sep in spec:
            lo, hi = spec.split(sep, 1)
            values = list(range(int(lo), int(hi) + 1))
            if not values:
                raise ConfigError(f"empty cluster range {spec!r}")
            return values
    return [int(spec)]


def _get_logz(metric: str, n: int, cache_path: Path | None) -> LogZTable:
    if cache_path is not None and cache_path.exists():
        table = LogZTable.load(cache_path)
        if table.metric == metric and table.n == n:
            return table
    table = build_table(metric, n)
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        table.save(cache_path)
    return table


def _run_one(args_tuple):
    dataset, model, G, priors, tuning, metric, logz = args_tuple
    return run_chain(
        dataset,
        model=model,
        n_clusters=G,
        priors=priors,
        tuning=tuning,
        metric=metric,
        logz=logz,
    )


def cmd_simulate(args) -> int:
    if (args.theta is None) == (args.beta0 is None):
        raise ConfigError("give exactly one of --theta or --beta0/--beta1")
    beta_true = None
    if args.beta0 is not None:
        if args.beta1 is None:
            raise ConfigError("--beta1 required with --beta0")
        beta_true = (args.beta0, args.beta1)
    rng = np.random.default_rng(args.seed)
    rho_true = None
    if args.clusters > 1:
        rho_true = np.array(
            [rng.permutation(args.n_items) + 1 for _ in range(args.clusters)]
        )
    cfg = SimConfig(
        n_items=args.n_items,
        n_assessors=args.assessors,
        lambda_pairs=args.lambda_pairs,
        alpha_true=args.alpha,
        theta_true=args.theta,
        beta_true=beta_true,
        rho_true=rho_true,
        metric=args.metric,
        seed=args.seed,
        fixed_pairs=args.fixed_pairs,
    )
    dataset, truth = generate_dataset(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    info = {"command": "simulate", "seed": args.seed}
    io.write_preferences(dataset, args.out / "preferences.csv", info)
    io.write_truth(truth, args.out / "truth.json")
    print(f"wrote {args.out / 'preferences.csv'} and truth sidecar")
    return 0


def _report_lines(summary, G: int, model: str) -> list[str]:
    lines = []
    for g in range(G):
        lines.append(f"== cluster {g + 1} ==")
        cp = summary.cp_orderings[g]
        lines.append(
            "CP ordering (best to worst): "
            + " ".join(f"S{i + 1}" for i in cp.tolist())
        )
        a = summary.alpha[g]
        lines.append(
            f"alpha: mean={a.mean:.3f} MAP={a.map_estimate:.3f} "
            f"95% HPD=({a.hpd_low:.3f},{a.hpd_high:.3f})"
        )
        w = summary.weight[g]
        lines.append(
            f"eta:   mean={w.mean:.3f} MAP={w.map_estimate:.3f} "
            f"95% HPD=({w.hpd_low:.3f},{w.hpd_high:.3f})"
        )
    if summary.theta is not None:
        t = summary.theta
        lines.append(
            f"theta: mean={t.mean:.4f} MAP={t.map_estimate:.4f} "
            f"95% HPD=({t.hpd_low:.4f},{t.hpd_high:.4f})"
        )
    if summary.beta0 is not None:
        for name, s in (("beta0", summary.beta0), ("beta1", summary.beta1)):
            lines.append(
                f"{name}: mean={s.mean:.4f} MAP={s.map_estimate:.4f} "
                f"95% HPD=({s.hpd_low:.4f},{s.hpd_high:.4f})"
            )
    return lines


def cmd_fit(args) -> int:
    dataset = io.parse_preferences(args.data, n_items=args.n_items)
    summary = io.transitivity_summary(dataset)
    print(
        f"{summary['n_non_transitive']} of {summary['n_assessors']} assessors "
        "reported non-transitive preferences"
    )
    model = args.model.upper()
    gs = _parse_cluster_spec(args.clusters)
    if model == "LM" and max(gs) > 1:
        raise ConfigError("mixture fitting is only available for the BM model")
    cache = args.logz_cache
    if cache is None:
        cache = io.default_cache_dir() / f"logz_{args.metric}_{dataset.n_items}.txt"
    logz = _get_logz(args.metric, dataset.n_items, cache)
    priors = Priors(
        gamma_shape=args.gamma,
        gamma_rate=args.lambda_rate,
        kappa1=args.kappa1,
        kappa2=args.kappa2,
        chi=args.chi,
    )
    config_info = {
        "command": "fit",
        "model": model,
        "metric": args.metric,
        "clusters": args.clusters,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "seed": args.seed,
        "l_star": args.l_star,
        "l_star_r": args.l_star_r,
        "sigma_alpha": args.sigma_alpha,
        "chi": args.chi,
        "kappa1": args.kappa1,
        "kappa2": args.kappa2,
        "gamma": args.gamma,
        "lambda": args.lambda_rate,
        "chains": args.chains,
    }
    args.out.mkdir(parents=True, exist_ok=True)
    runs: dict[int, SampleLog] = {}
    for G in gs:
        chain_logs = []
        jobs = []
        for c in range(args.chains):
            tuning = Tuning(
                l_star=args.l_star,
                l_star_r=args.l_star_r,
                sigma_alpha=args.sigma_alpha,
                sigma_beta=args.sigma_beta,
                n_iterations=args.iterations,
                burn_in=args.burn_in,
                thinning=args.thin,
                seed=args.seed + c,
            )
            jobs.append((dataset, model, G, priors, tuning, args.metric, logz))
        if args.chains > 1:
            with ProcessPoolExecutor(max_workers=args.chains) as pool:
                chain_logs = list(pool.map(_run_one, jobs))
        else:
            chain_logs = [_run_one(jobs[0])]
        for c, samples in enumerate(chain_logs):
            if G >= 2:
                samples = posterior.relabel(samples)
                chain_logs[c] = samples
            sub = args.out / (f"samples_G{G}" if len(gs) > 1 else "samples")
            if args.chains > 1:
                sub = sub / f"chain{c}"
            io.save_samples(samples, sub, {**config_info, "G": G, "chain": c})
        samples = chain_logs[0]
        runs[G] = samples
        summ = posterior.summarize(samples)
        report = _report_lines(summ, G, model)
        name = f"summary_G{G}.txt" if len(gs) > 1 else "summary.txt"
        (args.out / name).write_text("\n".join(report) + "\n")
        print(f"G={G}: wrote {name}")
    if len(gs) > 1:
        diag = posterior.cluster_fit_curves(runs, dataset)
        with open(args.out / "cluster_fit.csv", "w") as fh:
            fh.write("# config: " + json.dumps(config_info, sort_keys=True) + "\n")
            fh.write("G,sample,within_distance,within_misfit\n")
            for G in diag.candidates:
                for t, (d, m) in enumerate(
                    zip(diag.distance_samples[G], diag.misfit_samples[G])
                ):
                    fh.write(f"{G},{t},{d:.6f},{int(m)}\n")
        print("wrote cluster_fit.csv")
    return 0


def cmd_predict(args) -> int:
    samples = io.load_samples(args.samples)
    rows = []
    with open(args.pairs) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("assessor"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise io.DataError(f"{args.pairs}:{lineno}: expected 3 fields")
            rows.append(tuple(int(v) for v in parts))
    N = samples.latent.shape[1]
    with open(args.out, "w") as fh:
        fh.write("assessor,item_a,item_b,prob_a_preferred\n")
        for assessor, a, b in rows:
            if not 0 <= assessor < N:
                raise io.DataError(f"assessor {assessor} out of range")
            p = posterior.predict_pair(samples.latent[:, assessor, :], a - 1, b - 1)
            fh.write(f"{assessor},{a},{b},{p:.6f}\n")
    print(f"wrote {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    samples = io.load_samples(args.samples)
    stats = posterior.convergence_stats(samples)
    with open(args.out, "w") as fh:
        fh.write("parameter,iat\n")
        for k, v in stats.items():
            fh.write(f"{k},{v:.4f}\n")
    print(f"wrote {args.out}")
    return 0


def cmd_score(args) -> int:
    samples = io.load_samples(args.samples)
    truth = io.read_truth(args.truth)
    dataset = io.parse_preferences(args.data, n_items=samples.n_items)
    report = scoring.score(samples, truth, dataset)
    df = report.consensus_df_samples
    with open(args.out, "w") as fh:
        fh.write(
            json.dumps(
                {
                    "consensus_df_mean": float(df.mean()),
                    "consensus_df_median": float(np.median(df)),
                    "cp_df": report.cp_df,
                    "top3_in_top5_pct": report.top3_in_top5_pct,
                    "prediction_mean": report.prediction_mean,
                    "prediction_by_pairs": report.prediction_by_pairs,
                    "prediction_by_distance": report.prediction_by_distance,
                },
                indent=1,
            )
        )
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "predict": cmd_predict,
        "diagnose": cmd_diagnose,
        "score": cmd_score,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except io.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, OverflowError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
