"""Command-line harness: instance generation, chains, sweeps, fits, figures' data."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .harness import (
    PROPOSAL_ORDER,
    SweepSpec,
    derive_seed,
    fit_inverse_depth,
    fit_scaling,
    read_csv,
    run_m_sweep,
    run_magnetization,
    run_spectral_sweep,
    run_theta_study_vs_n,
    run_theta_study_vs_p,
    summarize_theta_study,
    win_fractions,
    write_csv,
    write_records,
    aggregate_means,
)
from .ising import BoltzmannTarget, generate_instance, load_instance, save_instance
from .mcmc import run_chain
from .theta_opt import (
    DegenerateLandscapeError,
    ThetaSearchConfig,
    find_theta_star,
    theta_max_for_depth,
)
from .proposals import LocalKernel, QaoaKernel, RandomThetaKernel, UniformKernel
from .statevector import QaoaParameters


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _m_list(text: str) -> tuple[int | None, ...]:
    out: list[int | None] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(None if tok.lower() in ("inf", "infinity") else int(tok))
    return tuple(out)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _merged(args: argparse.Namespace, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _sweep_spec(args: argparse.Namespace) -> SweepSpec:
    config = _load_config(args.config)
    sizes = _merged(args, config, "sizes", (3, 4, 5, 6, 7, 8))
    if isinstance(sizes, str):
        sizes = _int_list(sizes)
    proposals = _merged(args, config, "proposals", PROPOSAL_ORDER)
    if isinstance(proposals, str):
        proposals = tuple(tok.strip() for tok in proposals.split(",") if tok.strip())
    return SweepSpec(
        sizes=tuple(sizes),
        instances_per_size=int(_merged(args, config, "instances", 50)),
        temperature=float(_merged(args, config, "temperature", 0.1)),
        p=int(_merged(args, config, "p", 5)),
        theta_max=_merged(args, config, "theta_max", None),
        proposals=tuple(proposals),
        master_seed=int(_merged(args, config, "seed", 0)),
        grid_points=int(_merged(args, config, "grid_points", 64)),
    )


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    sub.add_argument("--out", type=Path, default=Path("."), help="output directory")
    sub.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sub.add_argument("--config", type=str, default=None, help="JSON file with sweep defaults")


def _add_sweep_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--sizes", type=str, default=None, help="comma-separated n values")
    sub.add_argument("--instances", type=int, default=None, help="instances per size")
    sub.add_argument("--temperature", type=float, default=None)
    sub.add_argument("--p", type=int, default=None, help="circuit depth")
    sub.add_argument("--theta-max", dest="theta_max", type=float, default=None)
    sub.add_argument("--proposals", type=str, default=None, help="comma-separated kernel kinds")
    sub.add_argument("--grid-points", dest="grid_points", type=int, default=None)


def _build_cli_kernel(args, instance):
    if args.proposal == "local":
        return LocalKernel(instance.n)
    if args.proposal == "uniform":
        return UniformKernel(instance.n)
    if args.proposal == "random":
        return RandomThetaKernel(instance, args.p, derive_seed(args.seed or 0, 2, instance.n, 0))
    if args.proposal == "qaoa":
        if args.theta is None:
            raise SystemExit("--proposal qaoa needs --theta")
        return QaoaKernel(instance, QaoaParameters.uniform(args.theta, args.p))
    raise SystemExit(f"unknown proposal {args.proposal!r}")


def cmd_gen_instance(args) -> int:
    seed = args.seed if args.seed is not None else 0
    instance = generate_instance(args.n, seed)
    out = args.file or (args.out / f"instance_n{args.n}_seed{seed}.json")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_instance(instance, out)
    print(out)
    return 0


def cmd_run_chain(args) -> int:
    if args.steps < 1:
        raise SystemExit("--steps must be at least 1")
    instance = load_instance(args.instance)
    target = BoltzmannTarget(instance, args.temperature)
    kernel = _build_cli_kernel(args, instance)
    master = args.seed if args.seed is not None else 0
    rows = []
    for chain_id in range(args.chains):
        seed = derive_seed(master, 4, instance.n, chain_id)
        init_rng = np.random.default_rng(derive_seed(master, 5, instance.n, chain_id))
        init = int(init_rng.integers(instance.num_states))
        trace = run_chain(target, kernel, args.steps, init=init, seed=seed)
        for t in range(len(trace)):
            rows.append(
                {
                    "step": t + 1,
                    "state_index": int(trace.states[t]),
                    "energy": float(trace.energies[t]),
                    "magnetization": float(trace.magnetizations[t]),
                    "acceptance_prob": float(trace.acceptance_probs[t]),
                    "accepted": bool(trace.accepted_flags[t]),
                    "chain_id": chain_id,
                    "seed": seed,
                }
            )
    out = args.out / "chain.csv"
    write_csv(
        out,
        rows,
        ["step", "state_index", "energy", "magnetization", "acceptance_prob", "accepted", "chain_id", "seed"],
        command=f"run-chain proposal={args.proposal} steps={args.steps} seed={master}",
    )
    print(out)
    return 0


def cmd_optimize_theta(args) -> int:
    instance = load_instance(args.instance)
    target = BoltzmannTarget(instance, args.temperature)
    config = ThetaSearchConfig(
        theta_max=args.theta_max if args.theta_max is not None else theta_max_for_depth(args.p),
        p=args.p,
        mode=args.mode,
        m=args.M,
        seed=args.seed if args.seed is not None else 0,
        grid_points=args.grid_points or 64,
        burn_in=args.burn_in,
    )
    try:
        result = find_theta_star(target, config)
        payload = {
            "theta_star": result.theta_star,
            "ar": result.ar_at_star,
            "evaluations": result.evaluations,
            "boundary": result.boundary,
        }
    except DegenerateLandscapeError as exc:
        payload = {"error": str(exc), "fallback_theta": config.theta_max / 2.0}
    print(json.dumps(payload))
    return 0


def cmd_spectral_sweep(args) -> int:
    spec = _sweep_spec(args)
    records = run_spectral_sweep(spec, workers=args.workers)
    out = args.out / "spectral_sweep.csv"
    write_records(out, records, command=f"spectral-sweep seed={spec.master_seed} spec={asdict(spec)}")
    if args.dump_matrices:
        _dump_sweep_matrices(spec, args.out / "matrices")
    print(out)
    return 0


def _dump_sweep_matrices(spec: SweepSpec, out_dir: Path) -> None:
    from .harness import dump_chain_matrices, instance_for, _build_kernel, _optimize_theta

    for n in spec.sizes:
        for idx in range(spec.instances_per_size):
            instance = instance_for(spec, n, idx)
            target = BoltzmannTarget(instance, spec.temperature)
            for proposal in spec.proposals:
                theta = None
                if proposal == "optimized":
                    _, theta, _ = _optimize_theta(target, spec)
                kernel = _build_kernel(proposal, instance, spec, idx, theta=theta)
                q = kernel.exact_matrix()
                dump_chain_matrices(out_dir, target, q, f"{proposal}_n{n}_i{idx}")


def cmd_fit_scaling(args) -> int:
    df = read_csv(args.infile)
    means = aggregate_means(df)
    fits = fit_scaling(df)
    means_rows = means.to_dict("records")
    write_csv(
        args.out / "scaling_means.csv",
        means_rows,
        ["proposal", "m", "n", "mean_delta", "std_delta", "count", "stderr_delta"],
        command=f"fit-scaling in={args.infile}",
    )
    fit_rows = [asdict(f) for f in fits]
    write_csv(
        args.out / "scaling_fits.csv",
        fit_rows,
        ["proposal", "m", "k", "k_uncertainty", "intercept", "r_squared", "ratio_to_uniform", "ratio_uncertainty"],
        command=f"fit-scaling in={args.infile}",
    )
    for f in fits:
        label = f.proposal if not f.m else f"{f.proposal}[m={f.m}]"
        ratio = f"  ratio_to_uniform={f.ratio_to_uniform:.3f}" if f.ratio_to_uniform else ""
        print(f"{label}: k={f.k:.4f} +- {f.k_uncertainty:.4f}  R2={f.r_squared:.3f}{ratio}")
    return 0


def cmd_win_fraction(args) -> int:
    df = read_csv(args.infile)
    rows = win_fractions(df)
    fieldnames = ["n", "instances"] + [k for k in rows[0] if k.startswith("beats_")]
    out = args.out / "win_fraction.csv"
    write_csv(out, rows, fieldnames, command=f"win-fraction in={args.infile}")
    for row in rows:
        print(row)
    return 0


def cmd_m_sweep(args) -> int:
    spec = _sweep_spec(args)
    m_values = _m_list(args.m_list)
    records = run_m_sweep(spec, m_values, workers=args.workers)
    out = args.out / "m_sweep.csv"
    write_records(out, records, command=f"m-sweep seed={spec.master_seed} m_list={args.m_list}")
    import pandas as pd

    df = pd.DataFrame([asdict(r) for r in records])
    means = aggregate_means(df)
    write_csv(
        args.out / "m_sweep_means.csv",
        means.to_dict("records"),
        ["proposal", "m", "n", "mean_delta", "std_delta", "count", "stderr_delta"],
        command=f"m-sweep seed={spec.master_seed}",
    )
    fits = fit_scaling(df)
    write_csv(
        args.out / "m_sweep_fits.csv",
        [asdict(f) for f in fits],
        ["proposal", "m", "k", "k_uncertainty", "intercept", "r_squared", "ratio_to_uniform", "ratio_uncertainty"],
        command=f"m-sweep seed={spec.master_seed}",
    )
    print(out)
    return 0


def cmd_theta_study(args) -> int:
    spec = _sweep_spec(args)
    if args.mode == "n":
        records = run_theta_study_vs_n(spec, workers=args.workers)
        summary = summarize_theta_study(records, by="n")
        group_key = "n"
    else:
        p_values = _int_list(args.p_list)
        records = run_theta_study_vs_p(spec, p_values, n=args.n, workers=args.workers)
        summary = summarize_theta_study(records, by="p")
        group_key = "p"
    write_csv(
        args.out / "theta_study.csv",
        [asdict(r) for r in records],
        ["n", "p", "instance_seed", "theta_star", "ar_at_star", "boundary", "error"],
        command=f"theta-study mode={args.mode} seed={spec.master_seed}",
    )
    write_csv(
        args.out / "theta_summary.csv",
        summary,
        [group_key, "mean_theta_star", "std_theta_star", "count"],
        command=f"theta-study mode={args.mode} seed={spec.master_seed}",
    )
    if args.mode == "p":
        a, a_unc = fit_inverse_depth(summary)
        write_csv(
            args.out / "theta_fit.csv",
            [{"a": a, "a_uncertainty": a_unc}],
            ["a", "a_uncertainty"],
            command=f"theta-study mode=p seed={spec.master_seed}",
        )
        print(f"fitted a = {a:.4f} +- {a_unc:.4f}")
    print(args.out / "theta_summary.csv")
    return 0


def cmd_magnetization(args) -> int:
    if args.instance:
        instance = load_instance(args.instance)
    else:
        if args.n is None:
            raise SystemExit("need --instance FILE or --n (with optional --instance-seed)")
        instance = generate_instance(args.n, args.instance_seed)
    proposals = tuple(tok.strip() for tok in args.proposals.split(",") if tok.strip())
    rows, thetas = run_magnetization(
        instance,
        temperature=args.temperature,
        m_estimate=args.M,
        chains=args.chains,
        steps=args.steps,
        proposals=proposals,
        master_seed=args.seed if args.seed is not None else 0,
        p=args.p,
        theta_max=args.theta_max,
        burn_in=args.burn_in,
    )
    out = args.out / "magnetization.csv"
    write_csv(
        out,
        [asdict(r) for r in rows],
        ["proposal", "step", "mean_m", "std_m", "stderr_m", "exact_m", "theta"],
        command=f"magnetization n={instance.n} T={args.temperature} M={args.M} seed={args.seed or 0}",
    )
    print(json.dumps({k: v for k, v in thetas.items()}))
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qaoa-mcmc",
        description="Metropolis Monte Carlo over spin glasses with circuit proposal kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-instance", help="generate and save a random instance")
    _add_common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--file", type=Path, default=None, help="explicit output file path")
    s.set_defaults(fn=cmd_gen_instance)

    s = sub.add_parser("run-chain", help="run Metropolis chains and save the trace")
    _add_common(s)
    s.add_argument("--instance", type=Path, required=True)
    s.add_argument("--proposal", choices=["local", "uniform", "random", "qaoa"], default="uniform")
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--p", type=int, default=5)
    s.add_argument("--temperature", type=float, default=1.0)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--chains", type=int, default=1)
    s.set_defaults(fn=cmd_run_chain)

    s = sub.add_parser("optimize-theta", help="search for the smallest positive AR minimum")
    _add_common(s)
    s.add_argument("--instance", type=Path, required=True)
    s.add_argument("--p", type=int, default=5)
    s.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    s.add_argument("--M", type=int, default=None, help="chain steps per AR evaluation (sampled)")
    s.add_argument("--temperature", type=float, default=0.1)
    s.add_argument("--theta-max", dest="theta_max", type=float, default=None)
    s.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    s.add_argument("--burn-in", dest="burn_in", type=int, default=0)
    s.set_defaults(fn=cmd_optimize_theta)

    s = sub.add_parser("spectral-sweep", help="gap/AR sweep over random instances")
    _add_common(s)
    _add_sweep_args(s)
    s.add_argument("--dump-matrices", action="store_true", help="also dump P and S matrices")
    s.set_defaults(fn=cmd_spectral_sweep)

    s = sub.add_parser("fit-scaling", help="fit mean gaps to 2^(-k n)")
    _add_common(s)
    s.add_argument("--in", dest="infile", type=Path, required=True)
    s.set_defaults(fn=cmd_fit_scaling)

    s = sub.add_parser("win-fraction", help="per-size fraction of instances won")
    _add_common(s)
    s.add_argument("--in", dest="infile", type=Path, required=True)
    s.set_defaults(fn=cmd_win_fraction)

    s = sub.add_parser("m-sweep", help="sweep AR-estimation budgets M")
    _add_common(s)
    _add_sweep_args(s)
    s.add_argument("--m-list", dest="m_list", type=str, default="8,32,128,inf")
    s.set_defaults(fn=cmd_m_sweep)

    s = sub.add_parser("theta-study", help="theta* distribution vs size or depth")
    _add_common(s)
    _add_sweep_args(s)
    s.add_argument("--mode", choices=["n", "p"], default="n")
    s.add_argument("--p-list", dest="p_list", type=str, default="1,2,3,4,5,6,7,8,9,10")
    s.add_argument("--n", type=int, default=5, help="fixed size for mode p")
    s.set_defaults(fn=cmd_theta_study)

    s = sub.add_parser("magnetization", help="running-mean magnetization vs exact value")
    _add_common(s)
    s.add_argument("--instance", type=Path, default=None)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--instance-seed", dest="instance_seed", type=int, default=0)
    s.add_argument("--temperature", type=float, default=1.0)
    s.add_argument("--M", type=int, default=1000)
    s.add_argument("--chains", type=int, default=10)
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--proposals", type=str, default="optimized,uniform,local")
    s.add_argument("--p", type=int, default=5)
    s.add_argument("--theta-max", dest="theta_max", type=float, default=None)
    s.add_argument("--burn-in", dest="burn_in", type=int, default=0)
    s.set_defaults(fn=cmd_magnetization)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "out") and args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
