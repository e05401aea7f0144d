"""Seeded experiment sweeps with CSV persistence and scaling fits.

Every quantity a sweep produces is derived deterministically from the
master seed through tagged seed sequences, so reruns with the same
flags reproduce the same rows regardless of worker count or schedule.
CSV files open with one '#' comment line carrying the command and a
timestamp; all data lines below it are reproducible (wall_time, being
wall-clock, is the one exception and is excluded from determinism
guarantees).
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .ising import (
    BoltzmannTarget,
    SpinGlassInstance,
    exact_average_magnetization,
    exact_distribution,
    generate_instance,
)
from .mcmc import run_chain, running_mean_magnetization
from .proposals import LocalKernel, QaoaKernel, RandomThetaKernel, UniformKernel
from .spectral import acceptance_matrix, exact_ar, spectral_gap, symmetrize, build_transition_matrix, save_matrix_csv
from .statevector import DegenerateHamiltonianError, QaoaParameters
from .theta_opt import (
    DegenerateLandscapeError,
    OptimizedTheta,
    ThetaSearchConfig,
    find_theta_star,
    theta_max_for_depth,
)

PROPOSAL_ORDER = ("optimized", "random", "uniform", "local")

# Tags keep derived seed streams for different purposes disjoint.
_TAG_INSTANCE = 1
_TAG_RANDOM_THETA = 2
_TAG_SAMPLED_SEARCH = 3
_TAG_CHAIN = 4
_TAG_INIT = 5


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of integer parts."""
    entropy = [int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: sizes, instance counts, target, circuit depth."""

    sizes: tuple[int, ...]
    instances_per_size: int
    temperature: float = 0.1
    p: int = 5
    theta_max: float | None = None  # None: use theta_max_for_depth(p)
    proposals: tuple[str, ...] = PROPOSAL_ORDER
    master_seed: int = 0
    grid_points: int = 64
    refine_tol: float = 1e-4

    def resolved_theta_max(self) -> float:
        return self.theta_max if self.theta_max is not None else theta_max_for_depth(self.p)


@dataclass
class ExperimentRecord:
    """One (instance, proposal) row of a sweep."""

    n: int
    instance_seed: int
    proposal: str
    m: str = ""  # AR-estimation budget for m-sweeps ("" = not applicable, "inf" = exact)
    theta: float | None = None
    delta: float | None = None
    exact_ar: float | None = None
    theta_star: float | None = None
    boundary: bool = False
    error: str = ""
    wall_time: float = 0.0


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of mean gap to 2**(-k n), done in log2 domain."""

    proposal: str
    m: str
    k: float
    k_uncertainty: float
    intercept: float
    r_squared: float
    ratio_to_uniform: float | None = None
    ratio_uncertainty: float | None = None


def instance_for(spec: SweepSpec, n: int, index: int) -> SpinGlassInstance:
    return generate_instance(n, derive_seed(spec.master_seed, _TAG_INSTANCE, n, index))


def _build_kernel(
    proposal: str,
    instance: SpinGlassInstance,
    spec: SweepSpec,
    index: int,
    theta: float | None = None,
):
    if proposal == "optimized":
        if theta is None:
            raise ValueError("optimized kernel needs a theta value")
        return QaoaKernel(instance, QaoaParameters.uniform(theta, spec.p))
    if proposal == "random":
        seed = derive_seed(spec.master_seed, _TAG_RANDOM_THETA, instance.n, index)
        return RandomThetaKernel(instance, spec.p, seed)
    if proposal == "uniform":
        return UniformKernel(instance.n)
    if proposal == "local":
        return LocalKernel(instance.n)
    raise ValueError(f"unknown proposal kind {proposal!r}")


def _optimize_theta(
    target: BoltzmannTarget,
    spec: SweepSpec,
    mode: str = "exact",
    m: int | None = None,
    seed: int | None = None,
) -> tuple[OptimizedTheta | None, float, str]:
    """Run the theta* search; on a flat landscape fall back to theta_max/2.

    Returns (result or None, theta to use, error annotation).
    """
    theta_max = spec.resolved_theta_max()
    config = ThetaSearchConfig(
        theta_max=theta_max,
        p=spec.p,
        mode=mode,
        m=m,
        seed=seed,
        grid_points=spec.grid_points,
        refine_tol=spec.refine_tol,
    )
    try:
        result = find_theta_star(target, config)
        return result, result.theta_star, ""
    except DegenerateLandscapeError as exc:
        return None, theta_max / 2.0, f"degenerate AR landscape ({exc}); using theta_max/2"


def sweep_rows_for_instance(
    spec: SweepSpec,
    instance: SpinGlassInstance,
    index: int,
) -> list[ExperimentRecord]:
    """All per-proposal records for one instance of a spectral sweep."""
    target = BoltzmannTarget(instance, spec.temperature)
    mu = exact_distribution(target)
    acc = acceptance_matrix(target)
    rows = []
    for proposal in spec.proposals:
        t0 = time.perf_counter()
        rec = ExperimentRecord(n=instance.n, instance_seed=instance.seed, proposal=proposal)
        try:
            theta = None
            if proposal == "optimized":
                result, theta, err = _optimize_theta(target, spec)
                rec.error = err
                rec.theta_star = theta if result is not None else None
                rec.boundary = result.boundary if result is not None else False
            kernel = _build_kernel(proposal, instance, spec, index, theta=theta)
            rec.theta = getattr(kernel, "theta", theta)
            q = kernel.exact_matrix()
            rec.delta = spectral_gap(target, q)
            rec.exact_ar = exact_ar(target, q, mu=mu, acceptance=acc)
        except (DegenerateHamiltonianError, DegenerateLandscapeError, ValueError) as exc:
            rec.error = (rec.error + "; " if rec.error else "") + str(exc)
        rec.wall_time = time.perf_counter() - t0
        rows.append(rec)
    return rows


def _spectral_task(args: tuple[SweepSpec, int, int]) -> list[ExperimentRecord]:
    spec, n, index = args
    return sweep_rows_for_instance(spec, instance_for(spec, n, index), index)


def _run_tasks(task_fn, args_list, workers: int):
    if workers <= 1:
        return [task_fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task_fn, args_list, chunksize=1))


def run_spectral_sweep(spec: SweepSpec, workers: int = 1) -> list[ExperimentRecord]:
    """Gap/AR records for every (size, instance, proposal) combination.

    Rows come back in deterministic (n, instance, proposal) order no
    matter how many workers ran them.
    """
    args = [(spec, n, i) for n in spec.sizes for i in range(spec.instances_per_size)]
    nested = _run_tasks(_spectral_task, args, workers)
    return [rec for rows in nested for rec in rows]


def m_sweep_rows_for_instance(
    spec: SweepSpec,
    instance: SpinGlassInstance,
    index: int,
    m_values: tuple[int | None, ...],
) -> list[ExperimentRecord]:
    """Optimized-kernel records at several AR-estimation budgets, plus a
    uniform baseline row for ratio fits.  ``None`` means exact AR."""
    target = BoltzmannTarget(instance, spec.temperature)
    mu = exact_distribution(target)
    acc = acceptance_matrix(target)
    rows = []
    for m in m_values:
        t0 = time.perf_counter()
        label = "inf" if m is None else str(m)
        rec = ExperimentRecord(
            n=instance.n, instance_seed=instance.seed, proposal="optimized", m=label
        )
        try:
            if m is None:
                result, theta, err = _optimize_theta(target, spec)
            else:
                seed = derive_seed(spec.master_seed, _TAG_SAMPLED_SEARCH, instance.n, index, m)
                result, theta, err = _optimize_theta(target, spec, mode="sampled", m=m, seed=seed)
            rec.error = err
            rec.theta = rec.theta_star = theta
            rec.boundary = result.boundary if result is not None else False
            kernel = QaoaKernel(instance, QaoaParameters.uniform(theta, spec.p))
            q = kernel.exact_matrix()
            rec.delta = spectral_gap(target, q)
            rec.exact_ar = exact_ar(target, q, mu=mu, acceptance=acc)
        except (DegenerateHamiltonianError, DegenerateLandscapeError, ValueError) as exc:
            rec.error = (rec.error + "; " if rec.error else "") + str(exc)
        rec.wall_time = time.perf_counter() - t0
        rows.append(rec)

    t0 = time.perf_counter()
    rec = ExperimentRecord(n=instance.n, instance_seed=instance.seed, proposal="uniform")
    q = UniformKernel(instance.n).exact_matrix()
    rec.delta = spectral_gap(target, q)
    rec.exact_ar = exact_ar(target, q, mu=mu, acceptance=acc)
    rec.wall_time = time.perf_counter() - t0
    rows.append(rec)
    return rows


def _m_sweep_task(args) -> list[ExperimentRecord]:
    spec, n, index, m_values = args
    return m_sweep_rows_for_instance(spec, instance_for(spec, n, index), index, m_values)


def run_m_sweep(
    spec: SweepSpec, m_values: tuple[int | None, ...], workers: int = 1
) -> list[ExperimentRecord]:
    """Re-optimize theta per instance at each AR budget and record gaps.

    The same derived instances are used for every budget (and match
    :func:`run_spectral_sweep` for the same master seed).
    """
    args = [(spec, n, i, tuple(m_values)) for n in spec.sizes for i in range(spec.instances_per_size)]
    nested = _run_tasks(_m_sweep_task, args, workers)
    return [rec for rows in nested for rec in rows]


# --- theta* studies ---------------------------------------------------------

#: Study searches scan twice the tuned per-depth range so the first AR
#: minimum is located rather than imposed by the range itself.
THETA_STUDY_RANGE_FACTOR = 2.0


@dataclass
class ThetaStudyRecord:
    n: int
    p: int
    instance_seed: int
    theta_star: float | None
    ar_at_star: float | None
    boundary: bool = False
    error: str = ""


def _theta_study_task(args) -> ThetaStudyRecord:
    spec, n, p, index = args
    instance = instance_for(spec, n, index)
    target = BoltzmannTarget(instance, spec.temperature)
    theta_max = THETA_STUDY_RANGE_FACTOR * theta_max_for_depth(p)
    config = ThetaSearchConfig(
        theta_max=theta_max,
        p=p,
        mode="exact",
        grid_points=spec.grid_points,
        refine_tol=spec.refine_tol,
    )
    rec = ThetaStudyRecord(n=n, p=p, instance_seed=instance.seed, theta_star=None, ar_at_star=None)
    try:
        result = find_theta_star(target, config)
        rec.theta_star = result.theta_star
        rec.ar_at_star = result.ar_at_star
        rec.boundary = result.boundary
    except DegenerateLandscapeError as exc:
        rec.error = str(exc)
    return rec


def run_theta_study_vs_n(spec: SweepSpec, workers: int = 1) -> list[ThetaStudyRecord]:
    """theta* per instance across sizes at fixed depth spec.p."""
    args = [(spec, n, spec.p, i) for n in spec.sizes for i in range(spec.instances_per_size)]
    return _run_tasks(_theta_study_task, args, workers)


def run_theta_study_vs_p(
    spec: SweepSpec, p_values: tuple[int, ...], n: int, workers: int = 1
) -> list[ThetaStudyRecord]:
    """theta* per instance across depths at fixed size n."""
    args = [(spec, n, p, i) for p in p_values for i in range(spec.instances_per_size)]
    return _run_tasks(_theta_study_task, args, workers)


def summarize_theta_study(records: list[ThetaStudyRecord], by: str) -> list[dict]:
    """Per-group mean/std of theta* (errors excluded, boundary rows kept)."""
    if by not in ("n", "p"):
        raise ValueError("group key must be 'n' or 'p'")
    groups: dict[int, list[float]] = {}
    for rec in records:
        if rec.error or rec.theta_star is None:
            continue
        groups.setdefault(getattr(rec, by), []).append(rec.theta_star)
    out = []
    for key in sorted(groups):
        vals = np.asarray(groups[key])
        out.append(
            {
                by: key,
                "mean_theta_star": float(vals.mean()),
                "std_theta_star": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "count": len(vals),
            }
        )
    return out


def fit_inverse_depth(summary: list[dict]) -> tuple[float, float]:
    """Least-squares coefficient a in theta* ~ a/p from per-depth means.

    Minimizing sum_p (mean_p - a/p)^2 gives a in closed form; the
    uncertainty is the usual linear-regression standard error of the
    single coefficient.
    """
    ps = np.array([row["p"] for row in summary], dtype=float)
    means = np.array([row["mean_theta_star"] for row in summary])
    x = 1.0 / ps
    a = float((means @ x) / (x @ x))
    residuals = means - a * x
    dof = max(len(ps) - 1, 1)
    a_unc = float(np.sqrt((residuals @ residuals) / dof / (x @ x)))
    return a, a_unc


# --- magnetization runs ------------------------------------------------------


@dataclass
class MagnetizationRow:
    proposal: str
    step: int
    mean_m: float
    std_m: float
    stderr_m: float
    exact_m: float
    theta: float | None = None


def run_magnetization(
    instance: SpinGlassInstance,
    temperature: float,
    m_estimate: int,
    chains: int,
    steps: int,
    proposals: tuple[str, ...],
    master_seed: int,
    p: int = 5,
    theta_max: float | None = None,
    grid_points: int = 64,
    burn_in: int = 0,
) -> tuple[list[MagnetizationRow], dict[str, float | None]]:
    """Per-step running-mean magnetization traces against the exact value.

    theta for the optimized kernel comes from a sampled-mode search with
    ``m_estimate`` steps per AR evaluation.  All proposals share the
    same per-chain random initial states so the comparison is paired.
    Returns (rows, theta used per proposal).
    """
    spec = SweepSpec(
        sizes=(instance.n,),
        instances_per_size=1,
        temperature=temperature,
        p=p,
        theta_max=theta_max,
        master_seed=master_seed,
        grid_points=grid_points,
    )
    target = BoltzmannTarget(instance, temperature)
    exact_m = exact_average_magnetization(target)
    init_rng = np.random.default_rng(derive_seed(master_seed, _TAG_INIT, instance.n))
    inits = [int(init_rng.integers(instance.num_states)) for _ in range(chains)]

    rows: list[MagnetizationRow] = []
    thetas: dict[str, float | None] = {}
    for k_idx, proposal in enumerate(proposals):
        theta = None
        if proposal == "optimized":
            seed = derive_seed(master_seed, _TAG_SAMPLED_SEARCH, instance.n, m_estimate)
            _, theta, _err = _optimize_theta(target, spec, mode="sampled", m=m_estimate, seed=seed)
        kernel = _build_kernel(proposal, instance, spec, index=0, theta=theta)
        thetas[proposal] = getattr(kernel, "theta", theta)
        traces = [
            run_chain(
                target,
                kernel,
                steps,
                init=inits[c],
                seed=derive_seed(master_seed, _TAG_CHAIN, instance.n, k_idx, c),
            )
            for c in range(chains)
        ]
        mean, std = running_mean_magnetization(traces, burn_in=burn_in)
        stderr = std / math.sqrt(len(traces))
        for t in range(len(mean)):
            rows.append(
                MagnetizationRow(
                    proposal=proposal,
                    step=burn_in + t + 1,
                    mean_m=float(mean[t]),
                    std_m=float(std[t]),
                    stderr_m=float(stderr[t]),
                    exact_m=exact_m,
                    theta=thetas[proposal],
                )
            )
    return rows, thetas


# --- fits and win fractions --------------------------------------------------


def aggregate_means(df: pd.DataFrame) -> pd.DataFrame:
    """Mean/std/stderr of delta per (proposal, m, n); one row per group."""
    df = df[df["delta"].notna()].copy()
    if "m" not in df.columns:
        df["m"] = ""
    df["m"] = df["m"].fillna("").astype(str)
    grouped = (
        df.groupby(["proposal", "m", "n"])["delta"]
        .agg(mean_delta="mean", std_delta="std", count="count")
        .reset_index()
    )
    grouped["std_delta"] = grouped["std_delta"].fillna(0.0)
    grouped["stderr_delta"] = grouped["std_delta"] / np.sqrt(grouped["count"])
    return grouped.sort_values(["proposal", "m", "n"]).reset_index(drop=True)


def fit_scaling(df: pd.DataFrame) -> list[ScalingFit]:
    """Fit log2(mean delta) = -k n + c per proposal (and per m budget).

    Needs at least 3 distinct sizes per group.  Mean gaps must be
    positive (guaranteed for valid rows).  Ratios are taken against the
    plain uniform kernel's k from the same table when present.
    """
    means = aggregate_means(df)
    fits: list[ScalingFit] = []
    for (proposal, m), group in means.groupby(["proposal", "m"]):
        group = group.sort_values("n")
        if group["n"].nunique() < 3:
            continue
        if (group["mean_delta"] <= 0).any():
            raise ValueError(f"non-positive mean delta for proposal {proposal!r}")
        ns = group["n"].to_numpy(dtype=float)
        logd = np.log2(group["mean_delta"].to_numpy())
        (slope, intercept), cov = np.polyfit(ns, logd, 1, cov=True)
        predicted = slope * ns + intercept
        ss_res = float(np.sum((logd - predicted) ** 2))
        ss_tot = float(np.sum((logd - logd.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        fits.append(
            ScalingFit(
                proposal=proposal,
                m=m,
                k=float(-slope),
                k_uncertainty=float(np.sqrt(max(cov[0, 0], 0.0))),
                intercept=float(intercept),
                r_squared=r2,
            )
        )
    uniform = next((f for f in fits if f.proposal == "uniform" and f.m == ""), None)
    if uniform is not None and uniform.k != 0:
        enriched = []
        for f in fits:
            ratio = uniform.k / f.k if f.k != 0 else None
            if ratio is not None and f.k != 0:
                rel = math.sqrt(
                    (uniform.k_uncertainty / uniform.k) ** 2 + (f.k_uncertainty / f.k) ** 2
                )
                ratio_unc = abs(ratio) * rel
            else:
                ratio_unc = None
            enriched.append(
                ScalingFit(
                    proposal=f.proposal,
                    m=f.m,
                    k=f.k,
                    k_uncertainty=f.k_uncertainty,
                    intercept=f.intercept,
                    r_squared=f.r_squared,
                    ratio_to_uniform=ratio,
                    ratio_uncertainty=ratio_unc,
                )
            )
        fits = enriched
    return fits


def win_fractions(df: pd.DataFrame, baseline: str = "optimized") -> list[dict]:
    """Per-size percentage of instances where the baseline's gap strictly
    beats each competitor, and all competitors simultaneously."""
    df = df[df["delta"].notna()]
    if "m" in df.columns:
        # win fractions are defined on plain sweep rows, not m-budget rows
        df = df[df["m"].fillna("").astype(str) == ""]
    competitors = [p for p in df["proposal"].unique() if p != baseline]
    if baseline not in set(df["proposal"]):
        raise ValueError(f"no rows for baseline proposal {baseline!r}")
    if not competitors:
        raise ValueError("need at least one competitor proposal")
    out = []
    for n, group in df.groupby("n"):
        pivot = group.pivot_table(index="instance_seed", columns="proposal", values="delta")
        missing = [p for p in [baseline, *competitors] if p not in pivot.columns]
        if missing:
            raise ValueError(f"missing kernel rows for {missing} at n={n}")
        pivot = pivot.dropna()
        if len(pivot) == 0:
            continue
        row: dict = {"n": int(n), "instances": int(len(pivot))}
        beats_all = np.ones(len(pivot), dtype=bool)
        for comp in competitors:
            wins = pivot[baseline].to_numpy() > pivot[comp].to_numpy()
            row[f"beats_{comp}"] = float(100.0 * wins.mean())
            beats_all &= wins
        row["beats_all"] = float(100.0 * beats_all.mean())
        out.append(row)
    return sorted(out, key=lambda r: r["n"])


# --- CSV persistence ----------------------------------------------------------


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_csv(path: str | Path, rows: list[dict], fieldnames: list[str], command: str) -> None:
    """Write rows with a single '#' provenance line above the header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {command} generated={stamp}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_value(row.get(k)) for k in fieldnames})


def read_csv(path: str | Path) -> pd.DataFrame:
    """Read a harness CSV, skipping provenance comment lines."""
    return pd.read_csv(path, comment="#")


RECORD_FIELDS = [
    "n",
    "instance_seed",
    "proposal",
    "m",
    "theta",
    "delta",
    "exact_ar",
    "theta_star",
    "boundary",
    "error",
    "wall_time",
]


def write_records(path: str | Path, records: list[ExperimentRecord], command: str) -> None:
    write_csv(path, [asdict(r) for r in records], RECORD_FIELDS, command)


def dump_chain_matrices(
    out_dir: str | Path,
    target: BoltzmannTarget,
    q: np.ndarray,
    label: str,
) -> None:
    """Save the transition matrix and its symmetrization for external checks."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = target.instance.n
    p = build_transition_matrix(target, q)
    s = symmetrize(target, q)
    save_matrix_csv(out_dir / f"P_{label}.csv", p, n, label)
    save_matrix_csv(out_dir / f"S_{label}.csv", s, n, label)
