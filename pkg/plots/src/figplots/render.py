"""Render harness CSVs into figures.

Each figure kind consumes exactly one harness output file as-is.  The
only computation here is the least-squares line re-fit echoed in plot
legends (scaling fits 2^(-k n), the depth study fits a/p); every other
number is plotted verbatim from the CSV.  Output is written as both PNG
and SVG next to each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

KINDS = ("scaling", "win_fraction", "m_sweep", "theta_vs_n", "theta_vs_p", "magnetization")

REQUIRED_COLUMNS = {
    "scaling": ["proposal", "m", "n", "mean_delta", "std_delta"],
    "m_sweep": ["proposal", "m", "n", "mean_delta", "std_delta"],
    "win_fraction": ["n", "instances"],
    "theta_vs_n": ["n", "mean_theta_star", "std_theta_star"],
    "theta_vs_p": ["p", "mean_theta_star", "std_theta_star"],
    "magnetization": ["proposal", "step", "mean_m", "std_m", "exact_m"],
}


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    input_path: str | Path
    kind: str
    output_path: str | Path
    log_scale: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def load_frame(spec: FigureSpec) -> pd.DataFrame:
    df = pd.read_csv(spec.input_path, comment="#")
    required = REQUIRED_COLUMNS[spec.kind]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(
            f"{spec.kind} figure needs columns {required}; "
            f"missing {missing} in {spec.input_path} (found {list(df.columns)})"
        )
    return df


def _fit_k(ns: np.ndarray, means: np.ndarray) -> float:
    slope, _ = np.polyfit(ns, np.log2(means), 1)
    return float(-slope)


def _group_label(keys: tuple) -> str:
    if len(keys) == 1:
        return str(keys[0])
    proposal, budget = keys
    if budget in ("", "baseline"):
        return str(proposal)
    return f"{proposal} (M={budget})"


def _plot_scaling_groups(ax, df: pd.DataFrame, group_cols: list[str], log_scale: bool) -> None:
    df = df.copy()
    df["m"] = df.get("m", pd.Series([""] * len(df))).fillna("").astype(str)
    for keys, group in df.groupby(group_cols):
        group = group.sort_values("n")
        if len(group) == 0:
            continue
        keys = keys if isinstance(keys, tuple) else (keys,)
        label = _group_label(keys)
        ns = group["n"].to_numpy(dtype=float)
        means = group["mean_delta"].to_numpy(dtype=float)
        stds = group["std_delta"].to_numpy(dtype=float)
        line = ax.errorbar(ns, means, yerr=stds, fmt="o", capsize=3, label=None)
        color = line.lines[0].get_color()
        if len(group) >= 3 and np.all(means > 0):
            k = _fit_k(ns, means)
            xs = np.linspace(ns.min(), ns.max(), 100)
            c = np.mean(np.log2(means) + k * ns)
            ax.plot(xs, 2.0 ** (c - k * xs), "-", color=color, label=f"{label}: k={k:.3f}")
        else:
            ax.plot([], [], "o", color=color, label=label)
    ax.set_xlabel("model size n")
    ax.set_ylabel("mean absolute spectral gap")
    if log_scale:
        ax.set_yscale("log", base=2)
    ax.legend()


def _render_scaling(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    # one curve per proposal (rows with an m budget belong to the m_sweep kind)
    df = df.copy()
    df["m"] = df.get("m", pd.Series([""] * len(df))).fillna("").astype(str)
    base = df[df["m"] == ""]
    if len(base) == 0:
        base = df
    _plot_scaling_groups(ax, base, ["proposal"], spec.log_scale)
    ax.set_title("gap scaling per proposal")


def _render_m_sweep(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    df = df.copy()
    df["m"] = df.get("m", pd.Series([""] * len(df))).fillna("").astype(str)
    df["m"] = df["m"].replace("", "baseline")
    _plot_scaling_groups(ax, df, ["proposal", "m"], spec.log_scale)
    ax.set_title("gap scaling per AR-estimation budget")


def _render_win_fraction(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    beat_cols = [c for c in df.columns if c.startswith("beats_")]
    if not beat_cols:
        raise SchemaError(
            f"win_fraction figure needs at least one beats_* column; found {list(df.columns)}"
        )
    df = df.sort_values("n")
    width = 0.8 / len(beat_cols)
    for i, col in enumerate(beat_cols):
        ax.bar(df["n"] + (i - len(beat_cols) / 2 + 0.5) * width, df[col], width=width, label=col)
    ax.set_xlabel("model size n")
    ax.set_ylabel("% of instances won")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.set_title("fraction of instances where the tuned kernel wins")


def _render_theta_vs_n(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    df = df.sort_values("n")
    ax.errorbar(df["n"], df["mean_theta_star"], yerr=df["std_theta_star"], fmt="o-", capsize=3)
    ax.axhline(0.3, linestyle=":", color="gray")
    ax.set_xlabel("model size n")
    ax.set_ylabel("theta*")
    ax.set_title("theta* across model sizes")


def _render_theta_vs_p(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    df = df.sort_values("p")
    ps = df["p"].to_numpy(dtype=float)
    means = df["mean_theta_star"].to_numpy(dtype=float)
    ax.errorbar(ps, means, yerr=df["std_theta_star"], fmt="o", capsize=3)
    x = 1.0 / ps
    a = float((means @ x) / (x @ x))
    xs = np.linspace(ps.min(), ps.max(), 200)
    ax.plot(xs, a / xs, "-", label=f"a/p fit: a={a:.3f}")
    ax.set_xlabel("circuit depth p")
    ax.set_ylabel("theta*")
    ax.legend()
    ax.set_title("theta* across circuit depths")


def _render_magnetization(spec: FigureSpec, df: pd.DataFrame, ax) -> None:
    exact = df["exact_m"].iloc[0]
    for proposal, group in df.groupby("proposal"):
        group = group.sort_values("step")
        steps = group["step"].to_numpy()
        mean = group["mean_m"].to_numpy()
        std = group["std_m"].to_numpy()
        (line,) = ax.plot(steps, mean, label=str(proposal))
        ax.fill_between(steps, mean - std, mean + std, alpha=0.2, color=line.get_color())
    ax.axhline(exact, linestyle=":", color="black", label="exact")
    ax.set_xlabel("chain step")
    ax.set_ylabel("running mean magnetization")
    ax.legend()
    ax.set_title("magnetization estimate vs exact value")


_RENDERERS = {
    "scaling": _render_scaling,
    "m_sweep": _render_m_sweep,
    "win_fraction": _render_win_fraction,
    "theta_vs_n": _render_theta_vs_n,
    "theta_vs_p": _render_theta_vs_p,
    "magnetization": _render_magnetization,
}


def render(spec: FigureSpec) -> tuple[Path, Path]:
    """Render one figure; returns the (png, svg) paths written."""
    df = load_frame(spec)
    fig, ax = plt.subplots(figsize=(7, 5))
    try:
        _RENDERERS[spec.kind](spec, df, ax)
        fig.tight_layout()
        base = Path(spec.output_path)
        if base.suffix.lower() in (".png", ".svg"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        png = base.with_suffix(".png")
        svg = base.with_suffix(".svg")
        fig.savefig(png, dpi=150)
        fig.savefig(svg)
        return png, svg
    finally:
        plt.close(fig)
