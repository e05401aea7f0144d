"""Search for theta*, the smallest positive local minimum of the acceptance rate.

The landscape AR(theta) starts at 1 (theta = 0 is the identity circuit,
a trap that proposes only self-moves) and dips as the circuit starts
mixing.  The first dip is the one wanted: a uniform grid over
(0, theta_max] locates the first interior bracket, which is then
refined by golden section (exact mode, deterministic evaluations) or a
Brent-style parabolic/golden hybrid with a widened stopping width
(sampled mode, noisy evaluations).

Exact mode evaluates the stationary acceptance rate from the full
kernel matrix; sampled mode estimates it from a fresh M-step chain per
evaluation, with per-evaluation seeds derived from the search seed so
the whole search replays bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ising import BoltzmannTarget, exact_distribution
from .mcmc import estimate_ar_stats
from .proposals import QaoaKernel
from .spectral import acceptance_matrix, exact_ar
from .statevector import DegenerateHamiltonianError, QaoaParameters, build_phase_table

#: Coefficient of the 1/p law for the depth-dependent search range.
THETA_MAX_COEFF = 1.45558

#: Sampled-mode brackets must undercut the global grid minimum within this
#: many pooled standard errors; noise wiggles on the flat AR ~ 1 shoulder
#: otherwise masquerade as the first local minimum.
NOISE_BRACKET_Z = 3.0

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0  # inverse golden ratio
_CGOLD = 1.0 - _GOLDEN  # golden step fraction used by Brent


class DegenerateLandscapeError(RuntimeError):
    """AR is flat across the whole search grid (no minimum to find)."""


@dataclass(frozen=True)
class ThetaSearchConfig:
    """Configuration of one theta* search.

    ``mode`` is "exact" or "sampled"; sampled mode needs ``m`` (chain
    steps per AR evaluation) and ``seed``.  ``burn_in`` steps are
    discarded before averaging in sampled evaluations.
    """

    theta_max: float
    p: int
    mode: str = "exact"
    m: int | None = None
    seed: int | None = None
    grid_points: int = 64
    refine_tol: float = 1e-4
    flatness_tol: float = 1e-6
    burn_in: int = 0

    def __post_init__(self):
        if not self.theta_max > 0:
            raise ValueError(f"theta_max must be positive, got {self.theta_max}")
        if self.p < 1:
            raise ValueError(f"depth p must be at least 1, got {self.p}")
        if self.grid_points < 8:
            raise ValueError(f"need at least 8 grid points, got {self.grid_points}")
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be 'exact' or 'sampled', got {self.mode!r}")
        if self.mode == "sampled":
            if self.m is None or self.m < 1:
                raise ValueError("sampled mode needs m >= 1 chain steps per evaluation")
            if self.seed is None:
                raise ValueError("sampled mode needs a seed for reproducible evaluations")


@dataclass(frozen=True)
class OptimizedTheta:
    """Result of a theta* search."""

    theta_star: float
    ar_at_star: float
    evaluations: int
    mode: str
    boundary: bool = False


def theta_max_for_depth(p: int) -> float:
    """Depth-dependent search-range bound, approximately proportional to 1/p.

    Depth 5 returns the tuned value 0.3 exactly; other depths follow
    the fitted 1/p law with coefficient 1.45558.
    """
    if p < 1:
        raise ValueError(f"depth p must be at least 1, got {p}")
    if p == 5:
        return 0.3
    return THETA_MAX_COEFF / p


def golden_section_minimize(f, a: float, b: float, tol: float) -> tuple[float, float, int]:
    """Golden-section minimization of f on [a, b] down to interval width tol.

    Returns (x, f(x), evaluations) where x is the best evaluated point.
    Assumes a minimum was bracketed inside [a, b].
    """
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    evals = 2
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        evals += 1
    return (x1, f1, evals) if f1 <= f2 else (x2, f2, evals)


def brent_minimize(
    f,
    a: float,
    b: float,
    x0: float,
    fx0: float | None = None,
    xtol: float = 1e-5,
    maxiter: int = 100,
) -> tuple[float, float, int]:
    """Brent's parabolic/golden hybrid on [a, b] starting from x0.

    ``xtol`` is an absolute stopping width; with noisy objectives it
    acts as the noise floor below which refinement stops.  Returns
    (x, f(x), evaluations).
    """
    x = w = v = x0
    fx = f(x) if fx0 is None else fx0
    fw = fv = fx
    evals = 0 if fx0 is not None else 1
    d = e = 0.0
    for _ in range(maxiter):
        mid = 0.5 * (a + b)
        tol1 = 1e-11 * abs(x) + xtol
        tol2 = 2.0 * tol1
        if abs(x - mid) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            # Parabola through (x, w, v); fall back to golden if the step
            # is too large or falls outside the bracket.
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < mid else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < mid else (a - x)
            d = _CGOLD * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = f(u)
        evals += 1
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx, evals


def _eval_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, index])


def find_theta_star(target: BoltzmannTarget, config: ThetaSearchConfig) -> OptimizedTheta:
    """Locate the smallest positive local AR minimum on (0, theta_max].

    The grid's first point is 0.01 * theta_max (theta = 0 itself is the
    always-accept identity circuit).  The first grid triple whose middle
    value undercuts both neighbors is refined; if AR only falls toward
    the edge, the global grid minimum is returned flagged as a boundary
    hit.  A landscape flat to within ``flatness_tol`` raises
    :class:`DegenerateLandscapeError`; callers typically fall back to
    theta_max / 2.
    """
    instance = target.instance
    try:
        table = build_phase_table(instance)
    except DegenerateHamiltonianError as exc:
        raise DegenerateLandscapeError(
            f"degenerate AR landscape: {exc} (AR is identically 1)"
        ) from exc

    eval_count = 0
    if config.mode == "exact":
        mu = exact_distribution(target)
        acc = acceptance_matrix(target)

        def ar_at(theta: float) -> float:
            nonlocal eval_count
            eval_count += 1
            kernel = QaoaKernel(instance, QaoaParameters.uniform(theta, config.p), table=table)
            return exact_ar(target, kernel.exact_matrix(), mu=mu, acceptance=acc)

        def ar_with_se(theta: float) -> tuple[float, float]:
            return ar_at(theta), 0.0

    else:

        # Caching the kernel's column CDFs costs one batched circuit run
        # over all states; it pays once the chain length approaches the
        # state count (batched layers amortize per-step call overhead).
        cache = 4 * config.m >= 3 * (1 << instance.n)

        def ar_with_se(theta: float) -> tuple[float, float]:
            nonlocal eval_count
            kernel = QaoaKernel(
                instance, QaoaParameters.uniform(theta, config.p), cache_columns=cache, table=table
            )
            value, se = estimate_ar_stats(
                target,
                kernel,
                config.m,
                seed=_eval_seed(config.seed, eval_count),
                burn_in=config.burn_in,
            )
            eval_count += 1
            return value, se

        def ar_at(theta: float) -> float:
            return ar_with_se(theta)[0]

    grid = np.linspace(0.01 * config.theta_max, config.theta_max, config.grid_points)
    evaluated = [ar_with_se(theta) for theta in grid]
    ar_grid = np.array([value for value, _ in evaluated])

    if float(ar_grid.max() - ar_grid.min()) < config.flatness_tol:
        raise DegenerateLandscapeError(
            f"degenerate AR landscape: AR flat within {config.flatness_tol} over (0, {config.theta_max}]"
        )

    # Sampled grids carry noise: a candidate dip must additionally be
    # competitive with the global grid minimum, or shoulder wiggles near
    # AR ~ 1 would win the "first local minimum" race.
    if config.mode == "sampled":
        pooled_se = float(np.median([se for _, se in evaluated]))
        floor = float(ar_grid.min()) + NOISE_BRACKET_Z * pooled_se
    else:
        floor = math.inf

    for i in range(1, len(grid) - 1):
        if ar_grid[i] < ar_grid[i - 1] and ar_grid[i] < ar_grid[i + 1] and ar_grid[i] <= floor:
            lo, hi = float(grid[i - 1]), float(grid[i + 1])
            if config.mode == "exact":
                x, fx, _ = golden_section_minimize(ar_at, lo, hi, config.refine_tol)
            else:
                x, fx, _ = brent_minimize(
                    ar_at,
                    lo,
                    hi,
                    x0=float(grid[i]),
                    fx0=float(ar_grid[i]),
                    xtol=5.0 * config.refine_tol,
                )
            return OptimizedTheta(
                theta_star=float(x),
                ar_at_star=float(fx),
                evaluations=eval_count,
                mode=config.mode,
                boundary=False,
            )

    j = int(np.argmin(ar_grid))
    return OptimizedTheta(
        theta_star=float(grid[j]),
        ar_at_star=float(ar_grid[j]),
        evaluations=eval_count,
        mode=config.mode,
        boundary=True,
    )
