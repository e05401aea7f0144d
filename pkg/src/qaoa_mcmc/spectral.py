"""Exact transition matrices, spectral gaps, and stationary acceptance rates.

Matrices are column-stochastic: entry [x', x] is the probability of
moving to x' from x.  For a symmetric proposal Q and Boltzmann target
the Metropolis chain is reversible, so P is similar to a symmetric
matrix S with the same spectrum.  S has the closed form

    S[x', x] = Q[x', x] * exp(-|E(x') - E(x)| / (2T))   (off-diagonal),
    S[x, x]  = P[x, x],

which involves only energy differences.  Forming D^{1/2} P D^{-1/2}
from the stationary vector directly would underflow at low temperature;
the closed form never does.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ising import BoltzmannTarget, all_energies, exact_distribution

#: Default cap on n for dense 2**n x 2**n spectral work (4096^2 eigensolve).
SPECTRAL_CAP = 12


class ReducibleChainError(RuntimeError):
    """Transition matrix is not a converging chain (top eigenvalue off 1)."""


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ValueError(f"spectral analysis needs n <= {cap}, got n={n}")


def _check_columns(q: np.ndarray, atol: float = 1e-8) -> None:
    col = q.sum(axis=0)
    if np.max(np.abs(col - 1.0)) > atol:
        raise ValueError(
            f"proposal columns not normalized (max deviation {np.max(np.abs(col - 1.0)):.2e})"
        )


def acceptance_matrix(target: BoltzmannTarget) -> np.ndarray:
    """Metropolis acceptance A[x', x] = min(1, exp((E(x) - E(x'))/T)).

    Evaluated as exp(min(0, dE/T)) so nothing overflows at low T.
    """
    e = all_energies(target.instance)
    de = (e[None, :] - e[:, None]) / target.temperature
    return np.exp(np.minimum(0.0, de))


def build_transition_matrix(target: BoltzmannTarget, q: np.ndarray, cap: int = SPECTRAL_CAP) -> np.ndarray:
    """Exact Metropolis transition matrix for proposal matrix q.

    Off-diagonal entries are Q * A; the diagonal absorbs all rejected
    mass plus any self-proposal mass, making every column sum exactly 1.
    """
    _check_cap(target.instance.n, cap)
    _check_columns(q)
    p = q * acceptance_matrix(target)
    np.fill_diagonal(p, 0.0)
    diag = 1.0 - p.sum(axis=0)
    # Tiny negatives can appear when q columns sum to 1 only within rounding.
    if np.min(diag) < -1e-12:
        raise ValueError(f"transition diagonal went negative ({np.min(diag):.2e})")
    p[np.diag_indices_from(p)] = np.maximum(diag, 0.0)
    return p


def symmetrize(target: BoltzmannTarget, q: np.ndarray, cap: int = SPECTRAL_CAP) -> np.ndarray:
    """Symmetric matrix sharing the spectrum of the Metropolis chain.

    See the module docstring for the closed form; the diagonal is the
    transition matrix's own diagonal.
    """
    _check_cap(target.instance.n, cap)
    _check_columns(q)
    e = all_energies(target.instance)
    acc = np.exp(np.minimum(0.0, (e[None, :] - e[:, None]) / target.temperature))
    off = q * acc
    np.fill_diagonal(off, 0.0)
    diag = np.maximum(1.0 - off.sum(axis=0), 0.0)
    s = q * np.exp(-np.abs(e[None, :] - e[:, None]) / (2.0 * target.temperature))
    s[np.diag_indices_from(s)] = diag
    return s


def absolute_spectral_gap(s: np.ndarray, raise_on_degenerate_unit: bool = False) -> float:
    """1 - |second largest eigenvalue| of a symmetrized chain matrix.

    Eigenvalues are sorted by absolute value and exactly one eigenvalue
    equal to 1 (the stationary one) is removed before taking the second
    largest.  If the largest eigenvalue deviates from 1 by more than
    1e-6 the matrix is not a stochastic chain and an error is raised.

    ``raise_on_degenerate_unit=True`` additionally treats a second
    eigenvalue within 1e-9 of +1 (a reducible chain) as an error
    instead of returning the truthful gap of 0.
    """
    ev = np.linalg.eigvalsh(s)
    order = np.argsort(np.abs(ev))[::-1]
    ev = ev[order]
    if abs(ev[0] - 1.0) > 1e-6:
        raise ReducibleChainError(
            f"chain not stochastic/reducible: top eigenvalue {ev[0]!r} is not 1"
        )
    if len(ev) == 1:
        return 1.0
    rest = ev[1:]
    if raise_on_degenerate_unit and np.any(np.abs(rest - 1.0) <= 1e-9):
        raise ReducibleChainError("degenerate unit eigenvalue: chain is reducible")
    delta = 1.0 - float(np.max(np.abs(rest)))
    return min(max(delta, 0.0), 1.0)


def spectral_gap(target: BoltzmannTarget, q: np.ndarray, cap: int = SPECTRAL_CAP) -> float:
    """Convenience: symmetrize the chain for proposal q and return its gap."""
    return absolute_spectral_gap(symmetrize(target, q, cap=cap))


def exact_ar(
    target: BoltzmannTarget,
    q: np.ndarray,
    mu: np.ndarray | None = None,
    acceptance: np.ndarray | None = None,
    cap: int = SPECTRAL_CAP,
) -> float:
    """Stationary acceptance rate sum_{x,x'} mu(x) Q(x'|x) A(x'|x).

    ``mu`` and ``acceptance`` may be supplied to amortize their
    construction over many proposal matrices for the same target (they
    depend only on the target).
    """
    _check_cap(target.instance.n, cap)
    if mu is None:
        mu = exact_distribution(target)
    if acceptance is None:
        acceptance = acceptance_matrix(target)
    return float(mu @ (q * acceptance).sum(axis=0))


def verify_detailed_balance(
    target: BoltzmannTarget,
    p: np.ndarray,
    floor: float = 1e-300,
) -> float:
    """Max log-domain detailed-balance residual of a transition matrix.

    Returns max over state pairs of |log(mu(x) P[x',x]) - log(mu(x') P[x,x'])|,
    restricted to pairs where both products exceed ``floor`` (entries
    below it are lost to double-precision underflow, not to chain
    construction).  Evaluated entirely with log weights, so nothing
    underflows at low temperature.
    """
    e = all_energies(target.instance)
    log_mu = -e / target.temperature  # normalization cancels in the residual
    with np.errstate(divide="ignore"):
        log_flow = log_mu[None, :] + np.log(p)  # [x', x] = log(mu(x) P[x',x])
    log_floor = np.log(floor)
    mask = (log_flow > log_floor) & (log_flow.T > log_floor)
    np.fill_diagonal(mask, False)
    if not np.any(mask):
        return 0.0
    with np.errstate(invalid="ignore"):
        resid = np.abs(log_flow - log_flow.T)
    return float(np.max(resid[mask]))


def save_matrix_csv(path: str | Path, m: np.ndarray, n: int, description: str) -> None:
    """Dump a dense chain matrix to CSV for external verification.

    Row-major, one matrix row per line, with a comment header recording
    n and a free-form kernel description.
    """
    header = f"n={n} description={description}"
    np.savetxt(path, m, delimiter=",", header=header)
