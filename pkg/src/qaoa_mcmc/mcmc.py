"""Metropolis chains: stepping, traces, and on-line estimators.

One chain owns one rng and is advanced by one worker; cross-chain
aggregation happens only after all chains finish, so results are
deterministic per (seed, chain index) under any parallel schedule.

Each step draws the proposal first and then one accept/reject uniform,
whether or not the acceptance probability is 1, keeping the rng stream
alignment independent of the energies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ising import (
    ENUMERATION_CAP,
    BoltzmannTarget,
    all_energies,
    energy,
    magnetization,
)
from .proposals import ProposalKernel


@dataclass
class ChainState:
    """Mutable state of one Metropolis chain."""

    current: int
    current_energy: float
    rng: np.random.Generator
    step_count: int = 0


@dataclass
class ChainTrace:
    """Per-step record of one chain; all arrays share length step_count."""

    states: np.ndarray
    energies: np.ndarray
    magnetizations: np.ndarray
    acceptance_probs: np.ndarray
    accepted_flags: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


def init_chain(target: BoltzmannTarget, init: int, seed) -> ChainState:
    """Fresh chain at configuration ``init`` with its own seeded rng."""
    n = target.instance.n
    if not 0 <= init < (1 << n):
        raise ValueError(f"initial state {init} out of range for n={n}")
    return ChainState(
        current=int(init),
        current_energy=energy(target.instance, init),
        rng=np.random.default_rng(seed),
    )


def metropolis_step(
    chain: ChainState,
    kernel: ProposalKernel,
    target: BoltzmannTarget,
    energy_table: np.ndarray | None = None,
) -> tuple[float, bool]:
    """Advance the chain by one proposal; returns (A, accepted).

    A = min(1, exp((E(x) - E(x'))/T)) is computed from the energy
    difference only, and is returned whether or not the move was taken
    (the acceptance-rate estimator averages A itself, not the accept
    indicator).  The chain state is updated in place.
    """
    if not kernel.symmetric:
        raise ValueError(
            "kernel is not symmetric; the plain Metropolis rule would violate detailed balance"
        )
    proposal = kernel.propose(chain.current, chain.rng)
    if energy_table is not None:
        proposal_energy = float(energy_table[proposal])
    else:
        proposal_energy = energy(target.instance, proposal)
    de = chain.current_energy - proposal_energy
    a = 1.0 if de >= 0.0 else float(np.exp(de / target.temperature))
    accepted = a >= chain.rng.random()
    if accepted:
        chain.current = proposal
        chain.current_energy = proposal_energy
    chain.step_count += 1
    return a, accepted


def run_chain(
    target: BoltzmannTarget,
    kernel: ProposalKernel,
    steps: int,
    init: int,
    seed,
    debug_check_energy: bool = False,
) -> ChainTrace:
    """Run a fresh chain for ``steps`` proposals and record everything.

    The trace is fully determined by (target, kernel, init, seed).
    With ``debug_check_energy`` the cached energy is recomputed from
    scratch every 1000 steps and must agree to 1e-12.
    """
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    n = target.instance.n
    table = all_energies(target.instance) if n <= ENUMERATION_CAP else None
    chain = init_chain(target, init, seed)
    if table is not None:
        chain.current_energy = float(table[chain.current])

    states = np.empty(steps, dtype=np.int64)
    energies = np.empty(steps)
    mags = np.empty(steps)
    probs = np.empty(steps)
    accepted = np.empty(steps, dtype=bool)
    for t in range(steps):
        a, ok = metropolis_step(chain, kernel, target, energy_table=table)
        states[t] = chain.current
        energies[t] = chain.current_energy
        mags[t] = magnetization(chain.current, n)
        probs[t] = a
        accepted[t] = ok
        if debug_check_energy and (t + 1) % 1000 == 0:
            fresh = energy(target.instance, chain.current)
            if abs(fresh - chain.current_energy) > 1e-12 * max(1.0, abs(fresh)):
                raise AssertionError(
                    f"energy cache diverged at step {t + 1}: {chain.current_energy} vs {fresh}"
                )
    return ChainTrace(states, energies, mags, probs, accepted)


def random_initial_state(n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1 << n))


def _ar_samples(
    target: BoltzmannTarget,
    kernel: ProposalKernel,
    m: int,
    init: int | None,
    seed,
    burn_in: int,
    use_accept_indicator: bool,
) -> np.ndarray:
    if m < 1:
        raise ValueError(f"need at least one step, got m={m}")
    n = target.instance.n
    rng = np.random.default_rng(seed)
    if init is None:
        init = random_initial_state(n, rng)
    table = all_energies(target.instance) if n <= ENUMERATION_CAP else None
    chain = ChainState(
        current=int(init),
        current_energy=float(table[init]) if table is not None else energy(target.instance, init),
        rng=rng,
    )
    samples = np.empty(m)
    for t in range(burn_in + m):
        a, ok = metropolis_step(chain, kernel, target, energy_table=table)
        if t >= burn_in:
            samples[t - burn_in] = float(ok) if use_accept_indicator else a
    return samples


def estimate_ar(
    target: BoltzmannTarget,
    kernel: ProposalKernel,
    m: int,
    init: int | None = None,
    seed=None,
    burn_in: int = 0,
    use_accept_indicator: bool = False,
) -> float:
    """Acceptance rate estimated as the mean of A over a fresh m-step chain.

    By default the chain starts from a uniformly random configuration
    (drawn from the same seeded rng the chain then uses) and no steps
    are discarded.  ``use_accept_indicator`` switches to averaging the
    binary accept flag instead of A (higher variance, same mean).
    """
    samples = _ar_samples(target, kernel, m, init, seed, burn_in, use_accept_indicator)
    return float(samples.mean())


def estimate_ar_stats(
    target: BoltzmannTarget,
    kernel: ProposalKernel,
    m: int,
    init: int | None = None,
    seed=None,
    burn_in: int = 0,
    n_batches: int = 10,
) -> tuple[float, float]:
    """Acceptance-rate estimate together with a batch-means standard error.

    Splitting the chain into batches keeps the error estimate honest
    when successive acceptance probabilities are correlated (batch
    count shrinks to the step count for very short chains).
    """
    samples = _ar_samples(target, kernel, m, init, seed, burn_in, False)
    mean = float(samples.mean())
    b = min(n_batches, len(samples))
    if b < 2:
        return mean, 0.5  # a single observation of a [0, 1] quantity
    batches = np.array_split(samples, b)
    batch_means = np.array([batch.mean() for batch in batches])
    se = float(batch_means.std(ddof=1) / np.sqrt(b))
    return mean, se


def running_mean_magnetization(traces: list[ChainTrace], burn_in: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Cross-chain mean and std of the running magnetization estimate.

    Within each chain, entry t is the mean magnetization over steps
    burn_in..t.  Across chains, the per-step mean and sample standard
    deviation (ddof=1) are returned; both arrays have length
    steps - burn_in.
    """
    if not traces:
        raise ValueError("need at least one chain trace")
    steps = len(traces[0])
    if any(len(tr) != steps for tr in traces):
        raise ValueError("all traces must have the same length")
    if not 0 <= burn_in < steps:
        raise ValueError(f"burn_in {burn_in} must be in [0, {steps})")
    running = np.empty((len(traces), steps - burn_in))
    counts = np.arange(1, steps - burn_in + 1)
    for i, tr in enumerate(traces):
        running[i] = np.cumsum(tr.magnetizations[burn_in:]) / counts
    mean = running.mean(axis=0)
    std = running.std(axis=0, ddof=1) if len(traces) > 1 else np.zeros(steps - burn_in)
    return mean, std
