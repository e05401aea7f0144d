"""Proposal kernels for the Metropolis chain, in sampled and exact form.

Every kernel here is symmetric (Q(x'|x) = Q(x|x')), which is the
condition that removes the Hastings correction from the acceptance
probability.  Kernels expose two views of the same distribution:

* ``propose(x, rng)`` draws one candidate state, and
* ``exact_matrix()`` returns the full 2**n x 2**n matrix with column x
  holding Q(.|x) (only feasible below the enumeration cap).

Kernels are immutable after construction; the rng is owned by the
caller (one per chain), so kernels can be shared across workers.
"""

from __future__ import annotations

import numpy as np

from .ising import EnumerationCapError, SpinGlassInstance
from .statevector import (
    PhaseTable,
    QaoaParameters,
    apply_symmetric_qaoa,
    build_phase_table,
    circuit_matrix,
    measure_probabilities,
    sample,
)

#: Default cap on n for building exact 2**n x 2**n kernel matrices.
MATRIX_CAP = 12

#: Largest n for which circuit kernels cache per-column sampling tables.
_COLUMN_CACHE_CAP = 10


def _check_matrix_cap(n: int, cap: int) -> None:
    if n > cap:
        raise EnumerationCapError(
            f"enumeration infeasible: exact kernel matrix needs n <= {cap}, got n={n}"
        )


class LocalKernel:
    """Flip one uniformly chosen spin.  Q(x|x) = 0."""

    kind = "local"
    symmetric = True

    def __init__(self, n: int):
        self.n = n

    def propose(self, x: int, rng: np.random.Generator) -> int:
        return x ^ (1 << int(rng.integers(self.n)))

    def exact_matrix(self, cap: int = MATRIX_CAP) -> np.ndarray:
        _check_matrix_cap(self.n, cap)
        dim = 1 << self.n
        q = np.zeros((dim, dim))
        z = np.arange(dim)
        for j in range(self.n):
            q[z ^ (1 << j), z] = 1.0 / self.n
        return q


class UniformKernel:
    """Propose any of the 2**n states with equal probability.

    The current state is included (Q(x|x) = 2**-n); self-proposals are
    always accepted and amount to a no-op.
    """

    kind = "uniform"
    symmetric = True

    def __init__(self, n: int):
        self.n = n

    def propose(self, x: int, rng: np.random.Generator) -> int:
        return int(rng.integers(1 << self.n))

    def exact_matrix(self, cap: int = MATRIX_CAP) -> np.ndarray:
        _check_matrix_cap(self.n, cap)
        dim = 1 << self.n
        return np.full((dim, dim), 1.0 / dim)


class QaoaKernel:
    """Propose by measuring the symmetric circuit applied to |x>.

    ``cache_columns`` (on by default for small systems) precomputes the
    cumulative distribution of every column of the exact kernel matrix
    the first time a proposal is drawn, then samples by inverse CDF.
    The sampled distribution is identical to running the circuit per
    step and costs one uniform draw either way, so chains stay
    deterministic per seed; pass ``cache_columns=False`` to force a
    statevector run on every proposal.
    """

    kind = "qaoa"
    symmetric = True

    def __init__(
        self,
        instance: SpinGlassInstance,
        params: QaoaParameters,
        cache_columns: bool = True,
        table: PhaseTable | None = None,
    ):
        self.instance = instance
        self.params = params
        self.n = instance.n
        if table is not None and table.n != instance.n:
            raise ValueError(f"phase table is for n={table.n}, instance has n={instance.n}")
        self.table: PhaseTable = table if table is not None else build_phase_table(instance)
        self._cache_columns = cache_columns and instance.n <= _COLUMN_CACHE_CAP
        self._column_cdf: np.ndarray | None = None

    @property
    def theta(self) -> float | None:
        return self.params.single_theta

    def _cdf_table(self) -> np.ndarray:
        if self._column_cdf is None:
            q = measure_probabilities(circuit_matrix(self.params, self.table))
            self._column_cdf = np.cumsum(q, axis=0)
        return self._column_cdf

    def propose(self, x: int, rng: np.random.Generator) -> int:
        if self._cache_columns:
            cdf = self._cdf_table()[:, x]
            u = rng.random() * cdf[-1]
            z = int(np.searchsorted(cdf, u, side="right"))
            return min(z, cdf.shape[0] - 1)
        return sample(apply_symmetric_qaoa(x, self.params, self.table), rng)

    def exact_matrix(self, cap: int = MATRIX_CAP) -> np.ndarray:
        _check_matrix_cap(self.n, cap)
        return measure_probabilities(circuit_matrix(self.params, self.table))


#: Sampling range for untuned-baseline angles.  One gate-angle period is
#: enough: the induced kernel's statistics are insensitive to extending
#: the range once the layers scramble fully.
RANDOM_THETA_RANGE = 2.0 * np.pi


class RandomThetaKernel(QaoaKernel):
    """Untuned baseline: every one of the 2p layer angles drawn at random.

    All angles are independent Uniform[0, 2pi) draws.  Freezing the draw
    at construction gives the kernel a well-defined transition matrix
    (and spectral gap) per seed.  With ``redraw_per_step`` a fresh angle
    vector is drawn from the chain rng on every proposal; that variant
    has no single exact matrix and is meant for chain-only runs.
    """

    kind = "random"

    def __init__(
        self,
        instance: SpinGlassInstance,
        p: int,
        seed: int,
        redraw_per_step: bool = False,
        cache_columns: bool = True,
    ):
        params = self._draw_params(np.random.default_rng(seed), p)
        super().__init__(
            instance,
            params,
            cache_columns=cache_columns and not redraw_per_step,
        )
        self.seed = seed
        self.redraw_per_step = redraw_per_step

    @staticmethod
    def _draw_params(rng: np.random.Generator, p: int) -> QaoaParameters:
        return QaoaParameters(
            betas=tuple(rng.uniform(0.0, RANDOM_THETA_RANGE, p)),
            gammas=tuple(rng.uniform(0.0, RANDOM_THETA_RANGE, p)),
        )

    def propose(self, x: int, rng: np.random.Generator) -> int:
        if self.redraw_per_step:
            params = self._draw_params(rng, self.params.p)
            return sample(apply_symmetric_qaoa(x, params, self.table), rng)
        return super().propose(x, rng)

    def exact_matrix(self, cap: int = MATRIX_CAP) -> np.ndarray:
        if self.redraw_per_step:
            raise ValueError(
                "per-step theta redraw has no fixed transition matrix; "
                "construct with redraw_per_step=False for spectral analysis"
            )
        return super().exact_matrix(cap=cap)


ProposalKernel = LocalKernel | UniformKernel | QaoaKernel


def check_proposal_matrix(q: np.ndarray, atol: float = 1e-10) -> None:
    """Validate kernel-matrix invariants: nonnegative, column-stochastic, symmetric."""
    if np.any(q < 0):
        raise ValueError("proposal matrix has negative entries")
    col = q.sum(axis=0)
    if np.max(np.abs(col - 1.0)) > atol:
        raise ValueError(f"proposal columns not normalized (max dev {np.max(np.abs(col - 1.0)):.2e})")
    if np.max(np.abs(q - q.T)) > atol:
        raise ValueError(f"proposal matrix not symmetric (max dev {np.max(np.abs(q - q.T)):.2e})")
