"""Layered simulation of the symmetric alternating-operator proposal circuit.

The circuit is U = V^T V with

    V = U_C(g_p) U_B(b_p) ... U_C(g_1) U_B(b_1),

where U_B is a uniform X rotation on every qubit and U_C is a diagonal
phase drawn from a precomputed table proportional to the classical
energies.  U_C is diagonal and each single-qubit X rotation is a
symmetric matrix, so V^T is obtained by reversing the layer order
without conjugating anything.  U = U^T then holds for any parameters,
which is what makes the induced proposal distribution symmetric.

Angle convention: circuit parameters are rotation-gate angles, i.e. a
mixer angle beta advances every qubit by exp(-i (beta/2) X) and a phase
angle gamma multiplies basis state z by exp(-i (gamma/2) * table[z]).
This is the usual half-turn gate convention; all tuned hyperparameters
(search ranges, depth scaling) are calibrated in these units.  The raw
layer primitives :func:`apply_mixer_layer` and
:func:`apply_problem_layer` take the plain exponent angle
(exp(-i * angle * generator)); the circuit assembly halves its
parameters before calling them.

States are arrays of 2**n complex amplitudes.  A trailing axis, when
present, carries a batch of independent states, which lets one build
full circuit matrices by driving the identity through the layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ising import SpinGlassInstance, all_energies


class DegenerateHamiltonianError(ValueError):
    """All couplings and fields vanish; the layer balance is undefined."""


def alpha_norm(instance: SpinGlassInstance) -> float:
    """Frobenius-norm ratio balancing the mixer against the phase layer.

    Distinct Pauli strings are orthogonal under the trace inner product,
    so the ratio collapses to sqrt(n / (sum J^2 + sum h^2)) without ever
    forming a 2**n dimensional matrix.
    """
    sq = float(instance.couplings @ instance.couplings + instance.fields @ instance.fields)
    if sq == 0.0:
        raise DegenerateHamiltonianError(
            "degenerate Hamiltonian: all couplings and fields are zero"
        )
    return math.sqrt(instance.n / sq)


@dataclass(frozen=True)
class PhaseTable:
    """Per-basis-state phase angles: entry z is alpha * E(z).

    Recomputable from the instance alone; immutable and shareable.
    """

    n: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (1 << self.n,):
            raise ValueError(
                f"phase table for n={self.n} needs {1 << self.n} entries, got {entries.shape}"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("phase table entries must be finite")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)


def build_phase_table(instance: SpinGlassInstance) -> PhaseTable:
    """Phase table alpha * E(z) for every basis state of the instance."""
    alpha = alpha_norm(instance)
    return PhaseTable(n=instance.n, entries=alpha * all_energies(instance))


@dataclass(frozen=True)
class QaoaParameters:
    """Angles (betas, gammas) of a depth-p alternating circuit.

    ``single_theta`` records, when set, that every entry of both vectors
    equals that one value (the single-parameter restriction used by the
    acceptance-rate search).
    """

    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    single_theta: float | None = None

    def __post_init__(self):
        if len(self.betas) != len(self.gammas):
            raise ValueError(
                f"betas and gammas must have equal length, got {len(self.betas)} and {len(self.gammas)}"
            )
        if len(self.betas) == 0:
            raise ValueError("depth p must be at least 1")
        if self.single_theta is not None:
            theta = self.single_theta
            if any(b != theta for b in self.betas) or any(g != theta for g in self.gammas):
                raise ValueError("single_theta set but betas/gammas are not all equal to it")

    @property
    def p(self) -> int:
        return len(self.betas)

    @classmethod
    def uniform(cls, theta: float, p: int) -> "QaoaParameters":
        """All 2p angles set to the same value theta."""
        return cls(betas=(float(theta),) * p, gammas=(float(theta),) * p, single_theta=float(theta))


def basis_state(z: int, n: int) -> np.ndarray:
    """One-hot statevector |z> on n qubits."""
    if not 0 <= z < (1 << n):
        raise ValueError(f"basis index {z} out of range for n={n}")
    state = np.zeros(1 << n, dtype=complex)
    state[z] = 1.0
    return state


def num_qubits(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"leading axis {dim} is not a power of two")
    return n


def apply_mixer_layer(state: np.ndarray, beta: float) -> np.ndarray:
    """Apply exp(-i beta X) to every qubit; returns a new array.

    Per qubit this is (a, b) -> (a cos(beta) - i b sin(beta),
    b cos(beta) - i a sin(beta)).  Works on a single state (dim,) or a
    batch (dim, m); the batch case applies the layer to each column.
    """
    n = num_qubits(state)
    out = np.array(state, dtype=complex, copy=True)
    dim = out.shape[0]
    c = math.cos(beta)
    s = -1j * math.sin(beta)
    for j in range(n):
        # Row-major reshape exposes bit j of the state index as axis 1.
        v = out.reshape(dim >> (j + 1), 2, -1)
        lo = v[:, 0].copy()
        v[:, 0] = c * lo + s * v[:, 1]
        v[:, 1] = c * v[:, 1] + s * lo
    return out


def apply_problem_layer(state: np.ndarray, gamma: float, table: PhaseTable) -> np.ndarray:
    """Multiply amplitude z by exp(-i gamma table[z]); returns a new array.

    Diagonal, so applying it alone never changes measurement
    probabilities.
    """
    if state.shape[0] != table.entries.shape[0]:
        raise ValueError(
            f"state dimension {state.shape[0]} does not match phase table ({table.entries.shape[0]})"
        )
    phases = np.exp(-1j * gamma * table.entries)
    if state.ndim > 1:
        phases = phases.reshape((-1,) + (1,) * (state.ndim - 1))
    return state * phases


def apply_symmetric_circuit(state: np.ndarray, params: QaoaParameters, table: PhaseTable) -> np.ndarray:
    """Drive a state (or batch of states) through all 4p layers of V^T V.

    Layer order, first applied to last: U_B(b_1), U_C(g_1), ...,
    U_B(b_p), U_C(g_p), then the mirror U_C(g_p), U_B(b_p), ...,
    U_C(g_1), U_B(b_1).  Gate angles are halved here (see module
    docstring for the convention).
    """
    halves = [(b / 2.0, g / 2.0) for b, g in zip(params.betas, params.gammas)]
    for b, g in halves:
        state = apply_mixer_layer(state, b)
        state = apply_problem_layer(state, g, table)
    for b, g in reversed(halves):
        state = apply_problem_layer(state, g, table)
        state = apply_mixer_layer(state, b)
    return state


def apply_symmetric_qaoa(z: int, params: QaoaParameters, table: PhaseTable) -> np.ndarray:
    """Output state U|z> of the full symmetric circuit."""
    return apply_symmetric_circuit(basis_state(z, table.n), params, table)


def circuit_matrix(params: QaoaParameters, table: PhaseTable) -> np.ndarray:
    """Full 2**n x 2**n matrix of U; column z holds U|z>.

    Same layer code as :func:`apply_symmetric_qaoa`, batched over all
    basis states at once.
    """
    return apply_symmetric_circuit(np.eye(1 << table.n, dtype=complex), params, table)


def measure_probabilities(state: np.ndarray) -> np.ndarray:
    """Computational-basis probabilities |amplitude|^2 (per column for batches)."""
    return np.abs(state) ** 2


def sample(state: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one basis index with probability |amplitude|^2 (inverse CDF)."""
    probs = measure_probabilities(state)
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    z = int(np.searchsorted(cdf, u, side="right"))
    return min(z, probs.shape[0] - 1)
