"""Spin-glass instances, energies, and exact Boltzmann quantities.

A configuration of n spins is stored as a plain integer index z in
[0, 2**n).  Bit j of z (the j-th least significant bit) encodes spin j:
bit value 0 means x_j = +1 and bit value 1 means x_j = -1.  This choice
matches Z|0> = +|0>, so the diagonal of the diagonal (problem)
Hamiltonian in the computational basis equals the classical energy.
The convention is fixed here and used everywhere downstream.

Random instances draw every coupling and field independently from the
standard normal distribution using NumPy's ``default_rng`` (PCG64).
The generator is part of the contract: identical (n, seed) pairs give
bit-identical instances across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

#: Largest n for which exact enumeration over all 2**n states is attempted.
ENUMERATION_CAP = 20

#: Chunk size (number of states) for enumeration loops, to bound memory.
_CHUNK = 1 << 16


class EnumerationCapError(ValueError):
    """Exact enumeration requested for a system above the configured cap."""


def pair_index(j: int, k: int) -> int:
    """Position of the coupling J_jk (j > k) in the flat coupling vector.

    Pairs are stored row-major in the order (1,0), (2,0), (2,1), (3,0), ...
    """
    if not j > k >= 0:
        raise ValueError(f"pair_index requires j > k >= 0, got ({j}, {k})")
    return j * (j - 1) // 2 + k


@dataclass(frozen=True)
class SpinGlassInstance:
    """All-to-all spin glass defined by couplings {J_jk} and fields {h_j}.

    ``couplings`` holds the n(n-1)/2 values J_jk for j > k in the
    :func:`pair_index` order; ``fields`` holds h_0 .. h_{n-1}.  ``seed``
    records the generator seed the instance was built from (provenance
    only; loading an instance from file keeps the recorded seed).
    Instances are immutable after construction and safe to share across
    workers.
    """

    n: int
    couplings: np.ndarray
    fields: np.ndarray
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one spin, got n={self.n}")
        couplings = np.asarray(self.couplings, dtype=float)
        fields = np.asarray(self.fields, dtype=float)
        expected = self.n * (self.n - 1) // 2
        if couplings.shape != (expected,):
            raise ValueError(
                f"expected {expected} couplings for n={self.n}, got shape {couplings.shape}"
            )
        if fields.shape != (self.n,):
            raise ValueError(f"expected {self.n} fields, got shape {fields.shape}")
        if not (np.all(np.isfinite(couplings)) and np.all(np.isfinite(fields))):
            raise ValueError("couplings and fields must all be finite")
        couplings.flags.writeable = False
        fields.flags.writeable = False
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "fields", fields)

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric coupling matrix with zero diagonal."""
        a = np.zeros((self.n, self.n))
        rows, cols = np.tril_indices(self.n, k=-1)
        a[rows, cols] = self.couplings
        a[cols, rows] = self.couplings
        return a

    @property
    def num_states(self) -> int:
        return 1 << self.n


@dataclass(frozen=True)
class BoltzmannTarget:
    """Boltzmann distribution of an instance at temperature T."""

    instance: SpinGlassInstance
    temperature: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


def generate_instance(n: int, seed: int) -> SpinGlassInstance:
    """Draw a random instance with standard-normal couplings and fields.

    The couplings are drawn first (in :func:`pair_index` order), then the
    fields, from ``numpy.random.default_rng(seed)``.
    """
    if n < 1:
        raise ValueError(f"need at least one spin, got n={n}")
    rng = np.random.default_rng(seed)
    couplings = rng.standard_normal(n * (n - 1) // 2)
    fields = rng.standard_normal(n)
    return SpinGlassInstance(n=n, couplings=couplings, fields=fields, seed=int(seed))


def spins(z: int, n: int) -> np.ndarray:
    """Spin values x_j in {+1, -1} of configuration index z."""
    if not 0 <= z < (1 << n):
        raise ValueError(f"state index {z} out of range for n={n}")
    bits = (z >> np.arange(n)) & 1
    return 1.0 - 2.0 * bits


def _spin_block(start: int, stop: int, n: int) -> np.ndarray:
    """Spin matrix (stop-start, n) for the contiguous index range."""
    z = np.arange(start, stop, dtype=np.int64)
    bits = (z[:, None] >> np.arange(n)) & 1
    return 1.0 - 2.0 * bits


def energy(instance: SpinGlassInstance, z: int) -> float:
    """Classical energy -sum_{j>k} J_jk x_j x_k - sum_j h_j x_j."""
    x = spins(z, instance.n)
    a = instance.coupling_matrix()
    # x.A.x double counts each pair, hence the factor 1/2.
    return float(-0.5 * x @ (a @ x) - instance.fields @ x)


def all_energies(instance: SpinGlassInstance, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Energies of all 2**n configurations, indexed by configuration.

    Chunked so peak memory stays bounded for n near the cap.
    """
    n = instance.n
    if n > cap:
        raise EnumerationCapError(f"enumeration infeasible: n={n} exceeds cap {cap}")
    a = instance.coupling_matrix()
    h = instance.fields
    size = 1 << n
    out = np.empty(size)
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        s = _spin_block(start, stop, n)
        out[start:stop] = -0.5 * ((s @ a) * s).sum(axis=1) - s @ h
    return out


def magnetization(z: int, n: int) -> float:
    """Mean spin (1/n) sum_j x_j of configuration z, in [-1, 1]."""
    ones = int(z).bit_count()
    return (n - 2 * ones) / n


def all_magnetizations(n: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Magnetization of every configuration, indexed by configuration."""
    if n > cap:
        raise EnumerationCapError(f"enumeration infeasible: n={n} exceeds cap {cap}")
    size = 1 << n
    out = np.empty(size)
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        out[start:stop] = _spin_block(start, stop, n).mean(axis=1)
    return out


def log_boltzmann_weights(target: BoltzmannTarget, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Unnormalized log weights -E(z)/T for all configurations."""
    return -all_energies(target.instance, cap=cap) / target.temperature


def exact_distribution(target: BoltzmannTarget, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact Boltzmann probabilities for all 2**n states.

    Normalization happens in the log domain (log-sum-exp), so low
    temperatures cannot overflow.  Entries whose log probability falls
    below about -745 underflow to exactly 0.0 in double precision; they
    are genuinely negligible at that point.
    """
    logw = log_boltzmann_weights(target, cap=cap)
    return np.exp(logw - logsumexp(logw))


def exact_average_magnetization(target: BoltzmannTarget, cap: int = ENUMERATION_CAP) -> float:
    """Thermal average of the magnetization, sum_z mu(z) m(z)."""
    mu = exact_distribution(target, cap=cap)
    return float(mu @ all_magnetizations(target.instance.n, cap=cap))


def save_instance(instance: SpinGlassInstance, path: str | Path) -> None:
    """Write an instance as JSON ({n, seed, couplings, fields}).

    Couplings appear in :func:`pair_index` order; floats use shortest
    round-trip repr, so identical instances serialize byte-identically.
    """
    payload = {
        "n": instance.n,
        "seed": instance.seed,
        "couplings": [float(v) for v in instance.couplings],
        "fields": [float(v) for v in instance.fields],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_instance(path: str | Path) -> SpinGlassInstance:
    """Read an instance written by :func:`save_instance`."""
    payload = json.loads(Path(path).read_text())
    return SpinGlassInstance(
        n=int(payload["n"]),
        couplings=np.asarray(payload["couplings"], dtype=float),
        fields=np.asarray(payload["fields"], dtype=float),
        seed=int(payload["seed"]),
    )
