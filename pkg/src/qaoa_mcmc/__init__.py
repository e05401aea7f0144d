"""Metropolis Monte Carlo over Ising spin glasses with quantum-circuit proposals.

The package is organized by concern:

* :mod:`~qaoa_mcmc.ising` -- instances, energies, exact Boltzmann sums
* :mod:`~qaoa_mcmc.statevector` -- the symmetric proposal circuit on 2**n amplitudes
* :mod:`~qaoa_mcmc.proposals` -- sampled and exact proposal kernels
* :mod:`~qaoa_mcmc.mcmc` -- Metropolis chains and on-line estimators
* :mod:`~qaoa_mcmc.spectral` -- exact transition matrices and spectral gaps
* :mod:`~qaoa_mcmc.theta_opt` -- acceptance-rate-minimizing parameter search
* :mod:`~qaoa_mcmc.harness` -- seeded sweeps, fits, CSV persistence
* :mod:`~qaoa_mcmc.cli` -- the ``qaoa-mcmc`` command
"""

from .ising import (
    ENUMERATION_CAP,
    BoltzmannTarget,
    EnumerationCapError,
    SpinGlassInstance,
    all_energies,
    energy,
    exact_average_magnetization,
    exact_distribution,
    generate_instance,
    load_instance,
    magnetization,
    save_instance,
)
from .mcmc import ChainState, ChainTrace, estimate_ar, metropolis_step, run_chain, running_mean_magnetization
from .proposals import LocalKernel, QaoaKernel, RandomThetaKernel, UniformKernel
from .spectral import (
    ReducibleChainError,
    absolute_spectral_gap,
    build_transition_matrix,
    exact_ar,
    spectral_gap,
    symmetrize,
    verify_detailed_balance,
)
from .statevector import (
    DegenerateHamiltonianError,
    PhaseTable,
    QaoaParameters,
    alpha_norm,
    apply_mixer_layer,
    apply_problem_layer,
    apply_symmetric_qaoa,
    basis_state,
    build_phase_table,
    circuit_matrix,
    measure_probabilities,
    sample,
)
from .theta_opt import (
    DegenerateLandscapeError,
    OptimizedTheta,
    ThetaSearchConfig,
    find_theta_star,
    theta_max_for_depth,
)

__version__ = "0.1.0"
