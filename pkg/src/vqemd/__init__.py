"""VQE-driven ab initio molecular dynamics of small hydrogen systems."""

__version__ = "0.1.0"

from .chem import (
    AOIntegrals,
    BasisShell,
    FermionHamiltonian,
    MOIntegrals,
    Molecule,
    boys_f0,
    build_fermionic_hamiltonian,
    build_hcb_hamiltonian,
    compute_ao_integrals,
    h2_molecule,
    h3plus_molecule,
    run_rhf,
)
from .forces import (
    ForceEstimate,
    ForceOperatorSet,
    LanczosSettings,
    build_force_operators,
    centered_fd_force,
    exact_reference_force,
    hf_force,
    lanczos_expectation,
    scan_lanczos_d,
)
from .md import (
    MDConfig,
    Trajectory,
    TrajectoryFrame,
    analyze_trajectory,
    geometry_optimize,
    run_langevin,
    run_nve,
)
from .pauli import (
    MeasurementGroup,
    PauliString,
    PauliSum,
    exact_diagonalize,
    find_z2_and_taper,
    jordan_wigner,
    parity_two_qubit_reduction,
    pauli_multiply,
    qwc_group,
)
from .pipeline import HamiltonianPipeline
from .qsim import (
    Circuit,
    CountsTable,
    NoiseModel,
    build_ry_ansatz,
    calibrate_readout_mitigation,
    estimate_expectations_with_covariance,
    evolve_density_with_noise,
    evolve_statevector,
    load_athens_model,
    sample_counts,
)
from .vqe import QuantumBackend, VQEResult, evaluate_observables, vqe_minimize
