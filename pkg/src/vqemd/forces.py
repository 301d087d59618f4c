"""Force estimators, Pulay-error measurement, Lanczos mitigation and the force
covariance consumed by the Langevin thermostat.

Estimators return the physical force F = -dE/dR in Ha/angstrom.  The
displaced-Hamiltonian difference operator D = (H+ - H-)/(2 ΔR) measures the
energy gradient, so estimators negate its expectation value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chem import Molecule
from .errors import InconsistentOperatorError, LanczosSingularError, SymmetryViolationError
from .pauli import PauliSum, exact_diagonalize, ground_state_degeneracy, sandwich
from .pipeline import HamiltonianPipeline, MappingResult
from .vqe import QuantumBackend, evaluate_observables, vqe_minimize

_DEN_FLOOR = 1e-10


@dataclass
class LanczosSettings:
    """Shift parameters for the (H-d)O(H-d)/(H-d)^2 mitigated estimator."""

    pes_d: float = -0.4
    forces_d: float = -0.1


@dataclass
class ForceOperatorSet:
    """Gradient operators D_{I,alpha} = (H+ - H-)/(2 ΔR), atom-major order."""

    operators: list
    delta_r: float
    base: MappingResult
    n_atoms: int

    def __post_init__(self):
        n = self.base.hamiltonian.n
        if any(op.n != n for op in self.operators):
            raise ValueError("force operators must share the qubit count")


@dataclass
class ForceEstimate:
    force: np.ndarray        # (3N,) Ha/angstrom, physical sign
    covariance: np.ndarray   # (3N, 3N) Ha^2/angstrom^2
    estimator: str
    info: dict = field(default_factory=dict)

    @property
    def per_atom(self) -> np.ndarray:
        return self.force.reshape(-1, 3)

    @property
    def variance_diagonal(self) -> np.ndarray:
        return np.diag(self.covariance).copy()


def build_force_operators(
    mol: Molecule,
    delta_r: float,
    pipeline: HamiltonianPipeline,
    base: MappingResult | None = None,
) -> ForceOperatorSet:
    """Rebuild the mapped Hamiltonian at R ± ΔR·e along every direction.

    All displaced builds are phase/ordering-matched to the undisplaced MOs;
    6N classical integral builds, zero extra quantum state preparations.
    """
    if not 1e-5 <= delta_r <= 1e-1:
        raise ValueError("delta_r must lie in [1e-5, 1e-1] angstrom")
    if base is None:
        base = pipeline.build(mol)
    operators = []
    for atom in range(mol.n_atoms):
        for axis in range(3):
            try:
                plus = pipeline.build(mol.displaced(atom, axis, +delta_r), reference=base.reference)
                minus = pipeline.build(mol.displaced(atom, axis, -delta_r), reference=base.reference)
            except SymmetryViolationError as exc:
                raise InconsistentOperatorError(
                    f"mapping sector flipped at atom {atom} axis {axis} "
                    f"(ΔR={delta_r} Å, geometry {mol.positions.tolist()}): {exc}"
                ) from exc
            operators.append((plus.hamiltonian - minus.hamiltonian) * (0.5 / delta_r))
    return ForceOperatorSet(operators=operators, delta_r=delta_r, base=base, n_atoms=mol.n_atoms)


def _ratio_covariance(numerators, denominator, cov):
    """Delta-method covariance of elementwise ratios n_i / d.

    cov is over the stacked vector (n_1..n_k, d).
    """
    k = len(numerators)
    jac = np.zeros((k, k + 1))
    for i in range(k):
        jac[i, i] = 1.0 / denominator
        jac[i, k] = -numerators[i] / denominator**2
    return jac @ cov @ jac.T


def hf_force(
    ops: ForceOperatorSet,
    params,
    backend: QuantumBackend,
    lanczos_d: float | None = None,
    key=(),
) -> ForceEstimate:
    """Hellmann-Feynman FD force from one shared dataset at the VQE optimum."""
    if lanczos_d is None:
        values, cov = evaluate_observables(ops.operators, params, backend, key=key)
        return ForceEstimate(force=-values, covariance=cov, estimator="HF-FD")
    shifted = ops.base.hamiltonian - lanczos_d
    den = shifted * shifted
    nums = [sandwich(shifted, op) for op in ops.operators]
    values, cov = evaluate_observables(nums + [den], params, backend, key=key)
    dval = values[-1]
    if abs(dval) < _DEN_FLOOR:
        raise LanczosSingularError(f"Lanczos denominator {dval:.3e} at d={lanczos_d}")
    ratios = values[:-1] / dval
    cov_f = _ratio_covariance(values[:-1], dval, cov)
    return ForceEstimate(
        force=-ratios,
        covariance=cov_f,
        estimator="HF-FD",
        info={"lanczos_d": lanczos_d, "n_psi0": float(np.sqrt(max(dval, 0.0)))},
    )


def measure_energy_and_forces(
    ops: ForceOperatorSet,
    params,
    backend: QuantumBackend,
    lanczos: LanczosSettings | None = None,
    key=(),
):
    """Potential energy and forces from a single measured dataset.

    Returns (e_pot, e_pot_variance, ForceEstimate).  With Lanczos settings the
    energy uses the pes_d shift, the forces the forces_d shift; all numerators
    and denominators are still measured from one union-grouped dataset.
    """
    h = ops.base.hamiltonian
    k = len(ops.operators)
    if lanczos is None:
        values, cov = evaluate_observables([h] + ops.operators, params, backend, key=key)
        fest = ForceEstimate(force=-values[1:], covariance=cov[1:, 1:], estimator="HF-FD")
        return float(values[0]), float(cov[0, 0]), fest

    shift_e = h - lanczos.pes_d
    shift_f = h - lanczos.forces_d
    batch = [sandwich(shift_e, h), shift_e * shift_e]
    batch += [sandwich(shift_f, op) for op in ops.operators]
    batch.append(shift_f * shift_f)
    values, cov = evaluate_observables(batch, params, backend, key=key)

    den_e, den_f = values[1], values[-1]
    if abs(den_e) < _DEN_FLOOR or abs(den_f) < _DEN_FLOOR:
        raise LanczosSingularError("Lanczos denominator vanished")
    # jacobian of (E, F_1..F_k) w.r.t. the measured batch
    jac = np.zeros((k + 1, k + 3))
    jac[0, 0] = 1.0 / den_e
    jac[0, 1] = -values[0] / den_e**2
    for i in range(k):
        jac[1 + i, 2 + i] = 1.0 / den_f
        jac[1 + i, k + 2] = -values[2 + i] / den_f**2
    cov_out = jac @ cov @ jac.T
    e_pot = float(values[0] / den_e)
    forces = values[2 : 2 + k] / den_f
    fest = ForceEstimate(
        force=-forces,
        covariance=cov_out[1:, 1:],
        estimator="HF-FD",
        info={"lanczos_pes_d": lanczos.pes_d, "lanczos_forces_d": lanczos.forces_d},
    )
    return e_pot, float(cov_out[0, 0]), fest


def centered_fd_force(
    mol: Molecule,
    delta_r: float,
    backend: QuantumBackend,
    pipeline: HamiltonianPipeline,
    base: MappingResult | None = None,
    base_params=None,
    key=(),
) -> ForceEstimate:
    """Centered finite differences of 6N independent VQE energies.

    Statistically expensive by construction: Var(F) = (Var E+ + Var E-)/(2ΔR)^2.
    """
    if not 1e-5 <= delta_r <= 1e-1:
        raise ValueError("delta_r must lie in [1e-5, 1e-1] angstrom")
    if base is None:
        base = pipeline.build(mol)
    if base_params is None:
        base_params = vqe_minimize(base.hamiltonian, backend, key=(*key, 0)).parameters
    forces = []
    variances = []
    idx = 0
    for atom in range(mol.n_atoms):
        for axis in range(3):
            energies = []
            var = 0.0
            for sgn in (+1.0, -1.0):
                idx += 1
                disp = pipeline.build(mol.displaced(atom, axis, sgn * delta_r), reference=base.reference)
                res = vqe_minimize(
                    disp.hamiltonian, backend, init=base_params, warm=True, key=(*key, idx)
                )
                energies.append(res.energy)
                var += res.energy_variance
            forces.append(-(energies[0] - energies[1]) / (2.0 * delta_r))
            variances.append(var / (2.0 * delta_r) ** 2)
    return ForceEstimate(
        force=np.array(forces),
        covariance=np.diag(variances),
        estimator="centered-FD",
        info={"delta_r": delta_r},
    )


@dataclass
class ExactForceReference:
    """Exact PES-derivative force, MR Hellmann-Feynman force, Pulay error."""

    exact: ForceEstimate
    mr: ForceEstimate
    pulay_error: float
    degenerate: bool = False


def exact_reference_force(
    mol: Molecule, delta_r: float, pipeline: HamiltonianPipeline
) -> ExactForceReference:
    """Noiseless reference forces from dense diagonalization.

    (a) centered differences of exact ground energies (includes the basis
    response), (b) <E0|D|E0> with the same ΔR (Hellmann-Feynman only); their
    relative difference is the neglected Pulay contribution.
    """
    base = pipeline.build(mol)
    degenerate = ground_state_degeneracy(base.hamiltonian) > 1
    _, psi0 = exact_diagonalize(base.hamiltonian)
    ops = build_force_operators(mol, delta_r, pipeline, base=base)
    f_exact = []
    f_mr = []
    for atom in range(mol.n_atoms):
        for axis in range(3):
            e_plus, _ = exact_diagonalize(
                pipeline.build(mol.displaced(atom, axis, +delta_r), reference=base.reference).hamiltonian
            )
            e_minus, _ = exact_diagonalize(
                pipeline.build(mol.displaced(atom, axis, -delta_r), reference=base.reference).hamiltonian
            )
            f_exact.append(-(e_plus - e_minus) / (2.0 * delta_r))
            op = ops.operators[atom * 3 + axis]
            f_mr.append(-op.expectation(psi0))
    f_exact = np.array(f_exact)
    f_mr = np.array(f_mr)
    zeros = np.zeros((len(f_exact), len(f_exact)))
    norm_mr = np.linalg.norm(f_mr)
    pulay = float(np.linalg.norm(f_exact - f_mr) / norm_mr) if norm_mr > 0 else 0.0
    return ExactForceReference(
        exact=ForceEstimate(force=f_exact, covariance=zeros.copy(), estimator="exact"),
        mr=ForceEstimate(force=f_mr, covariance=zeros.copy(), estimator="HF-FD"),
        pulay_error=pulay,
        degenerate=degenerate,
    )


def lanczos_expectation(
    observable: PauliSum,
    h: PauliSum,
    d: float,
    params,
    backend: QuantumBackend,
    key=(),
):
    """Mitigated expectation <(H-d)O(H-d)>/<(H-d)^2> with diagnostics.

    Diagnostics report N_psi0 = sqrt(<(H-d)^2>), the ratio |L_d(H)-d|/N_psi0
    and whether the ground-state-amplification proxy condition holds.
    """
    if not np.isfinite(d):
        raise ValueError("d must be finite")
    if observable.n != h.n:
        raise ValueError("observable and Hamiltonian qubit counts differ")
    shifted = h - d
    den = shifted * shifted
    num_o = sandwich(shifted, observable)
    batch = [num_o, den]
    same = observable is h
    if not same:
        batch.append(sandwich(shifted, h))
    values, cov = evaluate_observables(batch, params, backend, key=key)
    dval = values[1]
    if abs(dval) < _DEN_FLOOR:
        raise LanczosSingularError(f"Lanczos denominator {dval:.3e}: d={d} too close to an eigenvalue")
    value = float(values[0] / dval)
    lanczos_h = value if same else float(values[2] / dval)
    n_psi0 = float(np.sqrt(max(dval, 0.0)))
    ratio = abs(lanczos_h - d) / n_psi0 if n_psi0 > 0 else np.inf
    variance = float(_ratio_covariance(values[:1], dval, cov[np.ix_([0, 1], [0, 1])])[0, 0])
    diagnostics = {
        "n_psi0": n_psi0,
        "lanczos_h": lanczos_h,
        "ratio": ratio,
        "condition_ok": bool(ratio > 1.0 and d > lanczos_h),
        "variance": variance,
    }
    return value, diagnostics


def scan_lanczos_d(
    pipeline: HamiltonianPipeline,
    geometries,
    d_values,
    backend: QuantumBackend,
    key=(),
):
    """Fig.-9-style scan: (R, d, ΔE, σ(E)) rows, one VQE optimum per geometry."""
    rows = []
    for gi, mol in enumerate(geometries):
        base = pipeline.build(mol)
        e_exact, _ = exact_diagonalize(base.hamiltonian)
        result = vqe_minimize(base.hamiltonian, backend, key=(*key, gi))
        r_label = float(
            np.linalg.norm(np.subtract(mol.atoms[1][1], mol.atoms[0][1]))
        )
        for di, d in enumerate(d_values):
            value, diag = lanczos_expectation(
                base.hamiltonian,
                base.hamiltonian,
                float(d),
                result.parameters,
                backend,
                key=(*key, gi, 100 + di),
            )
            rows.append(
                {
                    "r_angstrom": r_label,
                    "d": float(d),
                    "delta_e": value - e_exact,
                    "sigma_e": float(np.sqrt(max(diag["variance"], 0.0))),
                    "n_psi0": diag["n_psi0"],
                    "condition_ok": diag["condition_ok"],
                }
            )
    return rows
