"""Geometry-to-qubit-Hamiltonian pipeline with frozen mapping conventions.

A pipeline owns the basis data, the fermion-to-qubit mapping choice and, for
tapered mappings, the symmetry generators and sector found at the first
geometry; every later build reuses them so that displaced and successive MD
geometries produce operators in one consistent qubit frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chem import (
    MOReference,
    Molecule,
    align_to_reference,
    build_fermionic_hamiltonian,
    build_hcb_hamiltonian,
    build_shells,
    compute_ao_integrals,
    load_basis,
    run_rhf,
)
from .pauli import PauliSum, find_z2_and_taper, jordan_wigner, parity_two_qubit_reduction

MAPPINGS = ("jw", "parity2", "hcb+taper")


@dataclass
class MappingResult:
    hamiltonian: PauliSum
    mo: object
    reference: MOReference
    info: dict = field(default_factory=dict)


class HamiltonianPipeline:
    def __init__(self, mapping: str = "parity2", basis: dict | None = None):
        if mapping not in MAPPINGS:
            raise ValueError(f"unknown mapping {mapping!r}; choose from {MAPPINGS}")
        self.mapping = mapping
        self.basis = basis if basis is not None else load_basis()
        self.generators = None
        self.sector = None

    def build(self, mol: Molecule, reference: MOReference | None = None) -> MappingResult:
        shells = build_shells(mol, self.basis)
        ao = compute_ao_integrals(mol, shells)
        guess = None
        if reference is not None:
            occ = mol.n_electrons // 2
            c_occ = reference.coefficients[:, :occ]
            guess = 2.0 * c_occ @ c_occ.T
        mo = run_rhf(ao, mol.n_electrons, density_guess=guess)
        if reference is not None:
            mo = align_to_reference(mo, ao, mol, shells, reference)

        if self.mapping == "jw":
            fermion = build_fermionic_hamiltonian(mo, 2 * mo.n_orbitals)
            h = jordan_wigner(fermion)
        elif self.mapping == "parity2":
            fermion = build_fermionic_hamiltonian(mo, 2 * mo.n_orbitals)
            h = parity_two_qubit_reduction(fermion, mol.n_electrons)
        else:  # hcb+taper
            hcb = build_hcb_hamiltonian(mo)
            h, generators, sector = find_z2_and_taper(
                hcb, sector=self.sector, generators=self.generators
            )
            if self.generators is None:
                self.generators = generators
                self.sector = sector

        info = {
            "mapping": self.mapping,
            "n_qubits": h.n,
            "sector": list(self.sector) if self.sector else None,
            "generators": [g.label() for g in self.generators] if self.generators else None,
        }
        return MappingResult(
            hamiltonian=h,
            mo=mo,
            reference=MOReference(mol=mol, shells=shells, coefficients=mo.coefficients),
            info=info,
        )
