"""Classical electronic-structure front end.

STO-3G s-orbital integrals from analytic Gaussian formulas, restricted
Hartree-Fock, MO-basis integrals and second-quantized / hard-core-boson
Hamiltonian assembly.  Positions enter in angstrom and are converted to bohr
internally; all energies are in Hartree.

Integral conventions: the AO two-electron tensor is stored in chemists'
notation, eri[p, q, r, s] = (pq|rs); the MO tensor is stored in physics
notation, g[r, s, t, u] = <rs|tu> = ∫ r*(1) s*(2) r12^-1 t(1) u(2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import erf

from .constants import BOHR_PER_ANGSTROM
from .errors import GeometryError, SCFConvergenceError, SymmetryViolationError
from .pauli import PauliString, PauliSum


# ---------------------------------------------------------------------------
# molecule and basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Molecule:
    """Nuclear configuration: ((Z, (x, y, z)), ...) with positions in angstrom."""

    atoms: tuple
    charge: int = 0
    label: str = ""

    def __post_init__(self):
        atoms = tuple((int(z), tuple(float(c) for c in pos)) for z, pos in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(z != 1 for z, _ in atoms):
            raise GeometryError("hydrogen-only scope: all atomic numbers must be 1")
        n_elec = self.n_electrons
        if n_elec <= 0 or n_elec % 2:
            raise GeometryError(
                f"electron count {n_elec} must be positive and even (RHF closed shell)"
            )
        pos = self.positions
        for i in range(len(atoms)):
            for j in range(i + 1, len(atoms)):
                if np.linalg.norm(pos[i] - pos[j]) < 1e-6:
                    raise GeometryError(f"atoms {i} and {j} closer than 1e-6 angstrom")

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_electrons(self) -> int:
        return sum(z for z, _ in self.atoms) - self.charge

    @property
    def positions(self) -> np.ndarray:
        """(N, 3) positions in angstrom."""
        return np.array([pos for _, pos in self.atoms], dtype=float)

    @property
    def positions_bohr(self) -> np.ndarray:
        return self.positions * BOHR_PER_ANGSTROM

    @property
    def numbers(self) -> tuple:
        return tuple(z for z, _ in self.atoms)

    def with_positions(self, positions) -> "Molecule":
        positions = np.asarray(positions, dtype=float)
        atoms = tuple((z, tuple(p)) for (z, _), p in zip(self.atoms, positions))
        return Molecule(atoms, self.charge, self.label)

    def displaced(self, atom: int, axis: int, delta: float) -> "Molecule":
        pos = self.positions
        pos[atom, axis] += delta
        return self.with_positions(pos)

    @classmethod
    def from_xyz(cls, text: str) -> "Molecule":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n = int(lines[0].split()[0])
        charge = 0
        label = ""
        for token in lines[1].split():
            if token.startswith("charge="):
                charge = int(token.split("=", 1)[1])
            else:
                label = f"{label} {token}".strip()
        atoms = []
        for ln in lines[2 : 2 + n]:
            sym, x, y, z = ln.split()[:4]
            if sym.upper() != "H":
                raise GeometryError(f"unsupported element {sym!r}")
            atoms.append((1, (float(x), float(y), float(z))))
        return cls(tuple(atoms), charge=charge, label=label)

    def to_xyz(self) -> str:
        lines = [str(self.n_atoms), f"charge={self.charge} {self.label}".rstrip()]
        for _, (x, y, z) in self.atoms:
            lines.append(f"H {x:.10f} {y:.10f} {z:.10f}")
        return "\n".join(lines) + "\n"


def h2_molecule(bond_angstrom: float, label: str = "H2") -> Molecule:
    return Molecule(
        ((1, (0.0, 0.0, 0.0)), (1, (0.0, 0.0, bond_angstrom))), charge=0, label=label
    )


def h3plus_molecule(r12: float, r13: float, angle_deg: float, label: str = "H3+") -> Molecule:
    """H3+ with atom 0 at the apex of the angle between bonds 0-1 and 0-2."""
    theta = np.radians(angle_deg)
    return Molecule(
        (
            (1, (0.0, 0.0, 0.0)),
            (1, (0.0, 0.0, r12)),
            (1, (0.0, r13 * np.sin(theta), r13 * np.cos(theta))),
        ),
        charge=1,
        label=label,
    )


@dataclass(frozen=True)
class BasisShell:
    """Contracted s-type STO-3G shell on one atomic center."""

    center: int
    exponents: tuple
    coefficients: tuple

    def __post_init__(self):
        if len(self.exponents) != 3 or len(self.coefficients) != 3:
            raise ValueError("STO-3G shells carry exactly 3 primitives")
        if any(a <= 0 for a in self.exponents):
            raise ValueError("primitive exponents must be strictly positive")


def load_basis(path=None) -> dict:
    """Basis data {Z: {exponents, coefficients}} from JSON (default: packaged STO-3G)."""
    if path is None:
        text = resources.files("vqemd.data").joinpath("sto3g.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    return {
        int(z): (tuple(entry["exponents"]), tuple(entry["coefficients"]))
        for z, entry in raw.items()
    }


def build_shells(mol: Molecule, basis: dict | None = None) -> list[BasisShell]:
    basis = basis if basis is not None else load_basis()
    shells = []
    for i, z in enumerate(mol.numbers):
        exps, coefs = basis[z]
        shells.append(BasisShell(center=i, exponents=exps, coefficients=coefs))
    return shells


# ---------------------------------------------------------------------------
# Boys kernel and Gaussian integrals
# ---------------------------------------------------------------------------

_BOYS_SERIES_CUT = 1e-6


def boys_f0(x: float) -> float:
    """F0(x) = ∫_0^1 exp(-x t^2) dt.

    Series branch below 1e-6, closed form (1/2)√(π/x)·erf(√x) above;
    relative accuracy better than 1e-12, continuous at x = 0.
    """
    if x < 0:
        raise ValueError("boys_f0 domain is x >= 0")
    if x < _BOYS_SERIES_CUT:
        # Σ_k (-x)^k / (k! (2k+1))
        term = 1.0
        total = 1.0
        k = 0
        while abs(term) > 1e-17:
            k += 1
            term *= -x / k
            total += term / (2 * k + 1)
        return total
    return 0.5 * np.sqrt(np.pi / x) * float(erf(np.sqrt(x)))


def _boys_f0_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    small = x < _BOYS_SERIES_CUT
    safe = np.where(small, 1.0, x)
    out = 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe))
    if np.any(small):
        xs = x[small]
        out[small] = 1.0 - xs / 3.0 + xs * xs / 10.0
    return out


@dataclass
class AOIntegrals:
    """AO matrices in Hartree: overlap, core Hamiltonian, chemists' ERI, E_NN."""

    S: np.ndarray
    hcore: np.ndarray
    eri: np.ndarray
    e_nn: float

    @property
    def n(self) -> int:
        return self.S.shape[0]


class _ResolvedShells:
    """Shell data with absolute centers (bohr) and normalized contractions."""

    def __init__(self, mol: Molecule, shells: list[BasisShell]):
        pos = mol.positions_bohr
        self.centers = np.array([pos[sh.center] for sh in shells])
        self.exps = np.array([sh.exponents for sh in shells], dtype=float)
        prim_norm = (2.0 * self.exps / np.pi) ** 0.75
        coefs = np.array([sh.coefficients for sh in shells], dtype=float) * prim_norm
        # renormalize each contraction so the self-overlap is exactly 1
        for i in range(len(shells)):
            p = self.exps[i][:, None] + self.exps[i][None, :]
            s = np.sum(coefs[i][:, None] * coefs[i][None, :] * (np.pi / p) ** 1.5)
            coefs[i] /= np.sqrt(s)
        self.coefs = coefs
        self.n = len(shells)


def _pair_tables(a: _ResolvedShells, b: _ResolvedShells):
    """Per shell-pair primitive-pair tables: total exponent, prefactor, center."""
    ea = a.exps[:, None, :, None]
    eb = b.exps[None, :, None, :]
    p = ea + eb  # (na, nb, 3, 3)
    diff = a.centers[:, None, :] - b.centers[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)[:, :, None, None]
    pref = (
        a.coefs[:, None, :, None]
        * b.coefs[None, :, None, :]
        * np.exp(-ea * eb / p * d2)
    )
    centers = (
        ea[..., None] * a.centers[:, None, None, None, :]
        + eb[..., None] * b.centers[None, :, None, None, :]
    ) / p[..., None]
    return p, pref, centers, d2


def cross_overlap(mol_a: Molecule, shells_a, mol_b: Molecule, shells_b) -> np.ndarray:
    """Overlap matrix between two basis sets (possibly at different geometries)."""
    ra = _ResolvedShells(mol_a, shells_a)
    rb = _ResolvedShells(mol_b, shells_b)
    p, pref, _, _ = _pair_tables(ra, rb)
    return np.sum(pref * (np.pi / p) ** 1.5, axis=(2, 3))


def compute_ao_integrals(mol: Molecule, shells: list[BasisShell] | None = None) -> AOIntegrals:
    """All STO-3G s-orbital AO integrals plus the nuclear repulsion energy."""
    if shells is None:
        shells = build_shells(mol)
    rs = _ResolvedShells(mol, shells)
    n = rs.n
    pos = mol.positions_bohr
    numbers = mol.numbers

    e_nn = 0.0
    for i in range(len(numbers)):
        for j in range(i + 1, len(numbers)):
            rij = np.linalg.norm(pos[i] - pos[j])
            if rij < 1e-6 * BOHR_PER_ANGSTROM:
                raise GeometryError(f"coincident nuclei {i}, {j}")
            e_nn += numbers[i] * numbers[j] / rij

    p, pref, centers, d2 = _pair_tables(rs, rs)
    gauss = (np.pi / p) ** 1.5
    S = np.sum(pref * gauss, axis=(2, 3))

    ea = rs.exps[:, None, :, None]
    eb = rs.exps[None, :, None, :]
    mu = ea * eb / p
    T = np.sum(pref * gauss * mu * (3.0 - 2.0 * mu * d2), axis=(2, 3))

    V = np.zeros((n, n))
    for zc, rc in zip(numbers, pos):
        pc2 = np.sum((centers - rc) ** 2, axis=-1)
        V -= zc * np.sum(pref * (2.0 * np.pi / p) * _boys_f0_array(p * pc2), axis=(2, 3))

    # chemists' (pq|rs) over flattened primitive-pair tables
    flat_p = p.reshape(n, n, 9)
    flat_pref = pref.reshape(n, n, 9)
    flat_ctr = centers.reshape(n, n, 9, 3)
    eri = np.zeros((n, n, n, n))
    pair_index = [(i, j) for i in range(n) for j in range(i, n)]
    for ai, (i, j) in enumerate(pair_index):
        for bi in range(ai, len(pair_index)):
            k, l = pair_index[bi]
            pij = flat_p[i, j][:, None]
            qkl = flat_p[k, l][None, :]
            dpq = flat_ctr[i, j][:, None, :] - flat_ctr[k, l][None, :, :]
            arg = pij * qkl / (pij + qkl) * np.sum(dpq * dpq, axis=-1)
            kernel = (
                2.0 * np.pi**2.5
                / (pij * qkl * np.sqrt(pij + qkl))
                * _boys_f0_array(arg)
            )
            val = float(
                np.sum(flat_pref[i, j][:, None] * flat_pref[k, l][None, :] * kernel)
            )
            for a, b in ((i, j), (j, i)):
                for c, d in ((k, l), (l, k)):
                    eri[a, b, c, d] = val
                    eri[c, d, a, b] = val

    return AOIntegrals(S=S, hcore=T + V, eri=eri, e_nn=e_nn)


# ---------------------------------------------------------------------------
# restricted Hartree-Fock
# ---------------------------------------------------------------------------


@dataclass
class MOIntegrals:
    """MO-basis integrals: one-electron h, physics-notation g, E_NN, ε, C."""

    h: np.ndarray
    g: np.ndarray
    e_nn: float
    orbital_energies: np.ndarray
    coefficients: np.ndarray
    n_electrons: int
    scf_energy: float = 0.0
    scf_trace: list = field(default_factory=list)

    @property
    def n_orbitals(self) -> int:
        return self.h.shape[0]


def _mo_transform(ao: AOIntegrals, C: np.ndarray):
    h = C.T @ ao.hcore @ C
    # naive sequential four-index transform of the chemists' tensor
    g_chem = np.tensordot(ao.eri, C, axes=([3], [0]))
    g_chem = np.tensordot(g_chem, C, axes=([2], [0]))
    g_chem = np.tensordot(g_chem, C, axes=([1], [0]))
    g_chem = np.tensordot(g_chem, C, axes=([0], [0]))
    # tensordot appended transformed axes in reverse order (s,r,q,p) -> flip
    g_chem = g_chem.transpose(3, 2, 1, 0)
    # physics <ij|kl> = (ik|jl)
    g = g_chem.transpose(0, 2, 1, 3)
    return h, g


def _fix_phases(C: np.ndarray) -> np.ndarray:
    C = C.copy()
    for j in range(C.shape[1]):
        k = int(np.argmax(np.abs(C[:, j])))
        if C[k, j] < 0:
            C[:, j] = -C[:, j]
    return C


def _canonical_order(eps: np.ndarray, C: np.ndarray):
    """Ascending orbital energy; near-degenerate ties by lexicographic column."""
    order = list(np.argsort(eps, kind="stable"))
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(eps[order[j]] - eps[order[i]]) < 1e-9:
            j += 1
        if j - i > 1:
            block = sorted(order[i:j], key=lambda c: tuple(np.round(C[:, c], 9)))
            order[i:j] = block
        i = j
    return eps[order], C[:, order]


def run_rhf(
    ints: AOIntegrals,
    n_electrons: int,
    max_iter: int = 200,
    e_tol: float = 1e-10,
    d_tol: float = 1e-8,
    density_guess: np.ndarray | None = None,
) -> MOIntegrals:
    """Closed-shell Roothaan SCF with a core-Hamiltonian guess (no DIIS/damping).

    A density matrix from a nearby geometry may be passed as the initial
    guess; the fixed point is unchanged, only the iteration count drops.
    """
    if n_electrons % 2:
        raise ValueError("RHF requires an even electron count")
    if n_electrons > 2 * ints.n:
        raise ValueError("more electrons than 2x basis functions")
    n_occ = n_electrons // 2

    s_vals, s_vecs = np.linalg.eigh(ints.S)
    if s_vals.min() < 1e-10:
        raise GeometryError("overlap matrix is numerically singular")
    X = s_vecs @ np.diag(s_vals**-0.5) @ s_vecs.T

    def solve(F):
        Fp = X.T @ F @ X
        eps, Cp = np.linalg.eigh(Fp)
        return eps, X @ Cp

    eps, C = solve(ints.hcore)
    if density_guess is not None:
        D = density_guess
    else:
        D = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
    e_prev = None
    trace = []
    for _ in range(max_iter):
        J = np.einsum("pqrs,rs->pq", ints.eri, D)
        K = np.einsum("prqs,rs->pq", ints.eri, D)
        F = ints.hcore + J - 0.5 * K
        e_elec = 0.5 * np.sum(D * (ints.hcore + F))
        e_total = float(e_elec + ints.e_nn)
        trace.append(e_total)
        eps, C = solve(F)
        D_new = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
        d_change = np.max(np.abs(D_new - D))
        D = D_new
        if e_prev is not None and abs(e_total - e_prev) < e_tol and d_change < d_tol:
            break
        e_prev = e_total
    else:
        raise SCFConvergenceError(f"SCF not converged in {max_iter} iterations", trace)

    eps, C = _canonical_order(eps, _fix_phases(C))
    h, g = _mo_transform(ints, C)
    return MOIntegrals(
        h=h,
        g=g,
        e_nn=ints.e_nn,
        orbital_energies=eps,
        coefficients=C,
        n_electrons=n_electrons,
        scf_energy=e_total,
        scf_trace=trace,
    )


@dataclass
class MOReference:
    """Snapshot used to keep MO ordering/phases consistent across geometries."""

    mol: Molecule
    shells: list
    coefficients: np.ndarray


def align_to_reference(
    mo: MOIntegrals,
    ao: AOIntegrals,
    mol: Molecule,
    shells,
    ref: MOReference,
) -> MOIntegrals:
    """Match MO columns to a reference geometry by maximum absolute overlap.

    Columns are permuted to the reference order and sign-aligned, then the MO
    integrals are re-transformed; required so displaced-geometry Hamiltonians
    live in a consistent orbital basis.
    """
    s_cross = cross_overlap(ref.mol, ref.shells, mol, shells)
    M = ref.coefficients.T @ s_cross @ mo.coefficients
    n = M.shape[0]
    perm = [-1] * n
    taken = set()
    for i in range(n):
        order = np.argsort(-np.abs(M[i]))
        for j in order:
            if j not in taken:
                perm[i] = int(j)
                taken.add(int(j))
                break
    C = mo.coefficients[:, perm].copy()
    eps = mo.orbital_energies[perm].copy()
    for i in range(n):
        if M[i, perm[i]] < 0:
            C[:, i] = -C[:, i]
    h, g = _mo_transform(ao, C)
    return MOIntegrals(
        h=h,
        g=g,
        e_nn=mo.e_nn,
        orbital_energies=eps,
        coefficients=C,
        n_electrons=mo.n_electrons,
        scf_energy=mo.scf_energy,
        scf_trace=mo.scf_trace,
    )


# ---------------------------------------------------------------------------
# second-quantized Hamiltonians
# ---------------------------------------------------------------------------


@dataclass
class FermionHamiltonian:
    """Spin-orbital coefficients (all-up-then-all-down ordering) plus constant.

    two_body[p, q, t, u] multiplies (1/2) a†_p a†_q a_u a_t, i.e. the physics
    tensor <pq|tu> spin-blocked over spin orbitals.
    """

    n_spin_orbitals: int
    one_body: np.ndarray
    two_body: np.ndarray
    constant: float


def build_fermionic_hamiltonian(mo: MOIntegrals, n_spin_orbitals: int) -> FermionHamiltonian:
    if n_spin_orbitals % 2:
        raise ValueError("spin-orbital count must be even")
    m = n_spin_orbitals // 2
    if m > mo.n_orbitals:
        raise ValueError("more spin orbitals requested than MOs available")
    h = mo.h[:m, :m]
    g = mo.g[:m, :m, :m, :m]

    def spin(p):
        return p // m, p % m  # (sigma, spatial)

    n = n_spin_orbitals
    one = np.zeros((n, n))
    two = np.zeros((n, n, n, n))
    for p in range(n):
        sp, rp = spin(p)
        for q in range(n):
            sq, rq = spin(q)
            if sp == sq:
                one[p, q] = h[rp, rq]
    for p in range(n):
        sp, rp = spin(p)
        for q in range(n):
            sq, rq = spin(q)
            for t in range(n):
                st, rt = spin(t)
                if st != sp:
                    continue
                for u in range(n):
                    su, ru = spin(u)
                    if su != sq:
                        continue
                    two[p, q, t, u] = g[rp, rq, rt, ru]
    return FermionHamiltonian(
        n_spin_orbitals=n, one_body=one, two_body=two, constant=mo.e_nn
    )


def build_hcb_hamiltonian(mo: MOIntegrals) -> PauliSum:
    """Hard-core-boson (paired-electron RHF) qubit Hamiltonian.

    One qubit per spatial MO; pair energies h*_rr = 2h_rr + g_rrrr, pair
    hopping h*_rs = g_rrss and pair-pair couplings g*_rs = 2J_rs - K_rs,
    emitted with the (I-Z)/2, (XX+YY)/4 and (I-Z_r-Z_s+ZZ)/4 structure.
    """
    if mo.n_electrons % 2:
        raise SymmetryViolationError("hard-core-boson form requires a closed shell")
    m = mo.n_orbitals
    h = mo.h
    g = mo.g
    terms = [(mo.e_nn, PauliString.identity(m))]
    for r in range(m):
        hstar = 2.0 * h[r, r] + g[r, r, r, r]
        terms.append((0.5 * hstar, PauliString.identity(m)))
        terms.append((-0.5 * hstar, PauliString.single(m, r, "Z")))
    for r in range(m):
        for s in range(m):
            if r == s:
                continue
            hop = g[r, r, s, s]  # <rr|ss> = K_rs, the pair-hop amplitude
            xx = PauliString.single(m, r, "X").x | PauliString.single(m, s, "X").x
            terms.append((0.25 * hop, PauliString(m, xx, 0)))
            terms.append((0.25 * hop, PauliString(m, xx, xx)))  # YY
            gstar = 2.0 * g[r, s, r, s] - g[r, s, s, r]  # 2J_rs - K_rs
            zr = PauliString.single(m, r, "Z")
            zs = PauliString.single(m, s, "Z")
            terms.append((0.25 * gstar, PauliString.identity(m)))
            terms.append((-0.25 * gstar, zr))
            terms.append((-0.25 * gstar, zs))
            terms.append((0.25 * gstar, PauliString(m, 0, zr.z | zs.z)))
    return PauliSum(m, terms)
