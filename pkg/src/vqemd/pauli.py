"""Pauli-string operator algebra, fermion-to-qubit mappings and qubit reduction.

Strings are held in symplectic (x, z) bitmask form: bit i of each mask refers
to qubit i, with (x=1, z=0) -> X, (x=0, z=1) -> Z, (x=1, z=1) -> Y.  In text
labels and bitstrings, qubit 0 is the leftmost character.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ResourceLimitError, SymmetryViolationError, VqemdError

COEFF_CUTOFF = 1e-12
IMAG_TOLERANCE = 1e-10

_I2 = np.eye(2, dtype=complex)
_XM = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_YM = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_ZM = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_SINGLE = {(0, 0): _I2, (1, 0): _XM, (1, 1): _YM, (0, 1): _ZM}
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_MASKS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


@dataclass(frozen=True, order=True)
class PauliString:
    n: int
    x: int
    z: int

    def __post_init__(self):
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise ValueError("mask exceeds qubit count")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for q, ch in enumerate(label):
            try:
                xb, zb = _MASKS[ch]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {ch!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        xb, zb = _MASKS[letter]
        return cls(n, xb << qubit, zb << qubit)

    def label(self) -> str:
        return "".join(
            _LETTERS[(self.x >> q & 1, self.z >> q & 1)] for q in range(self.n)
        )

    def letter(self, qubit: int) -> str:
        return _LETTERS[(self.x >> qubit & 1, self.z >> qubit & 1)]

    @property
    def support(self) -> int:
        """Bitmask of qubits where the string is non-identity."""
        return self.x | self.z

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def commutes(self, other: "PauliString") -> bool:
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def qubit_wise_commutes(self, other: "PauliString") -> bool:
        both = self.support & other.support
        return (self.x & both) == (other.x & both) and (self.z & both) == (other.z & both)

    def matrix(self) -> np.ndarray:
        """Dense 2^n matrix; qubit 0 is the least significant index bit."""
        m = np.ones((1, 1), dtype=complex)
        for q in range(self.n):
            m = np.kron(_SINGLE[(self.x >> q & 1, self.z >> q & 1)], m)
        return m


def pauli_multiply(a: PauliString, b: PauliString):
    """Product a·b = phase · c with phase in {1, -1, i, -i}.

    Phase bookkeeping uses the canonical form P(x, z) = i^{x·z} X^x Z^z.
    """
    if a.n != b.n:
        raise ValueError("qubit count mismatch")
    x = a.x ^ b.x
    z = a.z ^ b.z
    exponent = (
        (a.x & a.z).bit_count()
        + (b.x & b.z).bit_count()
        + 2 * (a.z & b.x).bit_count()
        - (x & z).bit_count()
    ) % 4
    return 1j**exponent, PauliString(a.n, x, z)


class PauliSum:
    """Canonical real-weighted sum of Pauli strings.

    Construction dedupes, prunes coefficients below 1e-12 and sorts terms;
    real coefficients are enforced (Hermiticity).
    """

    __slots__ = ("n", "strings", "coeffs", "_matrix")

    def __init__(self, n: int, terms=()):
        acc: dict[PauliString, complex] = {}
        for coeff, string in terms:
            if string.n != n:
                raise ValueError("qubit count mismatch")
            acc[string] = acc.get(string, 0.0) + complex(coeff)
        self.n = n
        strings = []
        coeffs = []
        for string in sorted(acc):
            c = acc[string]
            if abs(c.imag) > IMAG_TOLERANCE * max(1.0, abs(c.real)):
                raise VqemdError(f"non-Hermitian coefficient {c} for {string.label()}")
            if abs(c.real) >= COEFF_CUTOFF:
                strings.append(string)
                coeffs.append(c.real)
        self.strings = tuple(strings)
        self.coeffs = np.array(coeffs, dtype=float)
        self._matrix = None

    @classmethod
    def from_terms(cls, n: int, labelled_terms) -> "PauliSum":
        return cls(n, [(c, PauliString.from_label(lbl)) for c, lbl in labelled_terms])

    def terms(self):
        return zip(self.coeffs, self.strings)

    def __len__(self):
        return len(self.strings)

    @property
    def identity_coefficient(self) -> float:
        for c, s in self.terms():
            if s.is_identity():
                return float(c)
        return 0.0

    def __add__(self, other):
        if isinstance(other, PauliSum):
            if other.n != self.n:
                raise ValueError("qubit count mismatch")
            return PauliSum(self.n, list(self.terms()) + list(other.terms()))
        return PauliSum(
            self.n,
            list(self.terms()) + [(float(other), PauliString.identity(self.n))],
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return self._product(other)
        return PauliSum(self.n, [(c * float(other), s) for c, s in self.terms()])

    def __rmul__(self, scalar):
        return self * scalar

    def _product(self, other: "PauliSum") -> "PauliSum":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        acc: dict[PauliString, complex] = {}
        for ca, sa in self.terms():
            for cb, sb in other.terms():
                phase, s = pauli_multiply(sa, sb)
                acc[s] = acc.get(s, 0.0) + phase * ca * cb
        return PauliSum(self.n, ((c, s) for s, c in acc.items()))

    def shifted(self, constant: float) -> "PauliSum":
        """self + constant · I."""
        return self + float(constant)

    def matrix(self) -> np.ndarray:
        if self.n > 12:
            raise ResourceLimitError(f"dense build refused for n={self.n} qubits")
        if self._matrix is None:
            dim = 1 << self.n
            m = np.zeros((dim, dim), dtype=complex)
            for c, s in self.terms():
                m += c * s.matrix()
            self._matrix = m
        return self._matrix

    def expectation(self, statevector: np.ndarray) -> float:
        return float(np.real(np.vdot(statevector, self.matrix() @ statevector)))

    # -- text format: lines "±coefficient PAULI-WORD" ----------------------

    def dumps(self) -> str:
        return "\n".join(f"{c:+.17g} {s.label()}" for c, s in self.terms()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PauliSum":
        terms = []
        n = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            coeff_str, word = line.split()
            if n is None:
                n = len(word)
            elif len(word) != n:
                raise ValueError("inconsistent Pauli word length")
            terms.append((float(coeff_str), PauliString.from_label(word)))
        if n is None:
            raise ValueError("empty PauliSum text")
        return cls(n, terms)

    def __repr__(self):
        return f"PauliSum(n={self.n}, terms={len(self.strings)})"


def sandwich(a: PauliSum, o: PauliSum) -> PauliSum:
    """Hermitian triple product a·o·a (e.g. (H-d)·O·(H-d)).

    The pairwise intermediate a·o is generally non-Hermitian, so the three
    factors are expanded in one pass with complex accumulation.
    """
    if a.n != o.n:
        raise ValueError("qubit count mismatch")
    acc: dict[PauliString, complex] = {}
    for c1, s1 in a.terms():
        for c2, s2 in o.terms():
            p12, s12 = pauli_multiply(s1, s2)
            w12 = c1 * c2 * p12
            for c3, s3 in a.terms():
                p, s = pauli_multiply(s12, s3)
                acc[s] = acc.get(s, 0.0) + w12 * c3 * p
    return PauliSum(a.n, ((c, s) for s, c in acc.items()))


def _operator_product(factors, n: int) -> dict[PauliString, complex]:
    """Expand a product of multi-term complex Pauli operators."""
    acc = {PauliString.identity(n): 1.0 + 0.0j}
    for factor in factors:
        nxt: dict[PauliString, complex] = {}
        for sa, ca in acc.items():
            for cb, sb in factor:
                phase, s = pauli_multiply(sa, sb)
                nxt[s] = nxt.get(s, 0.0) + ca * cb * phase
        acc = nxt
    return acc


def _merge(target: dict, source: dict, weight: complex):
    for s, c in source.items():
        target[s] = target.get(s, 0.0) + weight * c


def _jw_ladder(n: int, p: int, dagger: bool):
    """Jordan-Wigner image of a†_p / a_p as a 2-term complex operator."""
    chain = (1 << p) - 1
    sign = -1.0j if dagger else 1.0j
    return [
        (0.5, PauliString(n, 1 << p, chain)),          # X_p Z_{<p}
        (0.5 * sign, PauliString(n, 1 << p, chain | (1 << p))),  # ±i/2 Y_p Z_{<p}
    ]


def _parity_ladder(n: int, p: int, dagger: bool):
    """Parity-basis image of a†_p / a_p as a 2-term complex operator."""
    update = 0
    for q in range(p + 1, n):
        update |= 1 << q
    sign = -1.0j if dagger else 1.0j
    z_prev = (1 << (p - 1)) if p > 0 else 0
    return [
        (0.5, PauliString(n, (1 << p) | update, z_prev)),           # X-update ⊗ X_p Z_{p-1}
        (0.5 * sign, PauliString(n, (1 << p) | update, 1 << p)),    # ±i/2 X-update ⊗ Y_p
    ]


_LADDERS = {"jw": _jw_ladder, "parity": _parity_ladder}


@lru_cache(maxsize=65536)
def _mapped_excitation(kind: str, n: int, indices: tuple, daggers: tuple):
    """Cached Pauli expansion of a product of ladder operators.

    The expansion depends only on the mapping and the index pattern, so MD
    runs rebuilding Hamiltonians at thousands of geometries reuse it.
    """
    ladder = _LADDERS[kind]
    factors = [ladder(n, p, dag) for p, dag in zip(indices, daggers)]
    return tuple(_operator_product(factors, n).items())


def _map_fermion_hamiltonian(h, kind: str) -> PauliSum:
    n = h.n_spin_orbitals
    acc: dict[PauliString, complex] = {}
    _merge(acc, {PauliString.identity(n): 1.0}, h.constant)
    for p in range(n):
        for q in range(n):
            c = h.one_body[p, q]
            if abs(c) < 1e-14:
                continue
            for s, w in _mapped_excitation(kind, n, (p, q), (True, False)):
                acc[s] = acc.get(s, 0.0) + c * w
    for p, q, t, u in itertools.product(range(n), repeat=4):
        c = h.two_body[p, q, t, u]
        if abs(c) < 1e-14:
            continue
        # 1/2 Σ g_pqtu a†_p a†_q a_u a_t
        for s, w in _mapped_excitation(kind, n, (p, q, u, t), (True, True, False, False)):
            acc[s] = acc.get(s, 0.0) + 0.5 * c * w
    return PauliSum(n, ((c, s) for s, c in acc.items()))


def jordan_wigner(h) -> PauliSum:
    """Map a FermionHamiltonian to qubits, one qubit per spin orbital."""
    return _map_fermion_hamiltonian(h, "jw")


def parity_two_qubit_reduction(h, n_electrons: int) -> PauliSum:
    """Parity-map a spin-blocked FermionHamiltonian and drop two symmetry qubits.

    With all-up-then-all-down ordering, qubit n/2-1 carries the spin-up parity
    and qubit n-1 the total parity; both are replaced by their ±1 eigenvalues
    fixed by (N_up, N_down) for the closed-shell sector.
    """
    n = h.n_spin_orbitals
    if n % 2:
        raise ValueError("spin-orbital count must be even")
    if n_electrons % 2:
        raise SymmetryViolationError("two-qubit reduction requires a closed shell")
    mapped = _map_fermion_hamiltonian(h, "parity")
    n_up = n_electrons // 2
    sector = {n // 2 - 1: (-1.0) ** n_up, n - 1: (-1.0) ** n_electrons}
    return _substitute_and_drop(mapped, sector, kind="z")


def _substitute_and_drop(op: PauliSum, qubit_values: dict[int, float], kind: str) -> PauliSum:
    """Replace single-qubit Z (kind='z') or X (kind='x') on given qubits by ±1."""
    drop = sorted(qubit_values)
    keep = [q for q in range(op.n) if q not in qubit_values]
    n_new = len(keep)
    terms = []
    for c, s in op.terms():
        coeff = c
        for q in drop:
            xb, zb = s.x >> q & 1, s.z >> q & 1
            if kind == "z":
                if xb:
                    raise SymmetryViolationError(
                        f"term {s.label()} is not diagonal on symmetry qubit {q}"
                    )
                if zb:
                    coeff *= qubit_values[q]
            else:
                if zb:
                    raise SymmetryViolationError(
                        f"term {s.label()} acts with Z/Y on tapered qubit {q}"
                    )
                if xb:
                    coeff *= qubit_values[q]
        x = z = 0
        for i, q in enumerate(keep):
            x |= (s.x >> q & 1) << i
            z |= (s.z >> q & 1) << i
        terms.append((coeff, PauliString(n_new, x, z)))
    return PauliSum(n_new, terms)


def _gf2_nullspace(rows: np.ndarray) -> list[np.ndarray]:
    """Null space basis of a GF(2) matrix (rows: shape (m, k) of 0/1)."""
    m, k = rows.shape
    a = rows.copy() % 2
    pivots = []
    r = 0
    for col in range(k):
        sel = None
        for i in range(r, m):
            if a[i, col]:
                sel = i
                break
        if sel is None:
            continue
        a[[r, sel]] = a[[sel, r]]
        for i in range(m):
            if i != r and a[i, col]:
                a[i] ^= a[r]
        pivots.append(col)
        r += 1
        if r == m:
            break
    free = [c for c in range(k) if c not in pivots]
    basis = []
    for fc in free:
        v = np.zeros(k, dtype=np.int64)
        v[fc] = 1
        for row_idx, pc in enumerate(pivots):
            if a[row_idx, fc]:
                v[pc] = 1
        basis.append(v)
    return basis


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for i, b in enumerate(bits):
        if b:
            out |= 1 << i
    return out


def find_z2_and_taper(h: PauliSum, sector=None, generators=None):
    """Taper qubits protected by Z2 symmetries of a Pauli Hamiltonian.

    Finds independent symmetry generators from the GF(2) kernel of the
    symplectic check matrix (unless a frozen generator set is supplied),
    conjugates by the (X_q + τ)/√2 Cliffords and substitutes the ±1 sector.
    When no sector is given, every sector is diagonalized densely and the one
    matching the untapered ground energy is selected and reported.

    Returns (tapered PauliSum, generators, sector); with no symmetry found the
    operator is returned unchanged with empty generators.
    """
    n = h.n
    non_identity = [s for s in h.strings if not s.is_identity()]
    if generators is None:
        if not non_identity:
            return h, [], []
        rows = np.zeros((len(non_identity), 2 * n), dtype=np.int64)
        for i, s in enumerate(non_identity):
            for q in range(n):
                rows[i, q] = s.x >> q & 1
                rows[i, n + q] = s.z >> q & 1
        # commutation: x_term·z_g + z_term·x_g = 0, so solve for [z_g | x_g]
        kernel = _gf2_nullspace(rows)
        generators = []
        for v in kernel:
            zg = _bits_to_int(v[:n])
            xg = _bits_to_int(v[n:])
            if xg or zg:
                generators.append(PauliString(n, xg, zg))
    else:
        generators = list(generators)
    if not generators:
        return h, [], []

    for g in generators:
        for s in non_identity:
            if not g.commutes(s):
                raise SymmetryViolationError(
                    f"generator {g.label()} does not commute with term {s.label()}"
                )
    for g1, g2 in itertools.combinations(generators, 2):
        if not g1.commutes(g2):
            raise SymmetryViolationError("symmetry generators do not commute")

    generators, pivots = _reduce_generators(generators)

    rotated = h
    for g, q in zip(generators, pivots):
        sigma = PauliString.single(n, q, "X")
        acc: dict[PauliString, complex] = {}
        for c, s in rotated.terms():
            # U s U with U = (X_q + g)/√2
            for fa in (sigma, g):
                for fb in (sigma, g):
                    p1, t = pauli_multiply(fa, s)
                    p2, t = pauli_multiply(t, fb)
                    acc[t] = acc.get(t, 0.0) + 0.5 * c * p1 * p2
        rotated = PauliSum(n, ((c, s) for s, c in acc.items()))

    if sector is not None:
        chosen = list(sector)
        if len(chosen) != len(generators):
            raise ValueError("sector length does not match generator count")
        tapered = _substitute_and_drop(
            rotated, dict(zip(pivots, (float(v) for v in chosen))), kind="x"
        )
        return tapered, generators, chosen

    target = np.linalg.eigvalsh(h.matrix())[0]
    for combo in itertools.product((1.0, -1.0), repeat=len(generators)):
        tapered = _substitute_and_drop(rotated, dict(zip(pivots, combo)), kind="x")
        e0 = np.linalg.eigvalsh(tapered.matrix())[0]
        if abs(e0 - target) < 1e-9:
            return tapered, generators, list(combo)
    raise SymmetryViolationError("no tapering sector reproduces the ground energy")


def _reduce_generators(generators):
    """Gaussian-eliminate generator z-parts so each owns a unique pivot qubit."""
    n = generators[0].n
    gens = list(generators)
    pivots = []
    for i in range(len(gens)):
        pivot = None
        for q in range(n):
            if gens[i].z >> q & 1 and all(
                not (gens[j].z >> q & 1) for j in range(len(gens)) if j != i
            ):
                pivot = q
                break
        if pivot is None:
            # eliminate shared z-bits using the other generators
            for q in range(n):
                if not (gens[i].z >> q & 1):
                    continue
                clash = [j for j in range(len(gens)) if j != i and gens[j].z >> q & 1]
                for j in clash:
                    _, merged = pauli_multiply(gens[j], gens[i])
                    gens[j] = merged
            for q in range(n):
                if gens[i].z >> q & 1 and all(
                    not (gens[j].z >> q & 1) for j in range(len(gens)) if j != i
                ):
                    pivot = q
                    break
        if pivot is None:
            raise SymmetryViolationError(
                "could not assign a distinct Z pivot qubit to every generator"
            )
        pivots.append(pivot)
    return gens, pivots


@dataclass
class MeasurementGroup:
    """Qubit-wise commuting strings measured from one rotated-basis dataset."""

    members: list[int]
    basis: dict[int, str] = field(default_factory=dict)


def qwc_group(h: PauliSum) -> list[MeasurementGroup]:
    """Greedy first-fit grouping into qubit-wise commuting measurement groups.

    The identity term is excluded (its expectation is always 1).
    """
    groups: list[MeasurementGroup] = []
    for idx, s in enumerate(h.strings):
        if s.is_identity():
            continue
        placed = False
        for g in groups:
            ok = True
            for q in range(h.n):
                letter = s.letter(q)
                if letter == "I":
                    continue
                fixed = g.basis.get(q)
                if fixed is not None and fixed != letter:
                    ok = False
                    break
            if ok:
                g.members.append(idx)
                for q in range(h.n):
                    letter = s.letter(q)
                    if letter != "I":
                        g.basis[q] = letter
                placed = True
                break
        if not placed:
            basis = {q: s.letter(q) for q in range(h.n) if s.letter(q) != "I"}
            groups.append(MeasurementGroup(members=[idx], basis=basis))
    return groups


def exact_diagonalize(h: PauliSum):
    """Lowest eigenpair of the dense 2^n matrix representation.

    Degenerate ground spaces are resolved deterministically: basis states are
    scanned in lexicographic order, the first with non-vanishing projection is
    projected into the ground space, normalized, and its first nonzero
    amplitude made real positive.
    """
    if h.n > 12:
        raise ResourceLimitError(f"exact diagonalization refused for n={h.n}")
    m = h.matrix()
    evals, evecs = np.linalg.eigh(m)
    e0 = float(evals[0])
    ground = evecs[:, np.abs(evals - e0) < 1e-10]
    if ground.shape[1] == 1:
        vec = ground[:, 0]
    else:
        proj = ground @ ground.conj().T
        vec = None
        for j in range(m.shape[0]):
            cand = proj[:, j]
            norm = np.linalg.norm(cand)
            if norm > 1e-8:
                vec = cand / norm
                break
        assert vec is not None
    k = int(np.flatnonzero(np.abs(vec) > 1e-12)[0])
    vec = vec * (np.abs(vec[k]) / vec[k])
    return e0, vec


def ground_state_degeneracy(h: PauliSum, tol: float = 1e-10) -> int:
    evals = np.linalg.eigvalsh(h.matrix())
    return int(np.sum(np.abs(evals - evals[0]) < tol))
