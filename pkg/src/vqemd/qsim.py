"""Quantum circuit construction, exact and noisy evolution, shot sampling,
readout mitigation and expectation/covariance estimation from counts.

Statevectors and density matrices index basis states little-endian: bit q of
the index is qubit q.  Bitstring keys print qubit 0 first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import KB_J_PER_K, PLANCK_J_S
from .errors import MitigationUnavailableError, ResourceLimitError
from .pauli import MeasurementGroup, PauliSum

# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

_SINGLE_QUBIT_GATES = {"u3", "u2", "ry", "rz", "h", "sdg"}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    params: tuple = ()

    def __post_init__(self):
        if not all(math.isfinite(p) for p in self.params):
            raise ValueError("gate angles must be finite")


@dataclass
class Circuit:
    n: int
    gates: list = field(default_factory=list)

    def add(self, name, qubits, params=()):
        qubits = tuple(int(q) for q in (qubits if isinstance(qubits, (tuple, list)) else (qubits,)))
        if any(q < 0 or q >= self.n for q in qubits):
            raise ValueError(f"qubit index out of range for n={self.n}")
        self.gates.append(Gate(name, qubits, tuple(float(p) for p in params)))
        return self


def gate_matrix(gate: Gate) -> np.ndarray:
    name = gate.name
    if name == "u3":
        theta, phi, lam = gate.params
    elif name == "u2":
        theta, (phi, lam) = np.pi / 2, gate.params
    elif name == "ry":
        theta, phi, lam = gate.params[0], 0.0, 0.0
    elif name == "rz":
        a = gate.params[0]
        return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    elif name == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    elif name == "sdg":
        return np.diag([1.0, -1.0j])
    elif name == "cx":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
        )  # little-endian: qubit order (control, target) = (q0, q1) basis |t c>
    else:
        raise ValueError(f"unknown gate {name!r}")
    return np.array(
        [
            [np.cos(theta / 2), -np.exp(1j * lam) * np.sin(theta / 2)],
            [np.exp(1j * phi) * np.sin(theta / 2), np.exp(1j * (phi + lam)) * np.cos(theta / 2)],
        ]
    )


def build_ry_ansatz(n: int, depth: int, params) -> Circuit:
    """RY rotation layers separated by CNOT entangling ladders.

    Takes n*(depth+1) angles; with all angles zero the circuit prepares |0...0>.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (n * (depth + 1),):
        raise ValueError(f"expected {n * (depth + 1)} parameters, got {params.shape}")
    c = Circuit(n)
    k = 0
    for q in range(n):
        c.add("ry", q, (params[k],))
        k += 1
    for _ in range(depth):
        for q in range(n - 1):
            c.add("cx", (q, q + 1))
        for q in range(n):
            c.add("ry", q, (params[k],))
            k += 1
    return c


# ---------------------------------------------------------------------------
# exact statevector evolution
# ---------------------------------------------------------------------------


def _embed_full(U: np.ndarray, qubits, n: int) -> np.ndarray:
    """Dense 2^n operator acting with U on the given qubits (little-endian)."""
    dim = 1 << n
    k = len(qubits)
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        sub_in = 0
        for i, q in enumerate(qubits):
            sub_in |= (col >> q & 1) << i
        base = col
        for q in qubits:
            base &= ~(1 << q)
        for sub_out in range(1 << k):
            amp = U[sub_out, sub_in]
            if amp == 0:
                continue
            row = base
            for i, q in enumerate(qubits):
                row |= (sub_out >> i & 1) << q
            out[row, col] += amp
    return out


def evolve_statevector(circuit: Circuit) -> np.ndarray:
    """Exact amplitudes of circuit|0...0>; norm 1 to 1e-12."""
    if circuit.n > 20:
        raise ResourceLimitError(f"statevector refused for n={circuit.n}")
    psi = np.zeros(1 << circuit.n, dtype=complex)
    psi[0] = 1.0
    return apply_circuit(psi, circuit)


def apply_circuit(psi: np.ndarray, circuit: Circuit) -> np.ndarray:
    n = circuit.n
    psi = psi.reshape([2] * n)
    for gate in circuit.gates:
        U = gate_matrix(gate)
        if gate.name == "cx":
            c, t = gate.qubits
            U4 = U.reshape(2, 2, 2, 2)  # (t_out, c_out, t_in, c_in), little-endian
            ax_c, ax_t = n - 1 - c, n - 1 - t
            spec = list(range(4, 4 + n))
            spec[ax_t], spec[ax_c] = 2, 3
            out = list(range(4, 4 + n))
            out[ax_t], out[ax_c] = 0, 1
            psi = np.einsum(U4, [0, 1, 2, 3], psi, spec, out)
        else:
            (q,) = gate.qubits
            ax = n - 1 - q
            psi = np.moveaxis(np.tensordot(U, psi, axes=([1], [ax])), 0, ax)
    return psi.reshape(-1)


# ---------------------------------------------------------------------------
# noise model
# ---------------------------------------------------------------------------


@dataclass
class QubitNoise:
    t1_us: float
    t2_us: float
    freq_ghz: float
    readout_error: float
    u2_error: float


@dataclass
class NoiseModel:
    """Device noise parameters (Table-II style) plus a global scale factor.

    The scale factor multiplies every channel probability (depolarizing,
    readout flip, and the per-gate thermal-relaxation probabilities derived
    from T1/T2 and the gate duration); scale 1.0 is the full model, 0.5 the
    halved-noise model.
    """

    qubits: list
    cnot_errors: dict
    durations_ns: dict = field(
        default_factory=lambda: {"u": 35.0, "cx": 300.0, "readout": 1000.0}
    )
    scale: float = 1.0
    temperature_k: float = 0.0

    def __post_init__(self):
        for i, q in enumerate(self.qubits):
            if q.t2_us > 2.0 * q.t1_us + 1e-12:
                raise ValueError(f"qubit {i}: T2 must not exceed 2*T1")
            for p in (q.readout_error, q.u2_error):
                if not 0.0 <= p <= 1.0:
                    raise ValueError("probabilities must lie in [0, 1]")
        for p in self.cnot_errors.values():
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        raw = json.loads(text)
        qubits = [QubitNoise(**q) for q in raw["qubits"]]
        return cls(
            qubits=qubits,
            cnot_errors={k: float(v) for k, v in raw.get("cnot_errors", {}).items()},
            durations_ns=dict(raw.get("durations_ns", {"u": 35.0, "cx": 300.0, "readout": 1000.0})),
            scale=float(raw.get("scale", 1.0)),
            temperature_k=float(raw.get("temperature_k", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "qubits": [vars(q) for q in self.qubits],
                "cnot_errors": self.cnot_errors,
                "durations_ns": self.durations_ns,
                "scale": self.scale,
                "temperature_k": self.temperature_k,
            },
            indent=2,
        )

    def with_scale(self, scale: float) -> "NoiseModel":
        return NoiseModel(
            qubits=[QubitNoise(**vars(q)) for q in self.qubits],
            cnot_errors=dict(self.cnot_errors),
            durations_ns=dict(self.durations_ns),
            scale=scale,
            temperature_k=self.temperature_k,
        )

    def with_channels(self, depolarization=True, thermalization=True, readout=True) -> "NoiseModel":
        """Copy with individual channel families switched off (ablation studies)."""
        qubits = []
        for q in self.qubits:
            qubits.append(
                QubitNoise(
                    t1_us=q.t1_us if thermalization else float("inf"),
                    t2_us=q.t2_us if thermalization else float("inf"),
                    freq_ghz=q.freq_ghz,
                    readout_error=q.readout_error if readout else 0.0,
                    u2_error=q.u2_error if depolarization else 0.0,
                )
            )
        cnot = {k: (v if depolarization else 0.0) for k, v in self.cnot_errors.items()}
        return NoiseModel(
            qubits=qubits,
            cnot_errors=cnot,
            durations_ns=dict(self.durations_ns),
            scale=self.scale,
            temperature_k=self.temperature_k,
        )

    # -- derived, scaled channel probabilities --------------------------------

    def depolarizing_probability(self, gate: Gate) -> float:
        if gate.name == "cx":
            c, t = gate.qubits
            p = self.cnot_errors.get(f"{c}_{t}", self.cnot_errors.get(f"{t}_{c}"))
            if p is None:
                raise ValueError(f"no CNOT error rate for edge {c}-{t}")
        else:
            p = self.qubits[gate.qubits[0]].u2_error
        return min(1.0, self.scale * p)

    def readout_probability(self, qubit: int) -> float:
        return min(1.0, self.scale * self.qubits[qubit].readout_error)

    def thermal_parameters(self, qubit: int, duration_ns: float):
        """(gamma, p_z, p_excited) for relaxation over the given duration."""
        q = self.qubits[qubit]
        t1 = q.t1_us * 1e3
        t2 = q.t2_us * 1e3
        if not (np.isfinite(t1) and np.isfinite(t2)):
            return 0.0, 0.0, 0.0
        gamma = 1.0 - math.exp(-duration_ns / t1)
        inv_tphi = 1.0 / t2 - 0.5 / t1
        pz = 0.5 * (1.0 - math.exp(-duration_ns * max(inv_tphi, 0.0)))
        if self.temperature_k > 0.0:
            ratio = PLANCK_J_S * q.freq_ghz * 1e9 / (KB_J_PER_K * self.temperature_k)
            p_exc = 1.0 / (math.exp(ratio) + 1.0)
        else:
            p_exc = 0.0
        return min(1.0, self.scale * gamma), min(0.5, self.scale * pz), p_exc

    def gate_duration_ns(self, gate: Gate) -> float:
        return self.durations_ns["cx"] if gate.name == "cx" else self.durations_ns["u"]

    def has_readout_error(self) -> bool:
        return self.scale > 0 and any(q.readout_error > 0 for q in self.qubits)


def load_athens_model(scale: float = 1.0) -> NoiseModel:
    """Packaged ibmq_athens-style calibration table."""
    from importlib import resources

    text = resources.files("vqemd.data").joinpath("ibmq_athens.json").read_text()
    model = NoiseModel.from_json(text)
    return model.with_scale(scale) if scale != 1.0 else model


# ---------------------------------------------------------------------------
# noisy density-matrix evolution
# ---------------------------------------------------------------------------


def _partial_replace(rho: np.ndarray, n: int, qubits, gamma: float) -> np.ndarray:
    """Depolarize the given qubits: (1-γ)ρ + γ Tr_q[ρ] ⊗ I/2^k."""
    if gamma <= 0.0:
        return rho
    k = len(qubits)
    t = rho.reshape([2] * (2 * n))
    # trace out the chosen qubits (axis n-1-q for rows, same + n for columns)
    axes = sorted((n - 1 - q for q in qubits), reverse=True)
    for a in axes:
        t = np.trace(t, axis1=a, axis2=a + t.ndim // 2)
    reduced = t  # shape (2,)*(2*(n-k)) over the kept qubits in original order
    kept = [q for q in range(n) if q not in qubits]
    mixed = np.eye(1 << k, dtype=complex) / (1 << k)
    # rebuild: ordered as kept ⊗ mixed, then permute qubit axes back
    full = np.einsum(
        reduced.reshape(1 << (n - k), 1 << (n - k)),
        [0, 1],
        mixed,
        [2, 3],
        [0, 2, 1, 3],
    ).reshape([2] * (n - k) + [2] * k + [2] * (n - k) + [2] * k)
    # current row-axis order (most significant first): kept-desc, qubits-desc
    order = [n - 1 - q for q in sorted(kept, reverse=True)] + [
        n - 1 - q for q in sorted(qubits, reverse=True)
    ]
    perm = [order.index(a) for a in range(n)]
    full = np.transpose(full, perm + [n + p for p in perm])
    return gamma * full.reshape(1 << n, 1 << n) + (1.0 - gamma) * rho


def _apply_kraus_1q(rho: np.ndarray, n: int, qubit: int, kraus) -> np.ndarray:
    out = np.zeros_like(rho)
    for K in kraus:
        Kf = _embed_full(K, (qubit,), n)
        out += Kf @ rho @ Kf.conj().T
    return out


def _thermal_kraus(gamma: float, pz: float, p_exc: float):
    """Generalized amplitude damping toward excited population p_exc, then a
    phase flip channel; valid whenever T2 <= 2*T1."""
    sg = math.sqrt(gamma)
    s1g = math.sqrt(1.0 - gamma)
    kraus = [
        math.sqrt(1.0 - p_exc) * np.array([[1, 0], [0, s1g]], dtype=complex),
        math.sqrt(1.0 - p_exc) * np.array([[0, sg], [0, 0]], dtype=complex),
        math.sqrt(p_exc) * np.array([[s1g, 0], [0, 1]], dtype=complex),
        math.sqrt(p_exc) * np.array([[0, 0], [sg, 0]], dtype=complex),
    ]
    if pz > 0.0:
        z = np.diag([1.0, -1.0])
        kraus = [
            math.sqrt(1.0 - pz) * K for K in kraus
        ] + [math.sqrt(pz) * (z @ K) for K in kraus]
    return kraus


def evolve_density_with_noise(circuit: Circuit, nm: NoiseModel) -> np.ndarray:
    """Noisy density matrix: per gate, unitary, then depolarization on the
    touched qubits, then thermal relaxation for the gate duration."""
    n = circuit.n
    if n > 10:
        raise ResourceLimitError(f"density simulation refused for n={n}")
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for gate in circuit.gates:
        U = _embed_full(gate_matrix(gate), gate.qubits, n)
        rho = U @ rho @ U.conj().T
        p_dep = nm.depolarizing_probability(gate)
        rho = _partial_replace(rho, n, gate.qubits, p_dep)
        duration = nm.gate_duration_ns(gate)
        for q in gate.qubits:
            gamma, pz, p_exc = nm.thermal_parameters(q, duration)
            if gamma > 0.0 or pz > 0.0:
                rho = _apply_kraus_1q(rho, n, q, _thermal_kraus(gamma, pz, p_exc))
    return rho


# ---------------------------------------------------------------------------
# sampling and counts
# ---------------------------------------------------------------------------


def bitstring(index: int, n: int) -> str:
    """Bitstring with qubit 0 leftmost."""
    return "".join(str(index >> q & 1) for q in range(n))


def bitstring_index(bits: str) -> int:
    return sum(1 << q for q, b in enumerate(bits) if b == "1")


@dataclass
class CountsTable:
    counts: dict
    shots: int
    basis: dict

    def __post_init__(self):
        assert sum(self.counts.values()) == self.shots

    def vector(self, n: int) -> np.ndarray:
        v = np.zeros(1 << n)
        for bits, c in self.counts.items():
            v[bitstring_index(bits)] = c
        return v


def _rotation_circuit(n: int, basis: dict) -> Circuit:
    c = Circuit(n)
    for q, letter in sorted(basis.items()):
        if letter == "X":
            c.add("h", q)
        elif letter == "Y":
            c.add("sdg", q)
            c.add("h", q)
    return c


def _born_probabilities(state: np.ndarray, n: int, basis: dict) -> np.ndarray:
    rot = _rotation_circuit(n, basis)
    if state.ndim == 1:
        psi = apply_circuit(state.copy(), rot)
        probs = np.abs(psi) ** 2
    else:
        rho = state
        for gate in rot.gates:
            U = _embed_full(gate_matrix(gate), gate.qubits, n)
            rho = U @ rho @ U.conj().T
        probs = np.real(np.diag(rho))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(
    state: np.ndarray,
    group: MeasurementGroup,
    shots: int,
    nm: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> CountsTable:
    """Rotate to the group basis, sample the Born distribution, apply readout flips.

    Deterministic given the generator state; readout randomness is only drawn
    when the model actually carries a nonzero readout probability.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    n = int(round(math.log2(state.shape[0])))
    probs = _born_probabilities(state, n, group.basis)
    raw = rng.multinomial(shots, probs)
    if nm is not None and nm.has_readout_error():
        flip = np.ones((1, 1))
        for q in range(n):
            p = nm.readout_probability(q)
            flip = np.kron(np.array([[1 - p, p], [p, 1 - p]]), flip)
        out = np.zeros(1 << n, dtype=np.int64)
        for s in range(1 << n):
            if raw[s]:
                out += rng.multinomial(int(raw[s]), flip[:, s])
        raw = out
    counts = {bitstring(i, n): int(c) for i, c in enumerate(raw) if c}
    return CountsTable(counts=counts, shots=shots, basis=dict(group.basis))


# ---------------------------------------------------------------------------
# readout mitigation
# ---------------------------------------------------------------------------


def calibrate_readout_mitigation(
    nm: NoiseModel, n: int, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Column-stochastic assignment matrix A[i, j] ≈ P(read i | prepared j)."""
    if n > 6:
        raise ResourceLimitError("calibration refused for n > 6")
    dim = 1 << n
    A = np.zeros((dim, dim))
    group = MeasurementGroup(members=[], basis={})
    for j in range(dim):
        state = np.zeros(dim, dtype=complex)
        state[j] = 1.0
        table = sample_counts(state, group, shots, nm=nm, rng=rng)
        A[:, j] = table.vector(n) / shots
    if np.linalg.cond(A) > 1e8:
        raise MitigationUnavailableError("assignment matrix is numerically singular")
    return A


def apply_readout_mitigation(count_vector: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Least-squares inverse with clipping of negatives and renormalization."""
    y = count_vector / count_vector.sum()
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    x = np.clip(x, 0.0, None)
    total = x.sum()
    if total <= 0:
        raise MitigationUnavailableError("mitigated distribution vanished")
    return x / total


# ---------------------------------------------------------------------------
# expectation values and covariance from shared datasets
# ---------------------------------------------------------------------------


def _sign_table(n: int, mask: int) -> np.ndarray:
    idx = np.arange(1 << n)
    bits = idx & mask
    parity = np.zeros_like(idx)
    while np.any(bits):
        parity ^= bits & 1
        bits >>= 1
    return 1.0 - 2.0 * parity


def estimate_expectations_with_covariance(
    sums: list,
    groups: list,
    counts_per_group: list,
    union: PauliSum,
    mitigation: np.ndarray | None = None,
):
    """Expectation values of several PauliSums sharing one measured dataset.

    `groups` index into `union`, whose strings must cover every non-identity
    string of every sum.  Covariance is assembled per group (cross-group terms
    vanish: independent datasets) as Cov_ij = Σ_g Σ_{λ,μ∈g} c_λ^i c_μ^j
    Cov̂(P_λ, P_μ) / shots and clipped to be PSD.
    """
    n = union.n
    key_of = {(s.x, s.z): i for i, s in enumerate(union.strings)}
    group_of = {}
    for gi, g in enumerate(groups):
        for member in g.members:
            group_of[member] = gi

    # per-group empirical distribution and per-string means
    dists = []
    for g, table in zip(groups, counts_per_group):
        vec = table.vector(n)
        q = apply_readout_mitigation(vec, mitigation) if mitigation is not None else vec / table.shots
        dists.append(q)

    mean = np.zeros(len(union.strings))
    sign_cache = {}

    def signs(mask):
        if mask not in sign_cache:
            sign_cache[mask] = _sign_table(n, mask)
        return sign_cache[mask]

    for gi, g in enumerate(groups):
        for member in g.members:
            s = union.strings[member]
            mean[member] = float(signs(s.support) @ dists[gi])

    values = np.zeros(len(sums))
    coeff_rows = np.zeros((len(sums), len(union.strings)))
    for i, obs in enumerate(sums):
        if obs.n != n:
            raise ValueError("observable qubit count mismatch")
        total = 0.0
        for c, s in obs.terms():
            if s.is_identity():
                total += c
                continue
            try:
                k = key_of[(s.x, s.z)]
            except KeyError:
                raise ValueError(f"string {s.label()} missing from measured union") from None
            if k not in group_of:
                raise ValueError(f"no group data for string {s.label()}")
            coeff_rows[i, k] = c
            total += c * mean[k]
        values[i] = total

    cov = np.zeros((len(sums), len(sums)))
    for gi, g in enumerate(groups):
        members = g.members
        if not members:
            continue
        shots = counts_per_group[gi].shots
        m = len(members)
        pair_cov = np.zeros((m, m))
        for a in range(m):
            sa = union.strings[members[a]]
            for b in range(a, m):
                sb = union.strings[members[b]]
                joint = float(signs(sa.support ^ sb.support) @ dists[gi])
                pc = (joint - mean[members[a]] * mean[members[b]]) / shots
                pair_cov[a, b] = pair_cov[b, a] = pc
        rows = coeff_rows[:, members]
        cov += rows @ pair_cov @ rows.T

    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    if evals.size and evals.min() < -1e-14:
        cov = (evecs * np.clip(evals, 0.0, None)) @ evecs.T
        cov = 0.5 * (cov + cov.T)
    return values, cov
