"""Independent oracles used to freeze expected values.

Everything here is deliberately written against different primitives than the
package code paths it checks: quadrature instead of closed forms, generalized
eigenproblems instead of orthogonalization, occupation-number matrices instead
of qubit mappings, explicit kron products instead of tensor contraction.
"""

import numpy as np
import scipy.integrate
import scipy.linalg


def boys_by_quadrature(x: float) -> float:
    val, _ = scipy.integrate.quad(lambda t: np.exp(-x * t * t), 0.0, 1.0, epsabs=1e-14)
    return val


def contracted_s(exps, coefs, renormalize=True):
    """Normalized contracted s-function value generator chi(r; center)."""
    exps = np.asarray(exps, dtype=float)
    coefs = np.asarray(coefs, dtype=float) * (2.0 * exps / np.pi) ** 0.75
    if renormalize:
        p = exps[:, None] + exps[None, :]
        s = np.sum(coefs[:, None] * coefs[None, :] * (np.pi / p) ** 1.5)
        coefs = coefs / np.sqrt(s)

    def chi(r2):
        return np.sum(coefs[:, None] * np.exp(-exps[:, None] * r2[None, :]), axis=0)

    return chi


def overlap_by_quadrature(exps, coefs, d_bohr: float) -> float:
    """Two-center overlap of identical contracted s-functions via a 2D grid.

    Cylindrical coordinates around the bond axis; both centers on z.
    """
    chi = contracted_s(exps, coefs)
    z = np.linspace(-10.0, 10.0 + d_bohr, 2401)
    rho = np.linspace(0.0, 10.0, 1201)
    zz, rr = np.meshgrid(z, rho, indexing="ij")
    r2a = zz**2 + rr**2
    r2b = (zz - d_bohr) ** 2 + rr**2
    fa = chi(r2a.ravel()).reshape(zz.shape)
    fb = chi(r2b.ravel()).reshape(zz.shape)
    integrand = fa * fb * 2.0 * np.pi * rr
    return float(np.trapezoid(np.trapezoid(integrand, rho, axis=1), z))


def rhf_generalized(S, hcore, eri_chem, n_electrons, e_nn, iters=400):
    """RHF fixed point via scipy generalized eigh; returns total energy."""
    n_occ = n_electrons // 2
    eps, C = scipy.linalg.eigh(hcore, S)
    energy = None
    for _ in range(iters):
        D = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
        J = np.einsum("pqrs,rs->pq", eri_chem, D)
        K = np.einsum("prqs,rs->pq", eri_chem, D)
        F = hcore + J - 0.5 * K
        new_energy = 0.5 * np.sum(D * (hcore + F)) + e_nn
        eps, C = scipy.linalg.eigh(F, S)
        if energy is not None and abs(new_energy - energy) < 1e-12:
            return float(new_energy), eps
        energy = new_energy
    return float(energy), eps


def _creation_matrix(n_modes: int, p: int) -> np.ndarray:
    """a†_p in the occupation-number basis (bit q of the index = mode q)."""
    dim = 1 << n_modes
    m = np.zeros((dim, dim))
    for ket in range(dim):
        if ket >> p & 1:
            continue
        sign = (-1.0) ** bin(ket & ((1 << p) - 1)).count("1")
        m[ket | (1 << p), ket] = sign
    return m


def fci_ground_energy(one_body, two_body, constant):
    """Dense Fock-space ground energy from spin-orbital tensors.

    H = Σ h_pq a†_p a_q + 1/2 Σ g_pqtu a†_p a†_q a_u a_t + c, built from
    explicit occupation-number ladder matrices (no qubit mapping involved).
    """
    n = one_body.shape[0]
    cre = [_creation_matrix(n, p) for p in range(n)]
    ann = [m.T for m in cre]
    dim = 1 << n
    H = constant * np.eye(dim)
    for p in range(n):
        for q in range(n):
            if abs(one_body[p, q]) > 1e-14:
                H += one_body[p, q] * cre[p] @ ann[q]
    for p in range(n):
        for q in range(n):
            for t in range(n):
                for u in range(n):
                    c = two_body[p, q, t, u]
                    if abs(c) > 1e-14:
                        H += 0.5 * c * cre[p] @ cre[q] @ ann[u] @ ann[t]
    return float(np.linalg.eigvalsh(H)[0])


def fci_ground_energy_n_electrons(one_body, two_body, constant, n_electrons):
    """Ground energy restricted to the fixed-particle-number sector."""
    n = one_body.shape[0]
    cre = [_creation_matrix(n, p) for p in range(n)]
    ann = [m.T for m in cre]
    dim = 1 << n
    H = constant * np.eye(dim)
    for p in range(n):
        for q in range(n):
            if abs(one_body[p, q]) > 1e-14:
                H += one_body[p, q] * cre[p] @ ann[q]
    for p in range(n):
        for q in range(n):
            for t in range(n):
                for u in range(n):
                    c = two_body[p, q, t, u]
                    if abs(c) > 1e-14:
                        H += 0.5 * c * cre[p] @ cre[q] @ ann[u] @ ann[t]
    idx = [k for k in range(dim) if bin(k).count("1") == n_electrons]
    Hn = H[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(Hn)[0])


# -- dense circuit oracle ----------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def u3_matrix(theta, phi, lam):
    return np.array(
        [
            [np.cos(theta / 2), -np.exp(1j * lam) * np.sin(theta / 2)],
            [
                np.exp(1j * phi) * np.sin(theta / 2),
                np.exp(1j * (phi + lam)) * np.cos(theta / 2),
            ],
        ]
    )


def embed_single(U, q, n):
    """Full 2^n unitary for a single-qubit gate; qubit 0 is the LSB."""
    m = np.ones((1, 1), dtype=complex)
    for k in range(n):
        m = np.kron(U if k == q else I2, m)
    return m


def embed_cnot(control, target, n):
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for ket in range(dim):
        out = ket ^ (1 << target) if ket >> control & 1 else ket
        m[out, ket] = 1.0
    return m


def circuit_unitary(circuit, n):
    """Dense unitary from a list of ('name', qubits, params) tuples."""
    U = np.eye(1 << n, dtype=complex)
    for name, qubits, params in circuit:
        if name == "cx":
            g = embed_cnot(qubits[0], qubits[1], n)
        elif name == "ry":
            g = embed_single(u3_matrix(params[0], 0.0, 0.0), qubits[0], n)
        elif name == "u3":
            g = embed_single(u3_matrix(*params), qubits[0], n)
        elif name == "u2":
            g = embed_single(u3_matrix(np.pi / 2, *params), qubits[0], n)
        elif name == "rz":
            g = embed_single(
                np.diag([np.exp(-0.5j * params[0]), np.exp(0.5j * params[0])]),
                qubits[0],
                n,
            )
        elif name == "h":
            g = embed_single((X + Z) / np.sqrt(2), qubits[0], n)
        elif name == "sdg":
            g = embed_single(np.diag([1.0, -1.0j]), qubits[0], n)
        else:
            raise ValueError(name)
        U = g @ U
    return U


# -- closed-form dynamics oracles ---------------------------------------------


def harmonic_positions(x0, v0, omega, times):
    return x0 * np.cos(omega * times) + v0 / omega * np.sin(omega * times)


def ou_stationary_velocity_variance(alpha, gamma):
    """Stationary Var(v) of dv = -γ v dt + √α dW."""
    return alpha / (2.0 * gamma)
