"""Time integration (velocity-free Verlet NVE, noise-driven Langevin NVT),
geometry optimization, and trajectory analysis.

Integrator state lives in atomic units (bohr, m_e, a.u. time, Ha); trajectory
frames convert to angstrom / femtoseconds / Ha-per-angstrom at the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.optimize

from .chem import Molecule
from .constants import (
    ANGSTROM_PER_BOHR,
    AU_TIME_PER_FS,
    BOHR_PER_ANGSTROM,
    FS_PER_AU_TIME,
    KB_HA_PER_K,
    PROTON_MASS_ME,
)
from .errors import InsufficientFramesError, NumericalError, ThermostatInactiveError
from .forces import LanczosSettings, build_force_operators, measure_energy_and_forces
from .pipeline import HamiltonianPipeline
from .vqe import QuantumBackend, vqe_minimize

# spawn-key namespaces (must not collide with vqe-internal ones, which nest)
_NS_MD_VQE = 10
_NS_MD_MEASURE = 11
_NS_LANGEVIN_NOISE = 12
_NS_OPT_VQE = 13
_NS_OPT_MEASURE = 14

_F_AU_PER_HA_ANGSTROM = ANGSTROM_PER_BOHR  # Ha/angstrom -> Ha/bohr


@dataclass
class MDConfig:
    dt_fs: float = 0.2
    steps: int = 500
    integrator: str = "verlet"  # 'verlet' | 'langevin'
    temperature_k: float = 300.0
    mapping: str = "parity2"
    delta_r: float = 1e-3
    lanczos: LanczosSettings | None = None
    verlet_variant: str = "standard"  # 'standard' | 'paper-eq12'
    equilibration_fs: float = 400.0
    masses_me: tuple | None = None

    def __post_init__(self):
        if self.dt_fs <= 0:
            raise ValueError("dt must be positive")
        if self.integrator not in ("verlet", "langevin"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.integrator == "langevin" and self.temperature_k <= 0:
            raise ValueError("Langevin requires a positive target temperature")
        if self.masses_me is not None and any(m <= 0 for m in self.masses_me):
            raise ValueError("masses must be positive")

    def masses(self, n_atoms: int) -> np.ndarray:
        if self.masses_me is None:
            return np.full(n_atoms, PROTON_MASS_ME)
        if len(self.masses_me) != n_atoms:
            raise ValueError("masses length does not match atom count")
        return np.asarray(self.masses_me, dtype=float)

    def describe(self) -> dict:
        d = asdict(self)
        d["lanczos"] = None if self.lanczos is None else asdict(self.lanczos)
        return d


@dataclass
class TrajectoryFrame:
    step: int
    t_fs: float
    positions: np.ndarray      # (N, 3) angstrom
    velocities: np.ndarray     # (N, 3) angstrom / fs
    forces: np.ndarray         # (N, 3) Ha / angstrom
    e_pot: float
    e_kin: float
    temperature_k: float
    force_variance: np.ndarray  # (3N,) Ha^2 / angstrom^2

    @property
    def e_tot(self) -> float:
        return self.e_pot + self.e_kin


@dataclass
class Trajectory:
    frames: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    @property
    def n_atoms(self) -> int:
        return self.frames[0].positions.shape[0]

    def times_fs(self):
        return np.array([f.t_fs for f in self.frames])

    def series(self, name):
        return np.array([getattr(f, name) for f in self.frames])

    def bond_lengths(self, i: int = 0, j: int = 1):
        return np.array(
            [np.linalg.norm(f.positions[j] - f.positions[i]) for f in self.frames]
        )

    # -- CSV / XYZ artifacts --------------------------------------------------

    def csv_header(self) -> str:
        cols = ["step", "t_fs"]
        for a in range(self.n_atoms):
            cols += [f"{c}{a}" for c in ("x", "y", "z")]
            cols += [f"{c}{a}" for c in ("vx", "vy", "vz")]
            cols += [f"{c}{a}" for c in ("fx", "fy", "fz")]
        cols += ["e_pot_ha", "e_kin_ha", "e_tot_ha", "temp_k"]
        for a in range(self.n_atoms):
            cols += [f"fvar_{c}{a}" for c in ("x", "y", "z")]
        return ",".join(cols)

    def to_csv(self) -> str:
        lines = [self.csv_header()]
        for f in self.frames:
            row = [str(f.step), f"{f.t_fs:.17g}"]
            for a in range(f.positions.shape[0]):
                row += [f"{v:.17g}" for v in f.positions[a]]
                row += [f"{v:.17g}" for v in f.velocities[a]]
                row += [f"{v:.17g}" for v in f.forces[a]]
            row += [
                f"{f.e_pot:.17g}",
                f"{f.e_kin:.17g}",
                f"{f.e_tot:.17g}",
                f"{f.temperature_k:.17g}",
            ]
            row += [f"{v:.17g}" for v in f.force_variance]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, metadata=None) -> "Trajectory":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if len(lines) < 2:
            raise InsufficientFramesError("trajectory file holds no frames")
        header = lines[0].split(",")
        n_atoms = sum(1 for c in header if c.startswith("x"))
        frames = []
        for ln in lines[1:]:
            vals = ln.split(",")
            step = int(vals[0])
            t_fs = float(vals[1])
            per_atom = np.array([float(v) for v in vals[2 : 2 + 9 * n_atoms]]).reshape(
                n_atoms, 9
            )
            tail = [float(v) for v in vals[2 + 9 * n_atoms :]]
            e_pot, e_kin = tail[0], tail[1]
            temp = tail[3]
            fvar = np.array(tail[4 : 4 + 3 * n_atoms]) if len(tail) > 4 else np.zeros(3 * n_atoms)
            frames.append(
                TrajectoryFrame(
                    step=step,
                    t_fs=t_fs,
                    positions=per_atom[:, 0:3],
                    velocities=per_atom[:, 3:6],
                    forces=per_atom[:, 6:9],
                    e_pot=e_pot,
                    e_kin=e_kin,
                    temperature_k=temp,
                    force_variance=fvar,
                )
            )
        return cls(frames=frames, metadata=metadata or {})

    def to_xyz(self) -> str:
        blocks = []
        for f in self.frames:
            lines = [str(self.n_atoms), f"t={f.t_fs:.6f} fs"]
            for a in range(self.n_atoms):
                x, y, z = f.positions[a]
                lines.append(f"H {x:.10f} {y:.10f} {z:.10f}")
            blocks.append("\n".join(lines))
        return "\n".join(blocks) + "\n"

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, default=str)


# ---------------------------------------------------------------------------
# integrator kernels (atomic units, arrays shaped (N, 3))
# ---------------------------------------------------------------------------


def bootstrap_verlet(r0, v0, f0, dt, masses):
    """Taylor back-step R_{-dt} = R0 - v0 dt + (F0/m) dt^2 / 2."""
    m = np.asarray(masses, dtype=float)[:, None]
    return r0 - v0 * dt + 0.5 * (f0 / m) * dt * dt


def verlet_step(r_t, r_prev, f_t, dt, masses, variant="standard"):
    """Velocity-free Verlet update.

    'standard' uses the textbook recurrence; 'paper-eq12' keeps the printed
    1/2 prefactor on the force term (audit variant).
    """
    m = np.asarray(masses, dtype=float)[:, None]
    factor = 0.5 if variant == "paper-eq12" else 1.0
    return 2.0 * r_t - r_prev + factor * (f_t / m) * dt * dt


def langevin_step(
    r,
    v,
    force,
    force_variance,
    dt,
    masses,
    temperature_k,
    extra_alpha=None,
    rng=None,
):
    """Semi-implicit Euler Langevin update driven by measured force noise.

    The measured per-evaluation force variance acts as discretized white noise
    with spectral density α_ii = Var(F_i/m_i)·dt; the fluctuation-dissipation
    relation fixes the friction γ_ii = α_ii m_i / (2 k_B T) so the stationary
    velocity variance is k_B T / m_i.  No extra noise is injected beyond the
    statistical noise already present in `force`, unless `extra_alpha` adds an
    optional external white-noise channel.
    """
    m = np.asarray(masses, dtype=float)[:, None]
    var = np.asarray(force_variance, dtype=float).reshape(r.shape)
    if np.all(var <= 0.0) and extra_alpha is None:
        raise ThermostatInactiveError(
            "force covariance is zero (exact backend); the Langevin thermostat "
            "needs a shot-based backend"
        )
    kbt = KB_HA_PER_K * temperature_k
    alpha = var / m**2 * dt
    gamma = alpha * m / (2.0 * kbt)
    drive = force / m
    if extra_alpha is not None:
        ea = np.asarray(extra_alpha, dtype=float).reshape(r.shape)
        gamma = gamma + ea * m / (2.0 * kbt)
        drive = drive + rng.standard_normal(r.shape) * np.sqrt(ea / dt)
    v_new = v + dt * (-gamma * v + drive)
    r_new = r + dt * v_new
    return r_new, v_new


def kinetic_energy(v, masses):
    m = np.asarray(masses, dtype=float)[:, None]
    return 0.5 * float(np.sum(m * v * v))


def instantaneous_temperature(e_kin, n_atoms):
    return 2.0 * e_kin / (3.0 * n_atoms * KB_HA_PER_K)


# ---------------------------------------------------------------------------
# MD drivers
# ---------------------------------------------------------------------------


def _make_frame(step, dt_fs, r_bohr, v_au, fest, e_pot, masses):
    n_atoms = r_bohr.shape[0]
    e_kin = kinetic_energy(v_au, masses)
    return TrajectoryFrame(
        step=step,
        t_fs=step * dt_fs,
        positions=r_bohr * ANGSTROM_PER_BOHR,
        velocities=v_au * (ANGSTROM_PER_BOHR / FS_PER_AU_TIME),
        forces=fest.force.reshape(n_atoms, 3).copy(),
        e_pot=e_pot,
        e_kin=e_kin,
        temperature_k=instantaneous_temperature(e_kin, n_atoms),
        force_variance=fest.variance_diagonal,
    )


class _StepEvaluator:
    """Per-geometry build + warm-started VQE + single-dataset measurement."""

    def __init__(self, mol0, config: MDConfig, backend: QuantumBackend, basis=None):
        self.template = mol0
        self.config = config
        self.backend = backend
        self.pipeline = HamiltonianPipeline(config.mapping, basis=basis)
        self.reference = None
        self.params = None
        self.info = None

    def molecule(self, r_bohr) -> Molecule:
        return self.template.with_positions(r_bohr * ANGSTROM_PER_BOHR)

    def evaluate(self, r_bohr, step: int):
        mol = self.molecule(r_bohr)
        base = self.pipeline.build(mol, reference=self.reference)
        result = vqe_minimize(
            base.hamiltonian,
            self.backend,
            init=self.params,
            warm=self.params is not None,
            key=(_NS_MD_VQE, step),
        )
        ops = build_force_operators(mol, self.config.delta_r, self.pipeline, base=base)
        e_pot, e_var, fest = measure_energy_and_forces(
            ops,
            result.parameters,
            self.backend,
            lanczos=self.config.lanczos,
            key=(_NS_MD_MEASURE, step),
        )
        self.reference = base.reference
        self.params = result.parameters
        if self.info is None:
            self.info = dict(base.info)
        f_au = fest.force.reshape(-1, 3) * _F_AU_PER_HA_ANGSTROM
        var_au = fest.variance_diagonal.reshape(-1, 3) * _F_AU_PER_HA_ANGSTROM**2
        return e_pot, e_var, fest, f_au, var_au, result


def _base_metadata(kind, mol0, config, backend, evaluator):
    return {
        "kind": kind,
        "molecule": {"label": mol0.label, "charge": mol0.charge, "xyz": mol0.to_xyz()},
        "config": config.describe(),
        "backend": backend.describe(),
        "mapping": evaluator.info,
        "warm_start": True,
        "single_qubit_error_rate": "U2 rate applied to all single-qubit gates",
    }


def run_nve(mol0: Molecule, config: MDConfig, backend: QuantumBackend, basis=None) -> Trajectory:
    """Microcanonical trajectory via velocity-free Verlet.

    Per step: warm-started VQE, Hellmann-Feynman FD forces (optionally
    Lanczos-mitigated) from one dataset, Verlet advance.  Velocities are
    central differences; the final frame uses a backward difference.  On a
    numerical failure the trajectory up to the last good frame is returned
    with the abort recorded in metadata.
    """
    ev = _StepEvaluator(mol0, config, backend, basis=basis)
    dt = config.dt_fs * AU_TIME_PER_FS
    masses = config.masses(mol0.n_atoms)
    r = mol0.positions_bohr
    v0 = np.zeros_like(r)
    traj = Trajectory()
    r_prev = r_prev2 = None
    try:
        for step in range(config.steps + 1):
            e_pot, _, fest, f_au, _, _ = ev.evaluate(r, step)
            if step == 0:
                r_prev = bootstrap_verlet(r, v0, f_au, dt, masses)
            if step < config.steps:
                r_next = verlet_step(r, r_prev, f_au, dt, masses, config.verlet_variant)
                v = (r_next - r_prev) / (2.0 * dt)
            else:
                r_next = None
                # second-order backward difference on the final frame
                if r_prev2 is not None:
                    v = (3.0 * r - 4.0 * r_prev + r_prev2) / (2.0 * dt)
                else:
                    v = (r - r_prev) / dt
            traj.frames.append(_make_frame(step, config.dt_fs, r, v, fest, e_pot, masses))
            if r_next is not None:
                r_prev2, r_prev, r = r_prev, r, r_next
    except NumericalError as exc:
        traj.metadata["aborted"] = {"step": len(traj.frames), "reason": str(exc)}
    traj.metadata.update(_base_metadata("nve", mol0, config, backend, ev))
    return traj


def run_langevin(mol0: Molecule, config: MDConfig, backend: QuantumBackend, basis=None) -> Trajectory:
    """Canonical trajectory: fluctuation-dissipation friction from the
    measured force covariance diagonal, semi-implicit Euler updates.

    Velocities start at zero; statistics should discard the configured
    equilibration window (analyze_trajectory handles that)."""
    ev = _StepEvaluator(mol0, config, backend, basis=basis)
    dt = config.dt_fs * AU_TIME_PER_FS
    masses = config.masses(mol0.n_atoms)
    r = mol0.positions_bohr
    v = np.zeros_like(r)
    traj = Trajectory()
    try:
        for step in range(config.steps):
            e_pot, _, fest, f_au, var_au, _ = ev.evaluate(r, step)
            traj.frames.append(_make_frame(step, config.dt_fs, r, v, fest, e_pot, masses))
            r, v = langevin_step(
                r, v, f_au, var_au, dt, masses, config.temperature_k
            )
    except NumericalError as exc:
        traj.metadata["aborted"] = {"step": len(traj.frames), "reason": str(exc)}
    traj.metadata.update(_base_metadata("langevin", mol0, config, backend, ev))
    traj.metadata["equilibration_fs"] = config.equilibration_fs
    return traj


# ---------------------------------------------------------------------------
# geometry optimization
# ---------------------------------------------------------------------------


def internal_coordinates(mol_or_positions) -> dict:
    """Bond lengths (angstrom) for every pair and angles (degrees) per triple."""
    pos = (
        mol_or_positions.positions
        if isinstance(mol_or_positions, Molecule)
        else np.asarray(mol_or_positions)
    )
    n = pos.shape[0]
    bonds = {}
    for i in range(n):
        for j in range(i + 1, n):
            bonds[f"r_{i}{j}"] = float(np.linalg.norm(pos[j] - pos[i]))
    angles = {}
    for apex in range(n):
        others = [k for k in range(n) if k != apex]
        for ai in range(len(others)):
            for bi in range(ai + 1, len(others)):
                u = pos[others[ai]] - pos[apex]
                w = pos[others[bi]] - pos[apex]
                cosang = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
                angles[f"a_{others[ai]}{apex}{others[bi]}"] = float(
                    np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
                )
    return {**bonds, **angles}


def geometry_optimize(
    mol0: Molecule,
    backend: QuantumBackend,
    mapping: str = "parity2",
    delta_r: float = 1e-3,
    lanczos: LanczosSettings | None = None,
    basis=None,
    max_iter: int = 500,
    force_tol: float = 5e-4,
    window: int = 10,
):
    """Steepest descent on HF-FD forces with an adaptive step.

    Exact backends stop at max |F| < force_tol Ha/angstrom; shot backends stop
    when the moving window average of the internal coordinates stabilizes
    within reporting precision (5e-4 angstrom / 0.05 degrees), and the
    returned geometry averages the final window.
    """
    config = MDConfig(mapping=mapping, delta_r=delta_r, lanczos=lanczos, steps=0)
    ev = _StepEvaluator(mol0, config, backend, basis=basis)
    noisy = backend.mode != "exact-matrix"
    r = mol0.positions_bohr
    eta = 0.4 * BOHR_PER_ANGSTROM**2  # bohr^2 / Ha
    trace = []
    positions_history = []
    prev_energy = None
    converged = False
    for it in range(max_iter):
        e_pot, _, fest, f_au, _, _ = ev.evaluate(r, it)
        trace.append(e_pot)
        positions_history.append(r.copy())
        max_f = float(np.max(np.abs(fest.force)))
        if not noisy and max_f < force_tol:
            converged = True
            break
        if prev_energy is not None:
            eta *= 1.2 if e_pot < prev_energy else 0.5
            eta = float(np.clip(eta, 0.05, 3.0))
        prev_energy = e_pot
        step_vec = eta * f_au
        norm = np.linalg.norm(step_vec, axis=1, keepdims=True)
        cap = 0.15 * BOHR_PER_ANGSTROM
        step_vec = np.where(norm > cap, step_vec * cap / norm, step_vec)
        r = r + step_vec
        if noisy and it >= 3 * window:
            recent = np.mean(positions_history[-window:], axis=0)
            before = np.mean(positions_history[-2 * window : -window], axis=0)
            ca = internal_coordinates(recent * ANGSTROM_PER_BOHR)
            cb = internal_coordinates(before * ANGSTROM_PER_BOHR)
            bond_shift = max(
                abs(ca[k] - cb[k]) for k in ca if k.startswith("r_")
            )
            angle_keys = [k for k in ca if k.startswith("a_")]
            angle_shift = max((abs(ca[k] - cb[k]) for k in angle_keys), default=0.0)
            if bond_shift < 5e-4 and angle_shift < 0.05:
                converged = True
                r = np.mean(positions_history[-window:], axis=0)
                break
    final = mol0.with_positions(r * ANGSTROM_PER_BOHR)
    report = {
        "converged": converged,
        "iterations": len(trace),
        "energy_trace": trace,
        "internal_coordinates": internal_coordinates(final),
        "final_max_force": float(np.max(np.abs(fest.force))),
        "estimator": fest.estimator,
        "mapping": ev.info,
    }
    return final, report


# ---------------------------------------------------------------------------
# trajectory analysis
# ---------------------------------------------------------------------------


def binning_error(series):
    """Plateau estimate of the statistical error of a correlated series mean.

    Block sizes double per level; the reported error is the largest standard
    error across levels that retain at least 16 blocks.
    """
    x = np.asarray(series, dtype=float)
    levels = []
    size = 1
    while len(x) >= 16:
        levels.append(
            {
                "bin_size": size,
                "n_blocks": len(x),
                "error": float(np.std(x, ddof=1) / np.sqrt(len(x))),
            }
        )
        if len(x) % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
        size *= 2
    if not levels:
        raise InsufficientFramesError("series too short for binning analysis")
    return max(lv["error"] for lv in levels), levels


def gaussian_bond_fit(bond_lengths, bins=50, pes_k=None):
    """Least-squares fit of the bond histogram to a·exp(-w (R-b)^2).

    With a quadratic PES stiffness k supplied, also reports β = 2w/k
    (the Fig.-7-style a·exp(-β k (R-b)^2 / 2) parameterization).
    """
    r = np.asarray(bond_lengths, dtype=float)
    if np.std(r) < 1e-12:
        return {"fit": None, "centers": None, "density": None}
    density, edges = np.histogram(r, bins=bins, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])

    def model(x, a, b, w):
        return a * np.exp(-w * (x - b) ** 2)

    p0 = (float(density.max()), float(r.mean()), 1.0 / (2.0 * np.var(r)))
    popt, pcov = scipy.optimize.curve_fit(model, centers, density, p0=p0, maxfev=20000)
    a, b, w = (float(v) for v in popt)
    perr = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    out = {
        "a": a,
        "b": b,
        "w": w,
        "b_error": float(perr[1]),
        "w_error": float(perr[2]),
    }
    if pes_k is not None:
        out["beta"] = 2.0 * w / pes_k
        out["beta_error"] = 2.0 * float(perr[2]) / pes_k
    return {"fit": out, "centers": centers, "density": density}


def histogram_peaks(density):
    """Indices of local maxima above 15% of the peak (3-point smoothed)."""
    h = np.asarray(density, dtype=float)
    padded = np.concatenate([[0.0], h, [0.0]])
    smooth = 0.25 * padded[:-2] + 0.5 * padded[1:-1] + 0.25 * padded[2:]
    thresh = 0.15 * smooth.max()
    peaks = []
    for i in range(len(smooth)):
        left = smooth[i - 1] if i > 0 else -np.inf
        right = smooth[i + 1] if i < len(smooth) - 1 else -np.inf
        if smooth[i] > thresh and smooth[i] >= left and smooth[i] > right:
            peaks.append(i)
    return peaks


def fit_pes_quadratic(r_values, energies):
    """Quadratic PES fit; returns (k, r_min, e_min)."""
    c2, c1, c0 = np.polyfit(np.asarray(r_values), np.asarray(energies), 2)
    r_min = -c1 / (2.0 * c2)
    return 2.0 * c2, float(r_min), float(c0 + c1 * r_min + c2 * r_min**2)


def analyze_trajectory(
    traj: Trajectory,
    bins: int = 50,
    equilibration_fs: float | None = None,
    bond=(0, 1),
    pes_k: float | None = None,
) -> dict:
    """Phase-space series, bond histogram + Gaussian fit, kinetic temperature
    with binning error bars."""
    if len(traj) < 100:
        raise InsufficientFramesError(f"need >= 100 frames, have {len(traj)}")
    if equilibration_fs is None:
        equilibration_fs = float(traj.metadata.get("equilibration_fs", 0.0))
    times = traj.times_fs()
    keep = times >= equilibration_fs
    if keep.sum() < 100:
        raise InsufficientFramesError("fewer than 100 frames after equilibration")
    frames = [f for f, k in zip(traj.frames, keep) if k]
    sub = Trajectory(frames=frames, metadata=traj.metadata)

    masses = np.full(sub.n_atoms, PROTON_MASS_ME)
    positions = np.array([f.positions for f in frames])
    velocities = np.array([f.velocities for f in frames])
    momenta = velocities * masses[None, :, None]  # m_e * angstrom / fs

    temp_series = sub.series("temperature_k")
    t_err, t_levels = binning_error(temp_series)
    bonds = sub.bond_lengths(*bond)
    hist = gaussian_bond_fit(bonds, bins=bins, pes_k=pes_k)
    if hist["density"] is not None:
        peaks = histogram_peaks(hist["density"])
    else:
        peaks = []

    return {
        "n_frames": len(frames),
        "t_fs": times[keep],
        "e_pot": sub.series("e_pot"),
        "e_kin": sub.series("e_kin"),
        "e_tot": np.array([f.e_tot for f in frames]),
        "temperature": {
            "series": temp_series,
            "mean": float(temp_series.mean()),
            "binning_error": t_err,
            "binning_levels": t_levels,
        },
        "bond": {
            "pair": tuple(bond),
            "lengths": bonds,
            "histogram_centers": hist["centers"],
            "histogram_density": hist["density"],
            "gaussian_fit": hist["fit"],
            "peaks": peaks,
        },
        "phase_space": {"positions": positions, "momenta": momenta},
    }
