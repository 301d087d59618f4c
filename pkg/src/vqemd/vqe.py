"""Variational ground-state search over the RY ansatz and batched observable
evaluation on exact, noiseless-shot or noisy-shot backends."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .pauli import PauliSum, qwc_group
from .qsim import (
    NoiseModel,
    build_ry_ansatz,
    calibrate_readout_mitigation,
    estimate_expectations_with_covariance,
    evolve_density_with_noise,
    evolve_statevector,
    sample_counts,
)

EXACT = "exact-matrix"
NOISELESS = "noiseless-shots"
NOISY = "noisy-shots"
MODES = (EXACT, NOISELESS, NOISY)

# spawn-key namespaces for deterministic counter-based RNG streams
_NS_CALIBRATION = 0
_NS_INIT = 1
_NS_EVAL = 2
_NS_FINAL = 3


@dataclass
class QuantumBackend:
    """Evaluation context: mode, shot count, noise model, mitigation, seed."""

    mode: str = EXACT
    shots: int = 8192
    noise_model: NoiseModel | None = None
    mitigate_readout: bool = False
    seed: int = 0
    ansatz_depth: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode != EXACT and self.shots < 1:
            raise ValueError("shot modes require shots >= 1")
        if (self.mode == NOISY) != (self.noise_model is not None):
            raise ValueError("noise model must be present exactly in noisy-shots mode")
        self._calibration = {}

    def rng(self, *key) -> np.random.Generator:
        """Counter-based stream: identical (seed, key) gives identical bits."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key)))

    def prepare_state(self, params, n: int):
        circuit = build_ry_ansatz(n, self.ansatz_depth, params)
        if self.mode == NOISY:
            return evolve_density_with_noise(circuit, self.noise_model)
        return evolve_statevector(circuit)

    def readout_matrix(self, n: int):
        if self.mode != NOISY or not self.mitigate_readout:
            return None
        if n not in self._calibration:
            self._calibration[n] = calibrate_readout_mitigation(
                self.noise_model, n, self.shots, self.rng(_NS_CALIBRATION, n)
            )
        return self._calibration[n]

    def n_params(self, n: int) -> int:
        return n * (self.ansatz_depth + 1)

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "shots": self.shots,
            "mitigation": self.mitigate_readout,
            "seed": self.seed,
            "ansatz_depth": self.ansatz_depth,
            "noise_scale": None if self.noise_model is None else self.noise_model.scale,
        }


def evaluate_observables(observables, params, backend: QuantumBackend, key=()):
    """Expectation values (and covariance) of PauliSums sharing one dataset.

    Exact mode computes <ψ|O|ψ> with zero covariance.  Shot modes build the
    union QWC grouping once, sample each group with the backend's shots and
    reuse that dataset for every observable.
    """
    observables = list(observables)
    n = observables[0].n
    if any(o.n != n for o in observables):
        raise ValueError("observables must share the qubit count")
    params = np.asarray(params, dtype=float)
    if params.shape != (backend.n_params(n),):
        raise ValueError("parameter vector does not match the ansatz")

    state = backend.prepare_state(params, n)
    if backend.mode == EXACT:
        values = np.array([o.expectation(state) for o in observables])
        return values, np.zeros((len(observables), len(observables)))

    union = PauliSum(n, [(1.0, s) for o in observables for s in o.strings])
    groups = qwc_group(union)
    nm = backend.noise_model if backend.mode == NOISY else None
    counts = [
        sample_counts(state, g, backend.shots, nm=nm, rng=backend.rng(*key, gi))
        for gi, g in enumerate(groups)
    ]
    return estimate_expectations_with_covariance(
        observables, groups, counts, union, mitigation=backend.readout_matrix(n)
    )


@dataclass
class VQEResult:
    parameters: np.ndarray
    energy: float
    energy_variance: float
    trace: list = field(default_factory=list)
    n_evaluations: int = 0
    warning: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "parameters": list(map(float, self.parameters)),
                "energy": self.energy,
                "energy_variance": self.energy_variance,
                "trace": [[int(i), float(e)] for i, e in self.trace],
                "n_evaluations": self.n_evaluations,
                "warning": self.warning,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "VQEResult":
        raw = json.loads(text)
        return cls(
            parameters=np.array(raw["parameters"]),
            energy=raw["energy"],
            energy_variance=raw["energy_variance"],
            trace=[(int(i), float(e)) for i, e in raw["trace"]],
            n_evaluations=raw["n_evaluations"],
            warning=raw.get("warning"),
        )


def vqe_minimize(
    h: PauliSum,
    backend: QuantumBackend,
    init=None,
    warm: bool = False,
    optimizer: str = "cobyla",
    max_evaluations: int = 500,
    key=(),
) -> VQEResult:
    """Derivative-free minimization of E(θ); returns the best-seen parameters.

    COBYLA runs with initial trust radius 0.5 rad (0.05 warm-started), final
    radius 1e-4 rad and a 500-evaluation cap; a Nelder-Mead fallback is
    switchable.  In shot modes the reported energy is re-evaluated once at the
    optimum with a fresh dataset.
    """
    n = h.n
    n_params = backend.n_params(n)
    if init is None:
        jitter = backend.rng(*key, _NS_INIT).uniform(-0.05, 0.05, n_params)
        x0 = np.zeros(n_params) + jitter
    else:
        x0 = np.asarray(init, dtype=float)
        if x0.shape != (n_params,):
            raise ValueError("initial parameter vector has the wrong length")

    trace = []
    best = {"energy": np.inf, "params": x0.copy()}
    counter = [0]

    def objective(theta):
        idx = counter[0]
        counter[0] += 1
        # one stream per optimization (common random numbers): the sampled
        # landscape is a deterministic function of θ, which derivative-free
        # optimizers need; the reported energy is re-measured freshly below.
        value, _ = evaluate_observables([h], theta, backend, key=(*key, _NS_EVAL))
        e = float(value[0])
        trace.append((idx, e))
        if e < best["energy"]:
            best["energy"] = e
            best["params"] = np.array(theta, dtype=float)
        return e

    if optimizer == "cobyla":
        scipy.optimize.minimize(
            objective,
            x0,
            method="COBYLA",
            tol=1e-4,
            options={"rhobeg": 0.05 if warm else 0.5, "maxiter": max_evaluations},
        )
    elif optimizer == "nelder-mead":
        scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-10, "maxfev": max_evaluations},
        )
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    warning = None
    if backend.mode == EXACT and len(trace) > 100:
        early_best = min(e for _, e in trace[:-100])
        if early_best - best["energy"] < 1e-8:
            warning = "converged-with-warning: no improvement > 1e-8 Ha over the last 100 evaluations"

    if backend.mode == EXACT:
        energy, variance = best["energy"], 0.0
    else:
        value, cov = evaluate_observables([h], best["params"], backend, key=(*key, _NS_FINAL))
        energy, variance = float(value[0]), float(cov[0, 0])

    return VQEResult(
        parameters=best["params"],
        energy=energy,
        energy_variance=variance,
        trace=trace,
        n_evaluations=counter[0],
        warning=warning,
    )
