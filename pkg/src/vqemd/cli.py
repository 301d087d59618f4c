"""Command-line driver: config-file-driven pipelines with deterministic artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .chem import Molecule, build_shells, compute_ao_integrals, load_basis, run_rhf
from .errors import ConfigError, NumericalError
from .forces import LanczosSettings, scan_lanczos_d
from .md import (
    MDConfig,
    Trajectory,
    analyze_trajectory,
    geometry_optimize,
    run_langevin,
    run_nve,
)
from .pauli import exact_diagonalize
from .pipeline import MAPPINGS, HamiltonianPipeline
from .qsim import NoiseModel
from .vqe import MODES, QuantumBackend, vqe_minimize

COMMANDS = (
    "integrals",
    "pes-scan",
    "vqe",
    "lanczos-scan",
    "opt",
    "md-nve",
    "md-langevin",
    "noise-ablation",
    "analyze",
)

_SCHEMA = {
    "schema_version": None,
    "label": None,
    "molecule": None,
    "basis": None,
    "mapping": None,
    "output_dir": None,
    "backend": {"mode", "shots", "noise_model", "noise_scale", "mitigation", "seed"},
    "force": {"delta_r", "estimator", "lanczos"},
    "md": {
        "dt_fs",
        "steps",
        "integrator",
        "temperature_k",
        "equilibration_fs",
        "verlet_variant",
    },
    "pes": {"start", "stop", "num"},
    "lanczos_scan": {"bond_lengths", "d_values"},
    "ablation": {"depolarization", "thermalization", "readout", "mitigation"},
    "analyze": {"trajectory", "bins", "equilibration_fs", "pes_k", "bond"},
}

_DEFAULTS = {
    "schema_version": 1,
    "label": "run",
    "basis": None,
    "mapping": "parity2",
    "output_dir": "out",
    "backend": {
        "mode": "exact-matrix",
        "shots": 8192,
        "noise_model": None,
        "noise_scale": 1.0,
        "mitigation": False,
        "seed": 0,
    },
    "force": {"delta_r": 1e-3, "estimator": "hf-fd", "lanczos": None},
    "md": {
        "dt_fs": 0.2,
        "steps": 500,
        "integrator": "verlet",
        "temperature_k": 423.0,
        "equilibration_fs": 400.0,
        "verlet_variant": "standard",
    },
}


def _check_keys(raw: dict):
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            for sub in value:
                if sub not in allowed:
                    raise ConfigError(f"unknown config key {key}.{sub}")


def load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw)
    version = raw.get("schema_version")
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version!r} (expected 1)")
    cfg = json.loads(json.dumps(_DEFAULTS))
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    base = os.path.dirname(os.path.abspath(path))
    cfg["_base_dir"] = base
    return cfg


def _resolve_path(cfg, value):
    if value is None:
        return None
    if os.path.isabs(value):
        return value
    return os.path.join(cfg["_base_dir"], value)


def _load_molecule(cfg) -> Molecule:
    path = _resolve_path(cfg, cfg.get("molecule"))
    if path is None:
        raise ConfigError("config requires a 'molecule' path")
    if not os.path.exists(path):
        raise ConfigError(f"molecule file not found: {path}")
    with open(path) as fh:
        return Molecule.from_xyz(fh.read())


def _load_basis_dict(cfg):
    path = _resolve_path(cfg, cfg.get("basis"))
    if path is not None and not os.path.exists(path):
        raise ConfigError(f"basis file not found: {path}")
    return load_basis(path)


def _make_backend(cfg) -> QuantumBackend:
    b = cfg["backend"]
    if b["mode"] not in MODES:
        raise ConfigError(f"unknown backend mode {b['mode']!r}")
    noise_model = None
    if b["mode"] == "noisy-shots":
        path = _resolve_path(cfg, b.get("noise_model"))
        if path is None:
            raise ConfigError("noisy-shots backend requires backend.noise_model")
        if not os.path.exists(path):
            raise ConfigError(f"noise model file not found: {path}")
        with open(path) as fh:
            noise_model = NoiseModel.from_json(fh.read())
        scale = float(b.get("noise_scale", 1.0))
        if scale != noise_model.scale:
            noise_model = noise_model.with_scale(scale)
    return QuantumBackend(
        mode=b["mode"],
        shots=int(b["shots"]),
        noise_model=noise_model,
        mitigate_readout=bool(b["mitigation"]),
        seed=int(b["seed"]),
    )


def _lanczos_settings(cfg) -> LanczosSettings | None:
    lz = cfg["force"].get("lanczos")
    if lz is None:
        return None
    return LanczosSettings(
        pes_d=float(lz.get("pes_d", -0.4)), forces_d=float(lz.get("forces_d", -0.1))
    )


def _md_config(cfg, integrator) -> MDConfig:
    m = cfg["md"]
    if cfg["mapping"] not in MAPPINGS:
        raise ConfigError(f"unknown mapping {cfg['mapping']!r}")
    return MDConfig(
        dt_fs=float(m["dt_fs"]),
        steps=int(m["steps"]),
        integrator=integrator,
        temperature_k=float(m["temperature_k"]),
        mapping=cfg["mapping"],
        delta_r=float(cfg["force"]["delta_r"]),
        lanczos=_lanczos_settings(cfg),
        verlet_variant=m["verlet_variant"],
        equilibration_fs=float(m["equilibration_fs"]),
    )


def _public_config(cfg) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _artifact(cfg, command, ext, suffix=""):
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg["backend"]["seed"]
    name = f"{command}_{cfg['label']}{suffix}_{seed}.{ext}"
    return os.path.join(out_dir, name)


def _write_csv(path, cfg, header, rows):
    with open(path, "w") as fh:
        fh.write("# config: " + json.dumps(_public_config(cfg), sort_keys=True) + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path, cfg, payload):
    payload = dict(payload)
    payload["config"] = _public_config(cfg)
    payload["version"] = __version__
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_trajectory(cfg, command, traj: Trajectory):
    csv_path = _artifact(cfg, command, "csv")
    with open(csv_path, "w") as fh:
        fh.write("# config: " + json.dumps(_public_config(cfg), sort_keys=True) + "\n")
        fh.write(traj.to_csv())
    with open(_artifact(cfg, command, "xyz"), "w") as fh:
        fh.write(traj.to_xyz())
    traj.metadata["resolved_config"] = _public_config(cfg)
    with open(_artifact(cfg, command, "json"), "w") as fh:
        fh.write(json.dumps(traj.metadata, indent=2, default=_json_default))
    return csv_path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_integrals(cfg):
    mol = _load_molecule(cfg)
    basis = _load_basis_dict(cfg)
    shells = build_shells(mol, basis)
    ao = compute_ao_integrals(mol, shells)
    mo = run_rhf(ao, mol.n_electrons)
    pipeline = HamiltonianPipeline(cfg["mapping"], basis=basis)
    built = pipeline.build(mol)
    _write_json(
        _artifact(cfg, "integrals", "json"),
        cfg,
        {
            "e_nn_ha": ao.e_nn,
            "overlap": ao.S,
            "hcore": ao.hcore,
            "eri_chemists": ao.eri,
            "scf_energy_ha": mo.scf_energy,
            "orbital_energies_ha": mo.orbital_energies,
            "mapping": built.info,
        },
    )
    with open(_artifact(cfg, "integrals", "pauli"), "w") as fh:
        fh.write("# config: " + json.dumps(_public_config(cfg), sort_keys=True) + "\n")
        fh.write(built.hamiltonian.dumps())
    return 0


def _cmd_pes_scan(cfg):
    if "pes" not in cfg:
        raise ConfigError("pes-scan requires a 'pes' section")
    mol = _load_molecule(cfg)
    if mol.n_atoms != 2:
        raise ConfigError("pes-scan stretches a diatomic; supply a 2-atom molecule")
    pes = cfg["pes"]
    grid = np.linspace(float(pes["start"]), float(pes["stop"]), int(pes["num"]))
    backend = _make_backend(cfg)
    pipeline = HamiltonianPipeline(cfg["mapping"], basis=_load_basis_dict(cfg))
    rows = []
    params = None
    for i, r in enumerate(grid):
        geom = Molecule(((1, (0.0, 0.0, 0.0)), (1, (0.0, 0.0, float(r)))), 0, mol.label)
        built = pipeline.build(geom)
        res = vqe_minimize(
            built.hamiltonian, backend, init=params, warm=params is not None, key=(i,)
        )
        params = res.parameters
        e_exact, _ = exact_diagonalize(built.hamiltonian)
        rows.append(
            [
                f"{r:.17g}",
                f"{res.energy:.17g}",
                f"{np.sqrt(max(res.energy_variance, 0.0)):.17g}",
                f"{e_exact:.17g}",
            ]
        )
    path = _artifact(cfg, "pes-scan", "csv")
    _write_csv(path, cfg, "r_angstrom,e_ha,sigma_e_ha,e_exact_ha", rows)
    return 0


def _cmd_vqe(cfg):
    mol = _load_molecule(cfg)
    backend = _make_backend(cfg)
    pipeline = HamiltonianPipeline(cfg["mapping"], basis=_load_basis_dict(cfg))
    built = pipeline.build(mol)
    res = vqe_minimize(built.hamiltonian, backend)
    e_exact, _ = exact_diagonalize(built.hamiltonian)
    _write_json(
        _artifact(cfg, "vqe", "json"),
        cfg,
        {
            "result": json.loads(res.to_json()),
            "exact_energy_ha": e_exact,
            "mapping": built.info,
        },
    )
    return 0


def _cmd_lanczos_scan(cfg):
    if "lanczos_scan" not in cfg:
        raise ConfigError("lanczos-scan requires a 'lanczos_scan' section")
    mol = _load_molecule(cfg)
    if mol.n_atoms != 2:
        raise ConfigError("lanczos-scan stretches a diatomic; supply a 2-atom molecule")
    section = cfg["lanczos_scan"]
    backend = _make_backend(cfg)
    pipeline = HamiltonianPipeline(cfg["mapping"], basis=_load_basis_dict(cfg))
    geometries = [
        Molecule(((1, (0.0, 0.0, 0.0)), (1, (0.0, 0.0, float(r)))), 0, mol.label)
        for r in section["bond_lengths"]
    ]
    rows = scan_lanczos_d(pipeline, geometries, section["d_values"], backend)
    path = _artifact(cfg, "lanczos-scan", "csv")
    _write_csv(
        path,
        cfg,
        "r_angstrom,d,delta_e_ha,sigma_e_ha,n_psi0,condition_ok",
        [
            [
                f"{row['r_angstrom']:.17g}",
                f"{row['d']:.17g}",
                f"{row['delta_e']:.17g}",
                f"{row['sigma_e']:.17g}",
                f"{row['n_psi0']:.17g}",
                str(int(row["condition_ok"])),
            ]
            for row in rows
        ],
    )
    return 0


def _cmd_opt(cfg):
    mol = _load_molecule(cfg)
    backend = _make_backend(cfg)
    final, report = geometry_optimize(
        mol,
        backend,
        mapping=cfg["mapping"],
        delta_r=float(cfg["force"]["delta_r"]),
        lanczos=_lanczos_settings(cfg),
        basis=_load_basis_dict(cfg),
    )
    _write_json(_artifact(cfg, "opt", "json"), cfg, {"report": report})
    with open(_artifact(cfg, "opt", "xyz"), "w") as fh:
        fh.write(final.to_xyz())
    return 0


def _cmd_md(cfg, integrator):
    mol = _load_molecule(cfg)
    backend = _make_backend(cfg)
    config = _md_config(cfg, integrator)
    runner = run_nve if integrator == "verlet" else run_langevin
    traj = runner(mol, config, backend, basis=_load_basis_dict(cfg))
    command = "md-nve" if integrator == "verlet" else "md-langevin"
    _write_trajectory(cfg, command, traj)
    if traj.metadata.get("aborted"):
        raise NumericalError(f"MD aborted: {traj.metadata['aborted']['reason']}")
    return 0


def _cmd_noise_ablation(cfg):
    """NVE run with individual noise channels toggled per the ablation section.

    All channels disabled dispatches to the noiseless-shots backend so the
    result is frame-for-frame identical to a noiseless run at the same seed.
    """
    if "ablation" not in cfg:
        raise ConfigError("noise-ablation requires an 'ablation' section")
    ab = cfg["ablation"]
    toggles = {
        "depolarization": bool(ab.get("depolarization", False)),
        "thermalization": bool(ab.get("thermalization", False)),
        "readout": bool(ab.get("readout", False)),
    }
    backend = _make_backend(cfg)
    if backend.mode != "noisy-shots":
        raise ConfigError("noise-ablation requires a noisy-shots backend")
    if any(toggles.values()):
        model = backend.noise_model.with_channels(**toggles)
        backend = QuantumBackend(
            mode="noisy-shots",
            shots=backend.shots,
            noise_model=model,
            mitigate_readout=bool(ab.get("mitigation", False)),
            seed=backend.seed,
        )
    else:
        backend = QuantumBackend(
            mode="noiseless-shots", shots=backend.shots, seed=backend.seed
        )
    mol = _load_molecule(cfg)
    config = _md_config(cfg, "verlet")
    traj = run_nve(mol, config, backend, basis=_load_basis_dict(cfg))
    traj.metadata["ablation"] = {**toggles, "mitigation": bool(ab.get("mitigation", False))}
    _write_trajectory(cfg, "noise-ablation", traj)
    if traj.metadata.get("aborted"):
        raise NumericalError(f"MD aborted: {traj.metadata['aborted']['reason']}")
    return 0


def _cmd_analyze(cfg):
    if "analyze" not in cfg:
        raise ConfigError("analyze requires an 'analyze' section")
    section = cfg["analyze"]
    path = _resolve_path(cfg, section.get("trajectory"))
    if path is None or not os.path.exists(path):
        raise ConfigError(f"trajectory file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        traj = Trajectory.from_csv(text)
    except NumericalError as exc:
        raise ConfigError(f"unusable trajectory file {path}: {exc}") from exc
    try:
        report = analyze_trajectory(
            traj,
            bins=int(section.get("bins", 50)),
            equilibration_fs=section.get("equilibration_fs"),
            bond=tuple(section.get("bond", (0, 1))),
            pes_k=section.get("pes_k"),
        )
    except NumericalError as exc:
        raise ConfigError(f"trajectory too short to analyze: {exc}") from exc
    payload = {
        "n_frames": report["n_frames"],
        "temperature_mean_k": report["temperature"]["mean"],
        "temperature_binning_error_k": report["temperature"]["binning_error"],
        "binning_levels": report["temperature"]["binning_levels"],
        "bond_pair": report["bond"]["pair"],
        "gaussian_fit": report["bond"]["gaussian_fit"],
        "histogram_centers": report["bond"]["histogram_centers"],
        "histogram_density": report["bond"]["histogram_density"],
        "histogram_peaks": report["bond"]["peaks"],
        "e_tot_first_ha": float(report["e_tot"][0]),
        "e_tot_last_ha": float(report["e_tot"][-1]),
    }
    _write_json(_artifact(cfg, "analyze", "json"), cfg, payload)
    return 0


_HANDLERS = {
    "integrals": _cmd_integrals,
    "pes-scan": _cmd_pes_scan,
    "vqe": _cmd_vqe,
    "lanczos-scan": _cmd_lanczos_scan,
    "opt": _cmd_opt,
    "md-nve": lambda cfg: _cmd_md(cfg, "verlet"),
    "md-langevin": lambda cfg: _cmd_md(cfg, "langevin"),
    "noise-ablation": _cmd_noise_ablation,
    "analyze": _cmd_analyze,
}


def run_command(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="vqemd",
        description="VQE-driven molecular dynamics of small hydrogen systems",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--backend", choices=MODES, help="backend mode override")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg["output_dir"] = args.out
        if args.seed is not None:
            cfg["backend"]["seed"] = args.seed
        if args.backend is not None:
            cfg["backend"]["mode"] = args.backend
        return _HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
