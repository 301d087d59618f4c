"""Scratch probe for the long acceptance criteria (not part of the package)."""
import numpy as np, time
from vqemd import chem, md
from vqemd.vqe import QuantumBackend
from vqemd.qsim import load_athens_model
from vqemd.forces import LanczosSettings
from vqemd.pipeline import HamiltonianPipeline
from vqemd.pauli import exact_diagonalize

nm = load_athens_model()
t0 = time.time()

def stamp(msg):
    print(f"[{time.time()-t0:6.0f}s] {msg}", flush=True)

# --- criterion 3: geometry optimization noisy + lanczos
lz = LanczosSettings()
r_errs = []
for seed in range(5):
    be = QuantumBackend(mode="noisy-shots", shots=8192, noise_model=nm, seed=seed)
    final, rep = md.geometry_optimize(chem.h2_molecule(0.6), be, mapping="parity2", lanczos=lz)
    r = rep["internal_coordinates"]["r_01"]
    r_errs.append(r - 0.735)
    stamp(f"H2 opt seed {seed}: R={r:.4f} err {1e3*(r-0.735):+.1f} mA, iters={rep['iterations']} conv={rep['converged']}")
stamp(f"H2 opt: median |err| = {np.median(np.abs(r_errs))*1e3:.2f} mA (<=5 needed)")

b_errs, a_errs = [], []
for seed in range(5):
    be = QuantumBackend(mode="noisy-shots", shots=8192, noise_model=nm, seed=seed)
    mol3 = chem.h3plus_molecule(1.08, 1.08, 54.0)
    final, rep = md.geometry_optimize(mol3, be, mapping="hcb+taper", lanczos=lz)
    ic = rep["internal_coordinates"]
    b_errs += [ic["r_01"] - 0.985, ic["r_02"] - 0.985]
    a_errs.append(ic["a_102"] - 60.0)
    stamp(f"H3+ opt seed {seed}: r01={ic['r_01']:.4f} r02={ic['r_02']:.4f} a={ic['a_102']:.2f} iters={rep['iterations']}")
stamp(f"H3+ opt: median |bond err| = {np.median(np.abs(b_errs))*1e3:.2f} mA (<=10), median |angle err| = {np.median(np.abs(a_errs)):.3f} deg (<=0.5)")

# --- criterion 4b: H3+ NVE noisy VQE-L drift
mol3 = chem.h3plus_molecule(1.245, 1.245, 48.5)
cfg3 = md.MDConfig(dt_fs=0.2, steps=500, integrator="verlet", mapping="hcb+taper", lanczos=lz)
be = QuantumBackend(mode="noisy-shots", shots=8192, noise_model=nm, seed=0)
tr3 = md.run_nve(mol3, cfg3, be)
et = np.array([f.e_tot for f in tr3.frames])
stamp(f"H3+ NVE noisy VQE-L: drift(end-start windowed) = {abs(et[-25:].mean()-et[:25].mean())*1e3:.2f} mHa (<=10); aborted={tr3.metadata.get('aborted')}")

# --- criterion 4c: H2 noisy VQE-L period vs exact
def period_fs(traj):
    b = traj.bond_lengths()
    pk = [i for i in range(2, len(b)-2) if b[i] == max(b[i-2:i+3]) and b[i] > b.mean()]
    return np.diff(pk).mean() * 0.2

mol = chem.h2_molecule(0.6)
cfg = md.MDConfig(dt_fs=0.2, steps=500, integrator="verlet", mapping="parity2", lanczos=lz)
bx = QuantumBackend(mode="exact-matrix", seed=0)
tre = md.run_nve(mol, md.MDConfig(dt_fs=0.2, steps=500, integrator="verlet", mapping="parity2"), bx)
pe = period_fs(tre)
bn = QuantumBackend(mode="noisy-shots", shots=8192, noise_model=nm, seed=0)
trn = md.run_nve(mol, cfg, bn)
pn = period_fs(trn)
etn = np.array([f.e_tot for f in trn.frames])
stamp(f"periods: exact {pe:.3f} fs, noisy VQE-L {pn:.3f} fs, ratio err {abs(pn/pe-1)*100:.2f}% (<=5)")
stamp(f"H2 noisy VQE-L drift = {abs(etn[-25:].mean()-etn[:25].mean())*1e3:.2f} mHa")

# --- criterion 7: Langevin
molL = chem.h2_molecule(0.73)
cfgL = md.MDConfig(dt_fs=0.2, steps=14000, integrator="langevin", temperature_k=423.0,
                   mapping="parity2", equilibration_fs=400.0)
bL = QuantumBackend(mode="noiseless-shots", shots=1024, seed=1)
trL = md.run_langevin(molL, cfgL, bL)
rep = md.analyze_trajectory(trL, bins=40)
tmean = rep["temperature"]["mean"]; terr = rep["temperature"]["binning_error"]
fit = rep["bond"]["gaussian_fit"]
stamp(f"Langevin: T_kin = {tmean:.0f} +- {terr:.0f} K (target 423, 3sig window); peaks={rep['bond']['peaks']}")
stamp(f"gauss fit: b = {fit['b']:.4f} A (0.739+-0.01), w={fit['w']:.1f}")
EOF
