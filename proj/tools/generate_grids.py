#!/usr/bin/env python3
"""Generate geometry-gridded FCIDUMP files and manifests with PySCF.

Base geometries are FCI/STO-3G equilibria (H2 additionally at 1.40 Bohr).
Orbitals per grid point (--orbitals):
  canonical  RHF orbitals at that geometry, rotated onto the base orbitals
             only within groups degenerate at R0 (fixes signs and the
             freedom inside degenerate pairs). Default.
  relaxed    RHF orbitals, occupied and virtual blocks each rotated onto
             the base orbitals.
  fixed      base orbitals, Loewdin-orthonormalized at each geometry.

Usage: generate_grids.py [--out data] [--only h2,beh2,...]
                         [--orbitals canonical|relaxed|fixed] [--step 0.0025]
"""

import argparse
import json
import os

import numpy as np
from pyscf import ao2mo, fci, gto, scf
from pyscf.tools import fcidump
from scipy.optimize import minimize

STEP = 2.5e-3
SCAN = [round(-0.75 + 0.05 * k, 10) for k in range(31)]


def build_mol(symbols, coords, charge=0):
    atom = [(s, tuple(c)) for s, c in zip(symbols, coords)]
    return gto.M(atom=atom, basis="sto-3g", unit="bohr", charge=charge,
                 verbose=0)


def run_hf(mol, dm0=None):
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-13
    mf.conv_tol_grad = 1e-9
    mf.max_cycle = 200
    try:
        mf.kernel(dm0=dm0)
    except np.linalg.LinAlgError:
        # DIIS subspace goes singular when the guess is already converged.
        mf.diis = None
        mf.kernel(dm0=dm0)
    if not mf.converged:
        raise RuntimeError("SCF did not converge")
    return mf


ORBITALS = "canonical"


def fix_signs(c):
    c = c.copy()
    for k in range(c.shape[1]):
        i = np.argmax(np.abs(c[:, k]))
        if c[i, k] < 0:
            c[:, k] *= -1
    return c


def procrustes(block, s, ref):
    m = block.T @ s @ ref
    u, _, vt = np.linalg.svd(m)
    return block @ (u @ vt)


class Molecule:
    def __init__(self, name, symbols, coords, charge=0, orbitals=None):
        self.name = name
        self.orbitals = orbitals or ORBITALS
        self.symbols = symbols
        self.base = np.array(coords, dtype=float)
        self.charge = charge
        mol = build_mol(symbols, self.base, charge)
        self.mf0 = run_hf(mol)
        self.c0 = fix_signs(self.mf0.mo_coeff)
        self.nocc = int(np.sum(self.mf0.mo_occ > 0))
        # Orbitals degenerate at the reference; a singleton only fixes a sign.
        e = self.mf0.mo_energy
        self.groups = [[0]]
        for k in range(1, len(e)):
            if abs(e[k] - e[k - 1]) < 1e-6:
                self.groups[-1].append(k)
            else:
                self.groups.append([k])
        self.nelec = mol.nelectron
        self.masses = [float(m) for m in mol.atom_mass_list(isotope_avg=True)]

    def integrals(self, disp):
        coords = self.base + disp.reshape(-1, 3)
        mol = build_mol(self.symbols, coords, self.charge)
        s = mol.intor("int1e_ovlp")
        if self.orbitals == "fixed":
            # Reference coefficients, symmetrically orthonormalized at R.
            m = self.c0.T @ s @ self.c0
            w, v = np.linalg.eigh(m)
            c = self.c0 @ (v @ np.diag(w ** -0.5) @ v.T)
        elif self.orbitals == "canonical":
            # Canonical orbitals, each sign aligned with its reference.
            c = run_hf(mol, dm0=self.mf0.make_rdm1()).mo_coeff.copy()
            for g in self.groups:
                c[:, g] = procrustes(c[:, g], s, self.c0[:, g])
        else:
            mf = run_hf(mol, dm0=self.mf0.make_rdm1())
            c = mf.mo_coeff
            o = self.nocc
            c = np.hstack([procrustes(c[:, :o], s, self.c0[:, :o]),
                           procrustes(c[:, o:], s, self.c0[:, o:])])
        h1 = c.T @ mol.intor("int1e_kin") @ c + c.T @ mol.intor("int1e_nuc") @ c
        eri = ao2mo.restore(1, ao2mo.full(mol, c), c.shape[1])
        return mol, h1, eri

    def write(self, path, disp):
        mol, h1, eri = self.integrals(disp)
        n = h1.shape[0]
        fcidump.from_integrals(path, h1, eri, n, self.nelec,
                               nuc=mol.energy_nuc(), ms=0, tol=1e-15)
        return h1, eri, mol.energy_nuc()

    def fci_energy(self, disp):
        mol, h1, eri = self.integrals(disp)
        e, _ = fci.direct_spin1.kernel(h1, eri, h1.shape[0], self.nelec,
                                       ecore=mol.energy_nuc(), conv_tol=1e-13)
        return float(e)


def hessian_labels(ncoord, extended=False):
    labels = [[]]
    for i in range(1, ncoord + 1):
        labels += [[i], [-i]]
        if extended:
            labels += [[i, i], [-i, -i]]
    for i in range(1, ncoord + 1):
        for j in range(i + 1, ncoord + 1):
            for si in (1, -1):
                for sj in (1, -1):
                    labels.append([si * i, sj * j])
    return labels


def label_disp(label, ncoord, step):
    d = np.zeros(ncoord)
    for s in label:
        d[abs(s) - 1] += step * np.sign(s)
    return d


def label_name(label):
    if not label:
        return "base"
    return "_".join(("p" if s > 0 else "m") + str(abs(s)) for s in label)


def emit(mol, outdir, extended=False, scan_direction=None):
    os.makedirs(outdir, exist_ok=True)
    ncoord = 3 * len(mol.symbols)
    points = []
    for label in hessian_labels(ncoord, extended):
        fname = f"{label_name(label)}.fcidump"
        mol.write(os.path.join(outdir, fname), label_disp(label, ncoord, STEP))
        points.append({"label": label, "file": fname})
    manifest = {
        "molecule": mol.name,
        "atoms": [{"symbol": s, "mass_amu": m, "xyz_bohr": list(map(float, x))}
                  for s, m, x in zip(mol.symbols, mol.masses, mol.base)],
        "step_bohr": STEP,
        "points": points,
    }
    reference = {"fci_energy_base": mol.fci_energy(np.zeros(ncoord)),
                 "hf_energy_base": float(mol.mf0.e_tot)}
    if scan_direction is not None:
        direction = np.array(scan_direction, dtype=float)
        os.makedirs(os.path.join(outdir, "scan"), exist_ok=True)
        scan = []
        for k, delta in enumerate(SCAN):
            fname = f"scan/s{k:02d}.fcidump"
            mol.write(os.path.join(outdir, fname), delta * direction)
            scan.append({"delta": delta, "file": fname})
        manifest["scan"] = {"direction": direction.tolist(), "points": scan}
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
    with open(os.path.join(outdir, "reference.json"), "w") as f:
        json.dump(reference, f, indent=1)
    print(mol.name, len(points), "points", reference)


def optimize(energy, x0):
    res = minimize(energy, x0, method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-13, "maxiter": 4000})
    return res.x


def fci_energy(symbols, coords, charge=0):
    mol = build_mol(symbols, coords, charge)
    mf = run_hf(mol)
    solver = fci.FCI(mf)
    solver.conv_tol = 1e-13
    e, _ = solver.kernel()
    return float(e)


def main():
    global ORBITALS, STEP
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--only", default="h2,h2eq,h3p,beh2,h2o")
    ap.add_argument("--orbitals", choices=["relaxed", "canonical", "fixed"], default="canonical",
                    help="relaxed: Hartree-Fock at every geometry, rotated within the "
                         "occupied and virtual blocks onto the reference; canonical: "
                         "Hartree-Fock canonical orbitals, aligned only within "
                         "reference-degenerate groups; fixed: reference "
                         "orbitals orthonormalized at every geometry")
    ap.add_argument("--step", type=float, default=2.5e-3, help="displacement step in bohr")
    args = ap.parse_args()
    ORBITALS = args.orbitals
    STEP = args.step
    only = set(args.only.split(","))

    if "h2" in only:
        mol = Molecule("H2", ["H", "H"], [[0, 0, 0], [0, 0, 1.4]])
        emit(mol, os.path.join(args.out, "h2"), extended=True)

    if "h2eq" in only:
        r = float(optimize(
            lambda x: fci_energy(["H", "H"], [[0, 0, 0], [0, 0, x[0]]]),
            [1.39])[0])
        mol = Molecule("H2", ["H", "H"], [[0, 0, 0], [0, 0, r]])
        emit(mol, os.path.join(args.out, "h2_eq"))

    if "h3p" in only:
        def geom(x):
            r = x[0]
            return [[r / np.sqrt(3), 0, 0],
                    [-r / (2 * np.sqrt(3)), r / 2, 0],
                    [-r / (2 * np.sqrt(3)), -r / 2, 0]]
        r = optimize(lambda x: fci_energy(["H"] * 3, geom(x), 1), [1.65])
        mol = Molecule("H3+", ["H"] * 3, geom(r), charge=1)
        direction = [0, 0, 0, 0, 1, 0, 0, -1, 0]
        emit(mol, os.path.join(args.out, "h3p"), scan_direction=direction)

    if "beh2" in only:
        r = optimize(lambda x: fci_energy(["Be", "H", "H"],
                                         [[0, 0, 0], [0, 0, x[0]],
                                          [0, 0, -x[0]]]), [2.44])[0]
        mol = Molecule("BeH2", ["Be", "H", "H"],
                       [[0, 0, 0], [0, 0, r], [0, 0, -r]])
        direction = [0, 0, 0, 0, 0, 1, 0, 0, -1]
        emit(mol, os.path.join(args.out, "beh2"), scan_direction=direction)

    if "h2o" in only:
        def geom(x):
            r, a = x
            return [[0, 0, 0],
                    [0, r * np.sin(a / 2), r * np.cos(a / 2)],
                    [0, -r * np.sin(a / 2), r * np.cos(a / 2)]]
        x = optimize(lambda x: fci_energy(["O", "H", "H"], geom(x)),
                     [1.87, np.deg2rad(100.0)])
        mol = Molecule("H2O", ["O", "H", "H"], geom(x))
        emit(mol, os.path.join(args.out, "h2o"))


if __name__ == "__main__":
    main()
