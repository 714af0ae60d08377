"""Generate the FCIDUMP fixtures in tests/data with PySCF.

This script is run once by hand; the package and the test-suite only read the
files it writes.  PySCF is not a dependency of the package.

    python3 scripts/prepare_fixtures.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from pyscf import ao2mo, gto, mcscf, scf

from mrrpa.integrals import SpatialIntegrals, write_fcidump

HF_R0 = 0.92  # Angstrom


def dump(path, mol, mo, comment=""):
    h = mo.T @ scf.hf.get_hcore(mol) @ mo
    n = mo.shape[1]
    eri = ao2mo.restore(1, ao2mo.full(mol, mo, compact=True), n)
    s = SpatialIntegrals(n, mol.nelectron, mol.spin, mol.energy_nuc(), 0.5 * (h + h.T), eri)
    write_fcidump(path, s)
    print(f"{path.name:28s} n_orb={n:3d} n_elec={mol.nelectron:3d} {comment}")


def rhf(atom, basis):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0, symmetry=False)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    if not mf.converged:
        raise RuntimeError(f"RHF did not converge for {atom}")
    return mol, mf


def casscf(mf, ncas, nelecas, pick=None, guess=None):
    """CASSCF; ``guess`` = (mo_coeff, mol) of a neighbouring geometry to project from."""
    mc = mcscf.CASSCF(mf, ncas, nelecas)
    mc.conv_tol = 1e-10
    mc.conv_tol_grad = 1e-5
    mc.max_cycle_macro = 200
    mc.verbose = 0
    mo = mf.mo_coeff
    if guess is not None:
        mo = mcscf.project_init_guess(mc, *guess)
    elif pick is not None:
        mo = mc.sort_mo(pick)
    mc.kernel(mo)
    if not mc.converged:
        raise RuntimeError("CASSCF did not converge")
    return mc


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    # HF / cc-pVDZ, CAS(2,2) over the sigma bond (3sigma, 4sigma*).  The stretched
    # geometry is reached by following the CASSCF solution along the bond; starting
    # from the stretched RHF orbitals lands on a higher (pi-type) solution.
    guess = None
    for ratio in (1.0, 1.4, 1.8, 2.4, 3.0):
        r = ratio * HF_R0
        mol, mf = rhf(f"F 0 0 0; H 0 0 {r}", "cc-pvdz")
        mc = casscf(mf, 2, 2, pick=[3, 6], guess=guess)
        guess = (mc.mo_coeff, mol)
        if ratio not in (1.0, 3.0):
            continue
        tag = f"{ratio:.1f}".replace(".", "p")
        dump(outdir / f"hf_ccpvdz_r{tag}_casscf.fcidump", mol, mc.mo_coeff,
             f"E_CASSCF={mc.e_tot:.8f}")
        dump(outdir / f"hf_ccpvdz_r{tag}_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")
    r = 2.0 * HF_R0
    mol, mf = rhf(f"F 0 0 0; H 0 0 {r}", "cc-pvdz")
    dump(outdir / "hf_ccpvdz_r2p0_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")

    # small molecules for the oracle-based and route-equivalence tests
    mol, mf = rhf("H 0 0 0; H 0 0 0.74", "6-31g")
    dump(outdir / "h2_631g_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")
    mc = casscf(mf, 2, 2)
    dump(outdir / "h2_631g_casscf.fcidump", mol, mc.mo_coeff, f"E_CASSCF={mc.e_tot:.8f}")

    mol, mf = rhf("Li 0 0 0; H 0 0 1.6", "sto-3g")
    dump(outdir / "lih_sto3g_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")
    mc = casscf(mf, 2, 2)
    dump(outdir / "lih_sto3g_casscf.fcidump", mol, mc.mo_coeff, f"E_CASSCF={mc.e_tot:.8f}")

    mol, mf = rhf("H 0 0 0; H 0 0 0.9; H 0 0 1.8; H 0 0 2.7", "sto-3g")
    dump(outdir / "h4_sto3g_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")
    mc = casscf(mf, 4, 4)
    dump(outdir / "h4_sto3g_casscf.fcidump", mol, mc.mo_coeff, f"E_CASSCF={mc.e_tot:.8f}")

    mol, mf = rhf("H 0 0 0; H 0 0 0.9; H 0 0 1.8; H 0 0 2.7", "6-31g")
    mc = casscf(mf, 4, 4)
    dump(outdir / "h4_631g_casscf.fcidump", mol, mc.mo_coeff, f"E_CASSCF={mc.e_tot:.8f}")

    # stretched H2: the RHF determinant has a triplet instability
    mol, mf = rhf("H 0 0 0; H 0 0 2.5", "sto-3g")
    dump(outdir / "h2_sto3g_stretched_rhf.fcidump", mol, mf.mo_coeff, f"E_RHF={mf.e_tot:.8f}")


if __name__ == "__main__":
    np.set_printoptions(precision=10)
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests" / "data")
