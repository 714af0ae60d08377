"""Dyall zeroth-order Hamiltonian, reference energy and excitation bases."""

from dataclasses import dataclass, field

import numpy as np

from mrrpa.errors import NonPositiveGapError
from mrrpa.integrals import rotate_orbitals, spinorbitalize

OFFDIAG_TOL = 1e-12


@dataclass(frozen=True)
class OrbitalPartition:
    """Spatial-orbital counts for the core / active / virtual split.

    Orbitals are taken in file order: the first ``ncore`` are core, the next
    ``nact`` active, the rest virtual.  The first ``nfrozen`` core orbitals
    still contribute to the mean fields but generate no excitations.
    """

    ncore: int
    nact: int
    nvirt: int
    n_elec: int
    nfrozen: int = 0

    def __post_init__(self):
        if min(self.ncore, self.nact, self.nvirt, self.nfrozen) < 0:
            raise ValueError("orbital counts must be non-negative")
        if not 0 <= self.n_act_elec <= 2 * self.nact:
            raise ValueError(
                f"{self.n_act_elec} active electrons do not fit in {self.nact} active orbitals"
            )
        if self.nfrozen > self.ncore:
            raise ValueError("cannot freeze more orbitals than there are core orbitals")

    @classmethod
    def from_counts(cls, n_orb, n_elec, ncore, nact, nfrozen=0):
        return cls(ncore, nact, n_orb - ncore - nact, n_elec, nfrozen)

    @property
    def n_orb(self):
        return self.ncore + self.nact + self.nvirt

    @property
    def n_act_elec(self):
        return self.n_elec - 2 * self.ncore

    @property
    def core(self):
        """Spin-orbital indices of all core orbitals (mean-field)."""
        return np.arange(0, 2 * self.ncore)

    @property
    def core_active(self):
        """Core spin orbitals that generate excitations."""
        return np.arange(2 * self.nfrozen, 2 * self.ncore)

    @property
    def act(self):
        return np.arange(2 * self.ncore, 2 * (self.ncore + self.nact))

    @property
    def virt(self):
        return np.arange(2 * (self.ncore + self.nact), 2 * self.n_orb)


def active_hamiltonian(store, part):
    """h_eff[x, y] = h_xy + sum_k <xk||yk> and the active <xy||zw> block."""
    g = store.physicist()
    c, x = part.core, part.act
    heff = store.h_so[np.ix_(x, x)] + np.einsum("xkyk->xy", g[np.ix_(x, c, x, c)])
    vbar_act = np.ascontiguousarray(g[np.ix_(x, x, x, x)])
    return heff, vbar_act


def generalized_fock(store, part, gamma):
    """f_pq = h_pq + sum_k <pk||qk> + sum_xy <px||qy> gamma_xy over all spin orbitals."""
    g = store.physicist()
    c, x = part.core, part.act
    f = store.h_so + np.einsum("pkqk->pq", g[:, c][:, :, :, c])
    if len(x):
        f = f + np.einsum("pxqy,xy->pq", g[:, x][:, :, :, x], gamma)
    return f


def _block_rotation(f):
    n = f.shape[0]
    if n == 0:
        return np.eye(0)
    off = f - np.diag(np.diag(f))
    if np.abs(off).max() < OFFDIAG_TOL:
        return np.eye(n)
    _, u = np.linalg.eigh(f)
    for k in range(n):
        j = np.argmax(np.abs(u[:, k]))
        if u[j, k] < 0:
            u[:, k] *= -1
    return u


def semicanonicalize(store, part, gamma):
    """Rotate core and virtual orbitals so their generalized Fock blocks are diagonal.

    Returns the rotated store and the spatial rotation matrix (columns are new
    orbitals in the old basis).  Active orbitals are not touched, so the active
    density matrix and h_eff are unchanged.
    """
    n = part.n_orb
    f = generalized_fock(store, part, gamma)[0::2, 0::2]
    u = np.eye(n)
    core = slice(0, part.ncore)
    virt = slice(part.ncore + part.nact, n)
    u[core, core] = _block_rotation(f[core, core])
    u[virt, virt] = _block_rotation(f[virt, virt])
    if np.array_equal(u, np.eye(n)):
        return store, u
    return spinorbitalize(rotate_orbitals(store.spatial, u)), u


def reference_energy(store, part, densities):
    """<Phi_0|H|Phi_0> for a closed-shell core times the active ground state."""
    g = store.physicist()
    c, x = part.core, part.act
    e = store.e_core + np.trace(store.h_so[np.ix_(c, c)])
    e += 0.5 * np.einsum("klkl->", g[np.ix_(c, c, c, c)])
    if len(x):
        heff, vbar_act = active_hamiltonian(store, part)
        e += np.einsum("xy,xy->", heff, densities.rdm1)
        e += 0.25 * np.einsum("xyzw,xyzw->", vbar_act, densities.rdm2)
    return float(e)


@dataclass(frozen=True)
class DyallModel:
    eps_core: np.ndarray
    eps_virt: np.ndarray
    heff: np.ndarray
    e0: float
    e_ref: float
    rotation: np.ndarray = field(repr=False)

    def eps(self, part):
        """Orbital energies indexed by global spin orbital (NaN on active orbitals)."""
        out = np.full(2 * part.n_orb, np.nan)
        out[part.core] = self.eps_core
        out[part.virt] = self.eps_virt
        return out


# --------------------------------------------------------------------------
# excitation bases


@dataclass(frozen=True)
class ExcitationBasis:
    """Labelled zeroth-order states of one channel.

    ``labels[k]`` is a tuple ``(cls, *indices)``; orbital indices are global
    spin orbitals and state indices refer to the matching sector spectrum.
    ``omega`` holds the unshifted zeroth-order energies; ``blocks`` maps each
    class number to its slice.
    """

    kind: str
    labels: tuple
    omega: np.ndarray
    blocks: dict

    def __len__(self):
        return len(self.labels)

    def block(self, cls):
        return self.blocks[cls]


def _assemble(kind, classes):
    labels, omega, blocks = [], [], {}
    for cls, items in classes:
        start = len(labels)
        for label, w in items:
            labels.append((cls,) + label)
            omega.append(w)
        blocks[cls] = slice(start, len(labels))
    return ExcitationBasis(kind, tuple(labels), np.array(omega, dtype=float), blocks)


def enumerate_ph_basis(part, model, spectra, check=True):
    eps = model.eps(part)
    core, virt = part.core_active, part.virt
    e_p1, e_m1, e_0 = spectra[1].excitations, spectra[-1].excitations, spectra[0].excitations
    classes = [
        (1, [((a, i), eps[a] - eps[i]) for a in virt for i in core]),
        (2, [((l, i), e_p1[l] - eps[i]) for l in range(len(e_p1)) for i in core]),
        (3, [((a, l), e_m1[l] + eps[a]) for a in virt for l in range(len(e_m1))]),
        (4, [((l,), e_0[l]) for l in range(1, len(e_0))]),
    ]
    basis = _assemble("ph", classes)
    if check:
        _check_positive(basis.labels, basis.omega)
    return basis


def enumerate_pp_hh_bases(part, model, spectra):
    eps = model.eps(part)
    core, virt = part.core_active, part.virt
    e_p1, e_p2 = spectra[1].excitations, spectra[2].excitations
    e_m1, e_m2 = spectra[-1].excitations, spectra[-2].excitations
    pp = _assemble("pp", [
        (1, [((a, b), eps[a] + eps[b]) for a in virt for b in virt if a > b]),
        (2, [((a, l), eps[a] + e_p1[l]) for a in virt for l in range(len(e_p1))]),
        (3, [((l,), e_p2[l]) for l in range(len(e_p2))]),
    ])
    hh = _assemble("hh", [
        (1, [((i, j), -eps[i] - eps[j]) for i in core for j in core if i > j]),
        (2, [((i, l), e_m1[l] - eps[i]) for i in core for l in range(len(e_m1))]),
        (3, [((l,), e_m2[l]) for l in range(len(e_m2))]),
    ])
    return pp, hh


def _check_positive(labels, omega):
    bad = np.flatnonzero(~(omega > 0))
    if bad.size:
        raise NonPositiveGapError([labels[k] for k in bad], omega[bad])
