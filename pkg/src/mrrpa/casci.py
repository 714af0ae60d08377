"""Exact diagonalization of the active-space Hamiltonian in electron-number sectors.

Determinants are stored as bit words over the active spin orbitals (interleaved
as everywhere else: bit ``2x`` is active spatial orbital ``x`` with alpha spin,
bit ``2x+1`` the beta partner).  A determinant stands for
``c+_{p1} c+_{p2} ... |vac>`` with ``p1 < p2 < ...``, so creating ``q`` costs a
sign ``(-1)**(number of occupied spin orbitals below q)``.
"""

import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from mrrpa.errors import DegenerateReferenceError, DeterminantCapError

SECTORS = (-2, -1, 0, 1, 2)
DEFAULT_DET_CAP = 2_000_000
DEGENERACY_TOL = 1e-8


def determinant_cap():
    value = os.environ.get("MRRPA_DET_CAP")
    return int(value) if value else DEFAULT_DET_CAP


# --------------------------------------------------------------------------
# determinants and elementary operators


@dataclass(frozen=True, order=True)
class Determinant:
    occ_alpha: tuple
    occ_beta: tuple

    @property
    def bits(self):
        word = 0
        for x in self.occ_alpha:
            word |= 1 << (2 * x)
        for x in self.occ_beta:
            word |= 1 << (2 * x + 1)
        return word

    @property
    def n_elec(self):
        return len(self.occ_alpha) + len(self.occ_beta)


def enumerate_sector(nact, n_alpha, n_beta):
    """All determinants with the given spin populations, lexicographic in (occ_alpha, occ_beta)."""
    if not (0 <= n_alpha <= nact and 0 <= n_beta <= nact):
        return []
    return [
        Determinant(a, b)
        for a in combinations(range(nact), n_alpha)
        for b in combinations(range(nact), n_beta)
    ]


def _popcount(word):
    return bin(word).count("1")


def annihilate(word, p):
    """Apply c_p to a determinant word; return (sign, new word) or None."""
    if not word >> p & 1:
        return None
    sign = -1 if _popcount(word & ((1 << p) - 1)) & 1 else 1
    return sign, word ^ (1 << p)


def create(word, p):
    """Apply c+_p to a determinant word; return (sign, new word) or None."""
    if word >> p & 1:
        return None
    sign = -1 if _popcount(word & ((1 << p) - 1)) & 1 else 1
    return sign, word | (1 << p)


def apply_string(word, ops):
    """Apply an operator string, rightmost first.

    ``ops`` is a sequence of ``(p, dagger)`` pairs written left to right as in
    the operator product; returns (sign, word) or None when the result vanishes.
    """
    sign = 1
    for p, dagger in reversed(ops):
        out = create(word, p) if dagger else annihilate(word, p)
        if out is None:
            return None
        s, word = out
        sign *= s
    return sign, word


def _occupied(word, m):
    return [p for p in range(m) if word >> p & 1]


# --------------------------------------------------------------------------
# Hamiltonian


def build_hact(heff, vbar_act, nact, sector, cap=None):
    """Dense H_act in one (n_alpha, n_beta) block.

    ``heff`` is the active spin-orbital one-body matrix and ``vbar_act`` the
    active block of the antisymmetrized tensor in physicists' order,
    ``vbar_act[x, y, z, w] = <xy||zw>``.
    """
    dets = enumerate_sector(nact, *sector)
    cap = determinant_cap() if cap is None else cap
    if len(dets) > cap:
        raise DeterminantCapError(len(dets), cap)
    words = [d.bits for d in dets]
    index = {w: k for k, w in enumerate(words)}
    m = 2 * nact
    h = np.zeros((len(dets), len(dets)))
    for col, word in enumerate(words):
        occ = _occupied(word, m)
        vir = [p for p in range(m) if not word >> p & 1]
        diag = sum(heff[x, x] for x in occ)
        diag += 0.5 * sum(vbar_act[x, y, x, y] for x in occ for y in occ)
        h[col, col] = diag
        for y in occ:
            for x in vir:
                elem = heff[x, y] + sum(vbar_act[x, k, y, k] for k in occ)
                if elem == 0.0:
                    continue
                sign, new = apply_string(word, [(x, True), (y, False)])
                row = index.get(new)
                if row is not None:
                    h[row, col] += sign * elem
        for z, w in combinations(occ, 2):
            for x, y in combinations(vir, 2):
                elem = vbar_act[x, y, z, w]
                if elem == 0.0:
                    continue
                sign, new = apply_string(word, [(x, True), (y, True), (w, False), (z, False)])
                row = index.get(new)
                if row is not None:
                    h[row, col] += sign * elem
    return h


# --------------------------------------------------------------------------
# sector spectra


@dataclass(frozen=True)
class SectorSpectrum:
    d: int
    n_elec: int
    energies: np.ndarray
    states: np.ndarray
    excitations: np.ndarray
    dets: tuple

    @property
    def size(self):
        return len(self.energies)

    def index(self):
        return {det.bits: k for k, det in enumerate(self.dets)}


def _sz_blocks(nact, n_elec):
    return [(na, n_elec - na) for na in range(n_elec + 1) if na <= nact and n_elec - na <= nact]


def _diagonalize_sector(heff, vbar_act, nact, n_elec, cap):
    dets, energies, blocks = [], [], []
    for sector in _sz_blocks(nact, n_elec):
        h = build_hact(heff, vbar_act, nact, sector, cap)
        e, c = np.linalg.eigh(h)
        # deterministic phase: largest-magnitude component positive
        for k in range(c.shape[1]):
            j = np.argmax(np.abs(c[:, k]) > np.abs(c[:, k]).max() - 1e-10)
            if c[j, k] < 0:
                c[:, k] *= -1
        blocks.append((len(dets), c))
        dets.extend(enumerate_sector(nact, *sector))
        energies.append(e)
    ndet = len(dets)
    if ndet > cap:
        raise DeterminantCapError(ndet, cap)
    energies = np.concatenate(energies) if energies else np.zeros(0)
    states = np.zeros((ndet, ndet))
    col = 0
    for offset, c in blocks:
        n = c.shape[0]
        states[offset:offset + n, col:col + n] = c
        col += n
    order = np.argsort(energies, kind="stable")
    return tuple(dets), energies[order], states[:, order]


def diagonalize_all_sectors(heff, vbar_act, nact, n_act_elec, cap=None):
    """Spectra of H_act for N_act + d electrons, d = -2..2, keyed by d.

    Sectors with an infeasible electron count come back empty.  The d = 0
    ground state must be nondegenerate.
    """
    cap = determinant_cap() if cap is None else cap
    raw = {}
    for d in SECTORS:
        n = n_act_elec + d
        if 0 <= n <= 2 * nact:
            raw[d] = (n, *_diagonalize_sector(heff, vbar_act, nact, n, cap))
        else:
            raw[d] = (n, (), np.zeros(0), np.zeros((0, 0)))
    e_ground = raw[0][2][0]
    if raw[0][2].size > 1:
        gap = raw[0][2][1] - e_ground
        if gap < DEGENERACY_TOL:
            raise DegenerateReferenceError(gap)
    return {
        d: SectorSpectrum(d, n, energies, states, energies - e_ground, dets)
        for d, (n, dets, energies, states) in raw.items()
    }


# --------------------------------------------------------------------------
# transition densities


def apply_operator(vec, src, dst, p, dagger):
    """Apply c+_p (dagger) or c_p to a vector over ``src`` determinants, expanding in ``dst``."""
    out = np.zeros(len(dst.dets))
    index = dst.index()
    for k, det in enumerate(src.dets):
        if vec[k] == 0.0:
            continue
        res = create(det.bits, p) if dagger else annihilate(det.bits, p)
        if res is None:
            continue
        sign, word = res
        out[index[word]] += sign * vec[k]
    return out


@dataclass(frozen=True)
class TransitionDensitySet:
    """Amplitudes <Xi_lambda| ops |Xi_0> over active spin orbitals.

    g_p1[l, x] = <l|x+|0>, g_m1[l, x] = <l|x|0>, g_0[l, x, y] = <l|x+ y|0>,
    g_p2[l, x, y] = <l|x+ y+|0>, g_m2[l, x, y] = <l|x y|0>.
    """

    g_p1: np.ndarray
    g_m1: np.ndarray
    g_0: np.ndarray
    g_p2: np.ndarray
    g_m2: np.ndarray

    @property
    def rdm1(self):
        """gamma[x, y] = <0|x+ y|0>."""
        return self.g_0[0] if self.g_0.shape[0] else np.zeros(self.g_0.shape[1:])

    @property
    def rdm2(self):
        """Gamma[x, y, z, w] = <0|x+ y+ w z|0> from the (N-2) resolution of identity."""
        return np.einsum("lyx,lwz->xyzw", self.g_m2.conj(), self.g_m2)


def transition_densities(spectra, nact):
    m = 2 * nact
    s0 = spectra[0]
    psi0 = s0.states[:, 0]

    def project(d, vecs):
        spec = spectra[d]
        if spec.size == 0:
            return np.zeros((0,) + vecs.shape[1:])
        flat = vecs.reshape(vecs.shape[0], -1)
        return (spec.states.T @ flat).reshape((spec.size,) + vecs.shape[1:])

    def ket_matrix(d, shape):
        return np.zeros((len(spectra[d].dets),) + shape)

    p1 = ket_matrix(1, (m,))
    m1 = ket_matrix(-1, (m,))
    for x in range(m):
        if spectra[1].size:
            p1[:, x] = apply_operator(psi0, s0, spectra[1], x, True)
        if spectra[-1].size:
            m1[:, x] = apply_operator(psi0, s0, spectra[-1], x, False)

    g0 = ket_matrix(0, (m, m))
    p2 = ket_matrix(2, (m, m))
    m2 = ket_matrix(-2, (m, m))
    for y in range(m):
        for x in range(m):
            if spectra[-1].size:
                g0[:, x, y] = apply_operator(m1[:, y], spectra[-1], s0, x, True)
            if spectra[2].size:
                p2[:, x, y] = apply_operator(p1[:, y], spectra[1], spectra[2], x, True)
            if spectra[-2].size:
                m2[:, x, y] = apply_operator(m1[:, y], spectra[-1], spectra[-2], x, False)

    return TransitionDensitySet(
        g_p1=project(1, p1),
        g_m1=project(-1, m1),
        g_0=project(0, g0),
        g_p2=project(2, p2),
        g_m2=project(-2, m2),
    )
