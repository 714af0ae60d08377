"""Particle-particle channel: A+, A-, C with a chemical potential; plasmon and Riccati routes."""

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from mrrpa.errors import (
    ChemicalPotentialError,
    IllConditionedAmplitudesError,
    PositivityError,
    PpConsistencyError,
    RiccatiConvergenceError,
)
from mrrpa.ph import COND_MAX, IMAG_TOL, RiccatiResult, _complete, positive_mode_vectors

log = logging.getLogger(__name__)


def chemical_potential(ref):
    """mu = 1/2 (min w^{N+1} - min w^{N-1}) over the nonempty attach/remove channels."""
    eps = ref.model.eps(ref.part)
    attach = [eps[ref.part.virt], ref.spectra[1].excitations]
    remove = [-eps[ref.part.core_active], ref.spectra[-1].excitations]
    attach = [a for a in attach if a.size]
    remove = [r for r in remove if r.size]
    if not attach or not remove:
        raise ChemicalPotentialError("cannot place chemical potential: no (N+1) or no (N-1) states")
    return 0.5 * (min(a.min() for a in attach) - min(r.min() for r in remove))


@dataclass(frozen=True)
class PpMatrices:
    Ap: np.ndarray
    Am: np.ndarray
    C: np.ndarray
    mu: float
    omega_pp: np.ndarray
    omega_hh: np.ndarray
    labels_pp: tuple
    labels_hh: tuple

    @property
    def Vp(self):
        return self.Ap - np.diag(self.omega_pp - 2 * self.mu)

    @property
    def Vm(self):
        return self.Am - np.diag(self.omega_hh + 2 * self.mu)

    def shifted(self, mu):
        """Same problem with another chemical potential."""
        dp = np.diag(np.full(len(self.omega_pp), -2 * (mu - self.mu)))
        dm = np.diag(np.full(len(self.omega_hh), 2 * (mu - self.mu)))
        return replace(self, Ap=self.Ap + dp, Am=self.Am + dm, mu=mu)

    @property
    def window(self):
        """Open interval of mu keeping every shifted zeroth-order energy positive."""
        lo = -0.5 * self.omega_hh.min() if self.omega_hh.size else -np.inf
        hi = 0.5 * self.omega_pp.min() if self.omega_pp.size else np.inf
        return lo, hi


def build_pp_matrices(ref, pp, hh, mu=None):
    """A+ (pp x pp), A- (hh x hh) and C (pp x hh); the all-active block of the interaction is excluded."""
    if mu is None:
        mu = chemical_potential(ref)
    part, dens = ref.part, ref.densities
    g = ref.store.physicist().copy()
    C, X, V = part.core_active, part.act, part.virt
    g[np.ix_(X, X, X, X)] = 0.0
    p1, m1, p2, m2 = dens.g_p1, dens.g_m1, dens.g_p2, dens.g_m2
    nv, nc = len(V), len(C)

    def sub(*idx):
        return g[np.ix_(*idx)]

    # index lists for the ordered pairs a > b and i > j
    va, vb = np.tril_indices(nv, -1)
    ci, cj = np.tril_indices(nc, -1)
    np1, np2, np3 = len(va), nv * p1.shape[0], p2.shape[0]
    nh1, nh2, nh3 = len(ci), nc * m1.shape[0], m2.shape[0]
    if len(pp.labels) != np1 + np2 + np3 or len(hh.labels) != nh1 + nh2 + nh3:
        raise ValueError("bases do not match the reference densities")

    Ap, Am = {}, {}
    wp = pp.omega - 2 * mu
    wh = hh.omega + 2 * mu

    g_vvvv = sub(V, V, V, V)[va, vb][:, va, vb]
    Ap[0, 0] = g_vvvv + np.diag(wp[:np1])
    Ap[1, 0] = np.einsum("lx,axcd->alcd", p1, sub(V, X, V, V))[:, :, va, vb].reshape(np2, np1)
    Ap[1, 1] = np.einsum("lx,axcy,sy->alcs", p1, sub(V, X, V, X), p1.conj()).reshape(np2, np2)
    Ap[1, 1] += np.diag(wp[np1:np1 + np2])
    Ap[2, 0] = 0.5 * np.einsum("lxy,xycd->lcd", p2, sub(X, X, V, V))[:, va, vb]
    Ap[2, 1] = 0.5 * np.einsum("lxy,xycz,sz->lcs", p2, sub(X, X, V, X), p1.conj()).reshape(np3, np2)
    Ap[2, 2] = np.diag(wp[np1 + np2:])

    g_cccc = sub(C, C, C, C)[ci, cj][:, ci, cj]
    Am[0, 0] = g_cccc + np.diag(wh[:nh1])
    Am[1, 0] = np.einsum("Lx,xikj->iLkj", m1.conj(), sub(X, C, C, C)).reshape(nh2, nc, nc)[:, ci, cj]
    Am[1, 1] = np.einsum("lx,xiyk,sy->ilks", m1.conj(), sub(X, C, X, C), m1).reshape(nh2, nh2)
    Am[1, 1] += np.diag(wh[nh1:nh1 + nh2])
    Am[2, 0] = 0.5 * np.einsum("Lyx,xykj->Lkj", m2.conj(), sub(X, X, C, C))[:, ci, cj]
    Am[2, 1] = 0.5 * np.einsum("lyx,xyzk,sz->lks", m2.conj(), sub(X, X, X, C), m1).reshape(nh3, nh2)
    Am[2, 2] = np.diag(wh[nh1 + nh2:])

    c11 = sub(V, V, C, C)[va, vb][:, ci, cj]
    c12 = np.einsum("abxi,sx->abis", sub(V, V, X, C), m1)[va, vb].reshape(np1, nh2)
    c13 = 0.5 * np.einsum("abyx,sxy->abs", sub(V, V, X, X), m2)[va, vb]
    c21 = np.einsum("lx,axij->alij", p1, sub(V, X, C, C))[:, :, ci, cj].reshape(np2, nh1)
    c22 = np.einsum("lx,axyi,sy->alis", p1, sub(V, X, X, C), m1).reshape(np2, nh2)
    c23 = 0.5 * np.einsum("lx,axyz,szy->als", p1, sub(V, X, X, X), m2).reshape(np2, nh3)
    c31 = 0.5 * np.einsum("lxy,xyij->lij", p2, sub(X, X, C, C))[:, ci, cj]
    c32 = 0.5 * np.einsum("lxy,xyzi,sz->lis", p2, sub(X, X, X, C), m1).reshape(np3, nh2)
    c33 = np.zeros((np3, nh3))
    Cmat = np.block([[c11, c12, c13], [c21, c22, c23], [c31, c32, c33]])

    Apm = _complete(Ap, [np1, np2, np3], hermitian=True)
    Amm = _complete(Am, [nh1, nh2, nh3], hermitian=True)
    return PpMatrices(Apm, Amm, Cmat, float(mu), pp.omega.copy(), hh.omega.copy(), pp.labels, hh.labels)


def check_positivity(m):
    """Raise PositivityError unless the shifted energies and the block matrix are positive."""
    lo, hi = m.window
    if not lo < m.mu < hi:
        raise PositivityError("shifted zeroth-order pair energies are not all positive", m.mu, (lo, hi))
    h = np.block([[m.Ap, m.C], [m.C.conj().T, m.Am]])
    if h.size:
        try:
            np.linalg.cholesky(h)
        except np.linalg.LinAlgError:
            raise PositivityError("pair block matrix is not positive definite", m.mu, (lo, hi))


def ensure_positive(m):
    """Check positivity; on failure retry once at the middle of the admissible window."""
    try:
        check_positivity(m)
        return m
    except PositivityError as err:
        lo, hi = m.window
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise
        mid = 0.5 * (lo + hi)
        log.info("%s; retrying with mu = %.8f", err, mid)
        retry = m.shifted(mid)
        check_positivity(retry)
        return retry


@dataclass(frozen=True)
class PpPlasmonResult:
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    e_corr_plus: float
    e_corr_minus: float
    X_plus: np.ndarray
    Y_plus: np.ndarray

    @property
    def e_corr(self):
        return self.e_corr_plus

    @property
    def counts(self):
        return len(self.omega_plus), len(self.omega_minus)

    @property
    def amplitudes(self):
        """U = Y+ (X+)^-1."""
        return np.linalg.solve(self.X_plus.T, self.Y_plus.T).T


def solve_plasmon_pp(m, check=True):
    """Eigenvalues of diag(I, -I) [[A+, C], [C^H, A-]]; energy tr Omega+ - tr A+ = -tr Omega- - tr A-."""
    if check:
        check_positivity(m)
    npp, nhh = len(m.omega_pp), len(m.omega_hh)
    h = np.block([[m.Ap, m.C], [m.C.conj().T, m.Am]])
    metric = np.concatenate([np.ones(npp), -np.ones(nhh)])
    if h.size == 0:
        return PpPlasmonResult(np.zeros(0), np.zeros(0), 0.0, 0.0, np.zeros((0, 0)), np.zeros((0, 0)))
    w, vecs = scipy.linalg.eig(metric[:, None] * h)
    if np.any(np.abs(w.imag) > IMAG_TOL * np.maximum(1.0, np.abs(w.real))):
        raise PpConsistencyError("complex pp eigenvalues despite a positive-definite block matrix")
    w = w.real
    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    if len(pos) != npp or len(neg) != nhh:
        raise PpConsistencyError(f"{len(pos)} positive / {len(neg)} negative pp eigenvalues, "
                                 f"expected {npp} / {nhh}")
    order = pos[np.argsort(w[pos])]
    vp = positive_mode_vectors(h, metric)
    if vp is None or vp.shape[1] != npp:
        vp = vecs[:, order]
        norms = np.einsum("ik,i,ik->k", vp.conj(), metric, vp).real
        vp = vp / np.sqrt(np.abs(norms))
        if np.isrealobj(h):
            vp = vp.real
    omega_plus = w[order]
    omega_minus = np.sort(w[neg])
    e_plus = omega_plus.sum() - np.trace(m.Ap).real
    e_minus = -omega_minus.sum() - np.trace(m.Am).real
    return PpPlasmonResult(omega_plus, omega_minus, float(e_plus), float(e_minus), vp[:npp], vp[npp:])


def riccati_residual_pp(m, U):
    return m.C.conj().T + m.Am @ U + U @ m.Ap + U @ m.C @ U


def _newton_polish_pp(m, U, tol, max_iter=20):
    for _ in range(max_iter):
        R = riccati_residual_pp(m, U)
        if np.abs(R).max() <= tol:
            break
        # (A- + U C) dU + dU (A+ + C U) = -R
        dU = scipy.linalg.solve_sylvester(m.Am + U @ m.C, m.Ap + m.C @ U, -R)
        U = U + dU
    return U


def solve_riccati_pp(m, tol=1e-10, max_iter=500, damping=0.5):
    """Solve C^H + A- U + U A+ + U C U = 0; energy tr(C U)."""
    npp, nhh = len(m.omega_pp), len(m.omega_hh)
    if npp == 0 or nhh == 0:
        return RiccatiResult(np.zeros((nhh, npp)), 0.0, 0, 0.0, "trivial")
    denom = (m.omega_hh + 2 * m.mu)[:, None] + (m.omega_pp - 2 * m.mu)[None, :]
    Vp, Vm, C = m.Vp, m.Vm, m.C
    U = np.zeros((nhh, npp), dtype=np.result_type(C, float))
    residual = np.inf
    for it in range(1, max_iter + 1):
        residual = float(np.abs(riccati_residual_pp(m, U)).max())
        if residual <= tol:
            return RiccatiResult(U, float(np.trace(C @ U).real), it, residual, "jacobi")
        if not np.isfinite(residual) or residual > 1e8:
            break
        U_new = -(C.conj().T + Vm @ U + U @ Vp + U @ C @ U) / denom
        U = (1.0 - damping) * U_new + damping * U if it > 1 else U_new
    log.info("Jacobi pp Riccati iteration stalled (residual %.3e); using eigenvectors", residual)
    plasmon = solve_plasmon_pp(m)
    cond = np.linalg.cond(plasmon.X_plus)
    if cond > COND_MAX:
        raise IllConditionedAmplitudesError(cond)
    U = _newton_polish_pp(m, plasmon.amplitudes, tol)
    residual = float(np.abs(riccati_residual_pp(m, U)).max())
    if residual > max(tol, 1e-8):
        raise RiccatiConvergenceError(residual, max_iter)
    return RiccatiResult(U, float(np.trace(C @ U).real), max_iter, residual, "eigenvector")
