"""Particle-hole channel: dRPA / RPAx matrices, plasmon and Riccati solvers."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from mrrpa.errors import IllConditionedAmplitudesError, InstabilityError, RiccatiConvergenceError

log = logging.getLogger(__name__)

DRPA, RPAX = "dRPA", "RPAx"
FULL, EXTERNAL_ONLY = "full", "external_only"

IMAG_TOL = 1e-8
PAIRING_TOL = 1e-8
COND_MAX = 1e12


@dataclass(frozen=True)
class PhMatrices:
    A: np.ndarray
    B: np.ndarray
    omega0: np.ndarray
    variant: str
    screening: str
    labels: tuple

    @property
    def V(self):
        """Interaction part of A."""
        return self.A - np.diag(self.omega0)

    @property
    def n(self):
        return len(self.omega0)


def _complete(blocks, sizes, hermitian):
    """Assemble a matrix from its lower-triangle blocks ``blocks[(r, c)]`` with r >= c."""
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = offsets[-1]
    out = np.zeros((n, n), dtype=np.result_type(*[b for b in blocks.values()] or [float]))
    for (r, c), blk in blocks.items():
        rs = slice(offsets[r], offsets[r + 1])
        cs = slice(offsets[c], offsets[c + 1])
        out[rs, cs] = blk
        if r != c:
            out[cs, rs] = blk.conj().T if hermitian else blk.T
    return out


def build_ph_matrices(ref, basis, variant=RPAX, screening=FULL):
    """A and B over ``basis`` (class 4 dropped for ``external_only``)."""
    if variant not in (DRPA, RPAX):
        raise ValueError(f"unknown ph variant {variant!r}")
    if screening not in (FULL, EXTERNAL_ONLY):
        raise ValueError(f"unknown screening {screening!r}")
    part, dens = ref.part, ref.densities
    g = ref.store.physicist(antisymmetrized=(variant == RPAX))
    C, X, V = part.core_active, part.act, part.virt
    nc, nv = len(C), len(V)
    p1 = dens.g_p1
    m1 = dens.g_m1
    g0 = dens.g_0[1:]
    n1, n2, n3, n4 = nv * nc, p1.shape[0] * nc, nv * m1.shape[0], g0.shape[0]
    if len(basis.labels) != n1 + n2 + n3 + n4:
        raise ValueError("basis does not match the reference densities")

    def sub(*idx):
        return g[np.ix_(*idx)]

    A, B = {}, {}
    omega = basis.omega
    # class 1: (a, i)
    A[1, 1] = sub(V, C, C, V).transpose(0, 2, 3, 1).reshape(n1, n1) + np.diag(omega[:n1])
    B[1, 1] = sub(V, V, C, C).transpose(0, 2, 1, 3).reshape(n1, n1)
    # class 2: (lambda, i), one hole in the core and one extra active electron
    A[2, 1] = -np.einsum("lx,xjib->libj", p1, sub(X, C, C, V)).reshape(n2, n1)
    B[2, 1] = -np.einsum("lx,xbij->libj", p1, sub(X, V, C, C)).reshape(n2, n1)
    A[2, 2] = np.einsum("lx,xjiy,sy->lisj", p1, sub(X, C, C, X), p1.conj()).reshape(n2, n2)
    A[2, 2] += np.diag(omega[n1:n1 + n2])
    B[2, 2] = np.einsum("lx,xyij,sy->lisj", p1, sub(X, X, C, C), p1).reshape(n2, n2)
    # class 3: (a, lambda), one virtual electron and one active hole
    A[3, 1] = np.einsum("ajxb,lx->albj", sub(V, C, X, V), m1).reshape(n3, n1)
    B[3, 1] = np.einsum("abxj,lx->albj", sub(V, V, X, C), m1).reshape(n3, n1)
    A[3, 2] = -np.einsum("lx,ajxy,sy->alsj", m1, sub(V, C, X, X), p1.conj()).reshape(n3, n2)
    B[3, 2] = -np.einsum("lx,ayxj,sy->alsj", m1, sub(V, X, X, C), p1).reshape(n3, n2)
    A[3, 3] = np.einsum("lx,ayxb,sy->albs", m1, sub(V, X, X, V), m1.conj()).reshape(n3, n3)
    A[3, 3] += np.diag(omega[n1 + n2:n1 + n2 + n3])
    B[3, 3] = np.einsum("lx,abxy,sy->albs", m1, sub(V, V, X, X), m1).reshape(n3, n3)
    sizes = [n1, n2, n3]
    if screening == FULL:
        # class 4: internal active excitations lambda > 0
        A[4, 1] = np.einsum("lxy,xjyb->lbj", g0, sub(X, C, X, V)).reshape(n4, n1)
        B[4, 1] = np.einsum("lxy,xbyj->lbj", g0, sub(X, V, X, C)).reshape(n4, n1)
        A[4, 2] = -np.einsum("lxy,xjyz,sz->lsj", g0, sub(X, C, X, X), p1.conj()).reshape(n4, n2)
        B[4, 2] = -np.einsum("lxy,xzyj,sz->lsj", g0, sub(X, X, X, C), p1).reshape(n4, n2)
        A[4, 3] = np.einsum("lxy,xzyb,sz->lbs", g0, sub(X, X, X, V), m1.conj()).reshape(n4, n3)
        B[4, 3] = np.einsum("lxy,xbyz,sz->lbs", g0, sub(X, V, X, X), m1).reshape(n4, n3)
        A[4, 4] = np.diag(omega[n1 + n2 + n3:])
        B[4, 4] = np.zeros((n4, n4))
        sizes.append(n4)
        keep = slice(0, len(omega))
    else:
        keep = slice(0, n1 + n2 + n3)
    blocks_a = {(r - 1, c - 1): v for (r, c), v in A.items()}
    blocks_b = {(r - 1, c - 1): v for (r, c), v in B.items()}
    a = _complete(blocks_a, sizes, hermitian=True)
    b = _complete(blocks_b, sizes, hermitian=False)
    return PhMatrices(a, b, omega[keep].copy(), variant, screening, basis.labels[keep])


def e2a_correction(ref):
    """Second-order exchange-type term subtracted from RPAx.

    -1/4 sum_{PHQI} |V_{PH,QI}|^2 / (w_P + w_H + w_Q + w_I) over zeroth-order
    (N+1) states P, Q and (N-1) states H, I.  The all-active block of the
    interaction belongs to H0 and is excluded.
    """
    part, dens, model = ref.part, ref.densities, ref.model
    m = 2 * part.n_orb
    C, X, V = part.core_active, part.act, part.virt
    eps = model.eps(part)
    p1, m1 = dens.g_p1, dens.g_m1
    attach = np.zeros((len(V) + p1.shape[0], m))
    attach[np.arange(len(V)), V] = 1.0
    attach[len(V):, X] = p1
    w_attach = np.concatenate([eps[V], ref.spectra[1].excitations])
    remove = np.zeros((len(C) + m1.shape[0], m))
    remove[np.arange(len(C)), C] = 1.0
    remove[len(C):, X] = m1
    w_remove = np.concatenate([-eps[C], ref.spectra[-1].excitations])
    if attach.shape[0] == 0 or remove.shape[0] == 0:
        return 0.0
    vbar = ref.store.v_bar.copy()
    vbar[np.ix_(X, X, X, X)] = 0.0
    # V[P,H,Q,I] = attach[P,p] remove[H,r] vbar[p,r,q,s] attach[Q,q] remove[I,s]
    w = np.einsum("Pp,prqs->Prqs", attach, vbar, optimize=True)
    w = np.einsum("Hr,Prqs->PHqs", remove, w, optimize=True)
    w = np.einsum("Qq,PHqs->PHQs", attach, w, optimize=True)
    w = np.einsum("Is,PHQs->PHQI", remove, w, optimize=True)
    denom = (w_attach[:, None, None, None] + w_remove[None, :, None, None]
             + w_attach[None, None, :, None] + w_remove[None, None, None, :])
    return float(-0.25 * np.sum(np.abs(w) ** 2 / denom))


# --------------------------------------------------------------------------
# plasmon route


@dataclass(frozen=True)
class PhPlasmonResult:
    omegas: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    stable: bool
    pairing_residual: float
    e_corr: float
    reason: str = ""

    @property
    def amplitudes(self):
        """T = Y X^-1."""
        return np.linalg.solve(self.X.T, self.Y.T).T


def _instability(reason, eigenvalues, raise_on_instability):
    if raise_on_instability:
        raise InstabilityError(reason, eigenvalues)
    log.info("ph problem unstable: %s", reason)
    n = len(eigenvalues) // 2
    return PhPlasmonResult(np.asarray(eigenvalues), np.zeros((n, 0)), np.zeros((n, 0)),
                           False, float("inf"), None, reason)


def positive_mode_vectors(h, metric):
    """Metric-normalized eigenvectors of diag(metric) h for its positive eigenvalues, ascending.

    Uses the Hermitian-definite pencil (diag(metric), h), whose eigenvalues are 1/omega, so
    modes within a degenerate multiplet come out metric-orthogonal (a general eigensolver
    may return linearly dependent vectors there).  Returns None when h is not positive
    definite.
    """
    try:
        lam, v = scipy.linalg.eigh(np.diag(metric).astype(h.dtype), h)
    except np.linalg.LinAlgError:
        return None
    keep = np.flatnonzero(lam > 0)[::-1]
    return v[:, keep] / np.sqrt(lam[keep])


def solve_plasmon_ph(m, e2a=0.0, raise_on_instability=True):
    """Solve the metric eigenproblem and return 1/2 (sum Omega - tr A) - e2a."""
    n = m.n
    if n == 0:
        return PhPlasmonResult(np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)), True, 0.0, -e2a)
    h = np.block([[m.A, m.B], [m.B.conj(), m.A.conj()]])
    metric = np.concatenate([np.ones(n), -np.ones(n)])
    w, vecs = scipy.linalg.eig(metric[:, None] * h)
    imag_bad = np.abs(w.imag) > IMAG_TOL * np.maximum(1.0, np.abs(w.real))
    if imag_bad.any():
        return _instability(f"{imag_bad.sum()} complex eigenvalues", w, raise_on_instability)
    w = w.real
    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    if len(pos) != n or len(neg) != n:
        return _instability(f"{len(pos)} positive / {len(neg)} negative eigenvalues (expected {n} each)",
                            w, raise_on_instability)
    wp = np.sort(w[pos])
    wn = np.sort(-w[neg])
    residual = float(np.max(np.abs(wp - wn)))
    if residual > PAIRING_TOL * max(1.0, wp.max()):
        return _instability(f"eigenvalues are not paired (residual {residual:.3e})", w, raise_on_instability)
    order = pos[np.argsort(w[pos])]
    vecs = vecs[:, order]
    norms = np.einsum("ik,i,ik->k", vecs.conj(), metric, vecs).real
    if np.any(norms <= 0):
        return _instability("positive eigenvalue with non-positive metric norm", w, raise_on_instability)
    vecs = vecs / np.sqrt(norms)
    definite = positive_mode_vectors(h, metric)
    if definite is not None and definite.shape[1] == n:
        vecs = definite
    if np.isrealobj(m.A) and np.isrealobj(m.B):
        # fix an overall phase so that real problems give real amplitudes
        k = np.argmax(np.abs(vecs), axis=0)
        phase = vecs[k, np.arange(n)] / np.abs(vecs[k, np.arange(n)])
        vecs = (vecs / phase).real
    X, Y = vecs[:n], vecs[n:]
    e_corr = 0.5 * (wp.sum() - np.trace(m.A).real) - e2a
    return PhPlasmonResult(wp, X, Y, True, residual, float(e_corr))


# --------------------------------------------------------------------------
# Riccati route


@dataclass(frozen=True)
class RiccatiResult:
    T: np.ndarray
    e_corr: float
    iterations: int
    residual: float
    method: str


def riccati_residual_ph(m, T):
    A, B = m.A, m.B
    return B.conj() + A.conj() @ T + T @ A + T @ B @ T


def _newton_polish_ph(m, T, tol, max_iter=20):
    """Newton steps on the Riccati equation; each solves a Sylvester equation."""
    A, B = m.A, m.B
    for _ in range(max_iter):
        R = riccati_residual_ph(m, T)
        if np.abs(R).max() <= tol:
            break
        # (A* + T B) dT + dT (A + B T) = -R
        dT = scipy.linalg.solve_sylvester(A.conj() + T @ B, A + B @ T, -R)
        T = T + dT
    return T


def solve_riccati_ph(m, e2a=0.0, tol=1e-10, max_iter=500, damping=0.5):
    """Solve B* + A*T + TA + TBT = 0; energy 1/2 tr(BT) - e2a.

    Damped Jacobi iteration on the splitting A = diag(omega) + V.  If that does
    not converge, T = Y X^-1 from the plasmon eigenvectors is used and polished.
    """
    n = m.n
    if n == 0:
        return RiccatiResult(np.zeros((0, 0)), -e2a, 0, 0.0, "trivial")
    w = m.omega0
    denom = w[:, None] + w[None, :]
    Vm = m.V
    B = m.B
    T = np.zeros_like(B)
    residual = np.inf
    for it in range(1, max_iter + 1):
        R = riccati_residual_ph(m, T)
        residual = float(np.abs(R).max())
        if residual <= tol:
            e = 0.5 * np.trace(B @ T).real - e2a
            return RiccatiResult(T, float(e), it, residual, "jacobi")
        if not np.isfinite(residual) or residual > 1e8:
            break
        T_new = -(B.conj() + Vm.conj() @ T + T @ Vm + T @ B @ T) / denom
        T = (1.0 - damping) * T_new + damping * T if it > 1 else T_new
    log.info("Jacobi Riccati iteration stalled (residual %.3e); using eigenvectors", residual)
    plasmon = solve_plasmon_ph(m, e2a)
    X = plasmon.X
    cond = np.linalg.cond(X)
    if cond > COND_MAX:
        raise IllConditionedAmplitudesError(cond)
    T = _newton_polish_ph(m, plasmon.amplitudes, tol)
    residual = float(np.abs(riccati_residual_ph(m, T)).max())
    if residual > max(tol, 1e-8):
        raise RiccatiConvergenceError(residual, max_iter)
    e = 0.5 * np.trace(B @ T).real - e2a
    return RiccatiResult(T, float(e), max_iter, residual, "eigenvector")
