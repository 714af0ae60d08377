"""Imaginary-frequency evaluation of the tr-ln correlation energy formulas."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from mrrpa.errors import QuadratureError

DEFAULT_POINTS = 100
SERIES_NORM = 0.01  # below this Frobenius norm of V D0 the trace series replaces the log-determinant


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on (-1, 1) mapped to (0, inf) by w = scale (1 + x) / (1 - x)."""

    n_points: int
    nodes: np.ndarray
    weights: np.ndarray
    scale: float

    @classmethod
    def gauss_legendre(cls, n_points=DEFAULT_POINTS, scale=1.0):
        if n_points < 1:
            raise ValueError("need at least one quadrature point")
        if not scale > 0:
            raise ValueError("frequency scale must be positive")
        x, w = np.polynomial.legendre.leggauss(n_points)
        return cls(n_points, x, w, float(scale))

    @property
    def frequencies(self):
        return self.scale * (1 + self.nodes) / (1 - self.nodes)

    @property
    def jacobian_weights(self):
        return self.weights * 2 * self.scale / (1 - self.nodes) ** 2


def default_scale(omegas):
    omegas = np.asarray(omegas)
    omegas = omegas[omegas > 0]
    return float(np.median(omegas)) if omegas.size else 1.0


def _trln_integrand(V, metric, w0, freq):
    """Re tr[ln(I - M) + M] with M = V D0(i freq) and D0(z) = (z metric - diag(w0))^-1.

    At high frequency both terms are O(1/freq) and cancel to O(1/freq^2), which a
    log-determinant plus trace cannot resolve; there the series -sum_k tr(M^k)/k is
    summed instead.
    """
    d0 = 1.0 / (1j * freq * metric - w0)
    M = V * d0[None, :]
    norm = np.linalg.norm(M)
    if norm < SERIES_NORM:
        # with P_j = M^j: tr M^(2j-1) = sum(P_j * P_(j-1)^T) and tr M^(2j) = sum(P_j * P_j^T)
        total = -np.sum(M * M.T).real / 2
        prev, power, j = M, M, 1
        while norm ** (2 * j + 1) > 1e-17 * abs(total) and j < 30:
            prev, power = power, power @ M
            j += 1
            term = np.sum(power * prev.T).real / (2 * j - 1) + np.sum(power * power.T).real / (2 * j)
            total -= term
            if abs(term) < 1e-17 * abs(total):
                break
        return float(total)
    lu, _ = scipy.linalg.lu_factor(np.eye(len(w0)) - M, check_finite=True)
    diag = np.diag(lu)
    if np.any(diag == 0) or not np.all(np.isfinite(diag)):
        raise QuadratureError(f"singular I - V D0 at frequency {freq:.6e}")
    return float(np.sum(np.log(np.abs(diag))) + np.trace(M).real)


def _integrate(V, metric, w0, rule, prefactor):
    if V.size == 0:
        return 0.0
    total = 0.0
    for freq, weight in zip(rule.frequencies, rule.jacobian_weights):
        total += weight * _trln_integrand(V, metric, w0, freq)
    # integral over the whole axis / (2 pi) = (1/pi) * integral over (0, inf)
    return prefactor * total / np.pi


def _ph_doubled(m):
    n = m.n
    V = np.block([[m.V, m.B], [m.B.conj(), m.V.conj()]])
    metric = np.concatenate([np.ones(n), -np.ones(n)])
    w0 = np.concatenate([m.omega0, m.omega0])
    return V, metric, w0


def ph_energy_quad(m, rule=None, e2a=0.0):
    V, metric, w0 = _ph_doubled(m)
    if rule is None:
        rule = QuadratureRule.gauss_legendre(scale=default_scale(m.omega0))
    return _integrate(V, metric, w0, rule, 0.5) - e2a


def drpa_energy_quad(m, rule=None):
    return ph_energy_quad(m, rule)


def rpax_energy_quad(m, e2a, rule=None):
    return ph_energy_quad(m, rule, e2a)


def pprpa_energy_quad(m, rule=None):
    wp = m.omega_pp - 2 * m.mu
    wh = m.omega_hh + 2 * m.mu
    V = np.block([[m.Vp, m.C], [m.C.conj().T, m.Vm]])
    metric = np.concatenate([np.ones(len(wp)), -np.ones(len(wh))])
    w0 = np.concatenate([wp, wh])
    if rule is None:
        rule = QuadratureRule.gauss_legendre(scale=default_scale(w0))
    return _integrate(V, metric, w0, rule, 1.0)
