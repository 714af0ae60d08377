"""Order-by-order expansion of the ph and pp correlation energies."""

from dataclasses import dataclass

import numpy as np

N_MAX_DEFAULT = 10
N_MAX_CAP = 60


@dataclass(frozen=True)
class OrderSeries:
    """orders[k] is the energy contribution of order k + 2."""

    method: str
    orders: np.ndarray

    @property
    def partial_sums(self):
        return np.cumsum(self.orders)

    def order(self, n):
        return float(self.orders[n - 2])

    @property
    def diverging(self):
        """True when |dE(n)| grew for three consecutive orders somewhere in the series."""
        mags = np.abs(self.orders)
        run = 0
        for k in range(1, len(mags)):
            run = run + 1 if mags[k] > mags[k - 1] else 0
            if run >= 3:
                return True
        return False


def _check_nmax(n_max):
    if not 2 <= n_max <= N_MAX_CAP:
        raise ValueError(f"n_max must lie in [2, {N_MAX_CAP}]")


def ph_orders(m, e2a=0.0, n_max=N_MAX_DEFAULT):
    """dE(n+1) = 1/2 tr(B T(n)), with e2a subtracted at second order.

    T(1) = -B*/(w_L + w_R);
    T(n) = -[V* T(n-1) + T(n-1) V + sum_{i=1}^{n-2} T(i) B T(n-1-i)] / (w_L + w_R).
    """
    _check_nmax(n_max)
    w = m.omega0
    denom = w[:, None] + w[None, :]
    B, V = m.B, m.V
    Ts = [None, -B.conj() / denom]
    for n in range(2, n_max):
        acc = V.conj() @ Ts[n - 1] + Ts[n - 1] @ V
        for i in range(1, n - 1):
            acc = acc + Ts[i] @ B @ Ts[n - 1 - i]
        Ts.append(-acc / denom)
    orders = np.array([0.5 * np.trace(B @ Ts[n]).real for n in range(1, n_max)])
    if orders.size:
        orders[0] -= e2a
    return OrderSeries(m.variant, orders)


def pp_orders(m, n_max=N_MAX_DEFAULT):
    """dE(n+1) = tr(C U(n)) with U(1) = -C^H/(w-_H + w+_P) and the analogous recursion."""
    _check_nmax(n_max)
    denom = (m.omega_hh + 2 * m.mu)[:, None] + (m.omega_pp - 2 * m.mu)[None, :]
    C, Vp, Vm = m.C, m.Vp, m.Vm
    Us = [None, -C.conj().T / denom]
    for n in range(2, n_max):
        acc = Vm @ Us[n - 1] + Us[n - 1] @ Vp
        for i in range(1, n - 1):
            acc = acc + Us[i] @ C @ Us[n - 1 - i]
        Us.append(-acc / denom)
    orders = np.array([np.trace(C @ Us[n]).real for n in range(1, n_max)])
    return OrderSeries("ppRPA", orders)
