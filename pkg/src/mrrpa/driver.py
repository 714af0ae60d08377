"""Reference preparation and per-method pipelines shared by the CLI and the tests."""

from dataclasses import dataclass, field

import numpy as np

from mrrpa import perturbation, ph, pp, quadrature
from mrrpa.casci import diagonalize_all_sectors, transition_densities
from mrrpa.dyall import (
    DyallModel,
    OrbitalPartition,
    active_hamiltonian,
    enumerate_ph_basis,
    enumerate_pp_hh_bases,
    generalized_fock,
    reference_energy,
    semicanonicalize,
)
from mrrpa.errors import InstabilityError
from mrrpa.integrals import spinorbitalize

PLASMON, RICCATI, QUADRATURE = "plasmon", "riccati", "quadrature"
ROUTES = (PLASMON, RICCATI, QUADRATURE)
FAMILIES = (ph.DRPA, ph.RPAX, "ppRPA")


@dataclass(frozen=True)
class Reference:
    store: object
    part: OrbitalPartition
    model: DyallModel
    spectra: dict
    densities: object

    @property
    def e_ref(self):
        return self.model.e_ref


def _cas(store, part, cap):
    heff, vbar_act = active_hamiltonian(store, part)
    spectra = diagonalize_all_sectors(heff, vbar_act, part.nact, part.n_act_elec, cap)
    return heff, spectra, transition_densities(spectra, part.nact)


def prepare_reference(spatial, part, cap=None):
    """CASCI in the given orbitals, semicanonical core/virtual, Dyall model and e_ref."""
    if part.n_orb != spatial.n_orb or part.n_elec != spatial.n_elec:
        raise ValueError("partition does not match the integrals")
    store = spinorbitalize(spatial)
    heff, spectra, dens = _cas(store, part, cap)
    store, u = semicanonicalize(store, part, dens.rdm1)
    if not np.array_equal(u, np.eye(part.n_orb)):
        heff, spectra, dens = _cas(store, part, cap)
    f = np.diag(generalized_fock(store, part, dens.rdm1))
    eps_core, eps_virt = f[part.core], f[part.virt]
    e0 = float(eps_core.sum() + spectra[0].energies[0])
    model = DyallModel(eps_core, eps_virt, heff, e0, reference_energy(store, part, dens), u)
    return Reference(store, part, model, spectra, dens)


def single_reference_partition(spatial, nfrozen=0):
    if spatial.n_elec % 2:
        raise ValueError("single-reference methods need a closed-shell electron count")
    return OrbitalPartition.from_counts(spatial.n_orb, spatial.n_elec, spatial.n_elec // 2, 0, nfrozen)


@dataclass
class MethodResult:
    family: str
    screening: str
    e_ref: float
    e_corr: dict = field(default_factory=dict)
    orders: object = None
    status: str = "ok"
    error: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def e_total(self):
        value = self.energy
        return None if value is None else self.e_ref + value

    @property
    def energy(self):
        for route in ROUTES:
            if self.e_corr.get(route) is not None:
                return self.e_corr[route]
        return None

    @property
    def route_max_discrepancy(self):
        vals = [v for v in self.e_corr.values() if v is not None]
        return float(max(vals) - min(vals)) if len(vals) > 1 else 0.0


def run_ph(ref, variant, screening=ph.FULL, routes=ROUTES, n_orders=0,
           quad_points=quadrature.DEFAULT_POINTS, omega0=None, riccati=None):
    basis = enumerate_ph_basis(ref.part, ref.model, ref.spectra)
    m = ph.build_ph_matrices(ref, basis, variant, screening)
    e2a = ph.e2a_correction(ref) if variant == ph.RPAX else 0.0
    res = MethodResult(variant, screening, ref.e_ref)
    res.diagnostics["dimension"] = m.n
    if variant == ph.RPAX:
        res.diagnostics["e2a"] = e2a
    plasmon = ph.solve_plasmon_ph(m, e2a, raise_on_instability=False)
    res.diagnostics["stable"] = plasmon.stable
    res.diagnostics["pairing_residual"] = plasmon.pairing_residual
    if not plasmon.stable:
        res.status = "unstable"
        res.error = plasmon.reason
    else:
        if PLASMON in routes:
            res.e_corr[PLASMON] = plasmon.e_corr
        if RICCATI in routes:
            r = ph.solve_riccati_ph(m, e2a, **(riccati or {}))
            res.e_corr[RICCATI] = r.e_corr
            res.diagnostics["iterations"] = r.iterations
            res.diagnostics["riccati_method"] = r.method
        if QUADRATURE in routes:
            scale = omega0 or quadrature.default_scale(m.omega0)
            rule = quadrature.QuadratureRule.gauss_legendre(quad_points, scale)
            res.e_corr[QUADRATURE] = quadrature.ph_energy_quad(m, rule, e2a)
    if n_orders:
        res.orders = perturbation.ph_orders(m, e2a, n_orders)
        res.diagnostics["diverging"] = res.orders.diverging
    return res


def run_pp(ref, routes=ROUTES, n_orders=0, quad_points=quadrature.DEFAULT_POINTS,
           omega0=None, riccati=None, mu=None):
    pp_basis, hh_basis = enumerate_pp_hh_bases(ref.part, ref.model, ref.spectra)
    m = pp.ensure_positive(pp.build_pp_matrices(ref, pp_basis, hh_basis, mu))
    res = MethodResult("ppRPA", ph.FULL, ref.e_ref)
    res.diagnostics.update(mu=m.mu, dimension=(len(pp_basis), len(hh_basis)))
    plasmon = pp.solve_plasmon_pp(m)
    res.diagnostics["plasmon_forms_difference"] = abs(plasmon.e_corr_plus - plasmon.e_corr_minus)
    if PLASMON in routes:
        res.e_corr[PLASMON] = plasmon.e_corr
    if RICCATI in routes:
        r = pp.solve_riccati_pp(m, **(riccati or {}))
        res.e_corr[RICCATI] = r.e_corr
        res.diagnostics["iterations"] = r.iterations
        res.diagnostics["riccati_method"] = r.method
    if QUADRATURE in routes:
        w0 = np.concatenate([m.omega_pp - 2 * m.mu, m.omega_hh + 2 * m.mu])
        scale = omega0 or quadrature.default_scale(w0)
        rule = quadrature.QuadratureRule.gauss_legendre(quad_points, scale)
        res.e_corr[QUADRATURE] = quadrature.pprpa_energy_quad(m, rule)
    if n_orders:
        res.orders = perturbation.pp_orders(m, n_orders)
        res.diagnostics["diverging"] = res.orders.diverging
    if plasmon.e_corr > 0:
        res.diagnostics["positive_correlation_energy"] = True
    return res


def run_method(ref, family, screening=ph.FULL, **kwargs):
    if family == "ppRPA":
        if screening != ph.FULL:
            raise ValueError("external_only screening applies to ph methods only")
        return run_pp(ref, **kwargs)
    if family in (ph.DRPA, ph.RPAX):
        return run_ph(ref, family, screening, **kwargs)
    raise ValueError(f"unknown method family {family!r}")


def correlation_energy(ref, family, screening=ph.FULL, route=PLASMON):
    """Convenience: a single correlation energy; raises InstabilityError on unstable ph problems."""
    res = run_method(ref, family, screening, routes=(route,))
    if res.status == "unstable":
        raise InstabilityError(res.error, [])
    return res.e_corr[route]
