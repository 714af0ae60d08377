import numpy as np
import pytest

from conftest import reference
from mrrpa import single_reference_partition, prepare_reference
from mrrpa.dyall import enumerate_ph_basis, enumerate_pp_hh_bases
from mrrpa.perturbation import N_MAX_CAP, OrderSeries, ph_orders, pp_orders
from mrrpa.ph import DRPA, FULL, RPAX, PhMatrices, build_ph_matrices, e2a_correction, solve_plasmon_ph
from mrrpa.pp import PpMatrices, build_pp_matrices, solve_plasmon_pp
from toys import random_integrals


def _ph_1x1(w, b):
    return PhMatrices(np.array([[w]]), np.array([[b]]), np.array([w]), DRPA, FULL, ())


def test_ph_hand_recursion_without_interaction_block():
    w, b = 1.3, 0.4
    s = ph_orders(_ph_1x1(w, b), 0.0, 5)
    assert s.order(2) == pytest.approx(-b * b / (4 * w), abs=1e-15)
    assert s.order(3) == 0.0
    assert s.order(4) == pytest.approx(-b ** 4 / (16 * w ** 3), abs=1e-15)
    assert s.order(5) == 0.0


def test_pp_hand_recursion_without_interaction_blocks():
    a, bb, c = 0.9, 0.7, 0.2
    m = PpMatrices(np.array([[a]]), np.array([[bb]]), np.array([[c]]), 0.0,
                   np.array([a]), np.array([bb]), (), ())
    s = pp_orders(m, 4)
    d = a + bb
    assert s.order(2) == pytest.approx(-c * c / d, abs=1e-15)
    assert s.order(3) == 0.0
    assert s.order(4) == pytest.approx(-c ** 4 / d ** 3, abs=1e-15)


def test_e2a_enters_second_order_only():
    m = _ph_1x1(1.0, 0.3)
    plain, shifted = ph_orders(m, 0.0, 6), ph_orders(m, 0.125, 6)
    assert shifted.order(2) == pytest.approx(plain.order(2) - 0.125)
    assert np.allclose(shifted.orders[1:], plain.orders[1:])


def test_partial_sums_converge_on_weak_toy():
    s = random_integrals(6, 4, seed=1, spread=2.0, eri_scale=0.05)
    ref = prepare_reference(s, single_reference_partition(s))
    basis = enumerate_ph_basis(ref.part, ref.model, ref.spectra)
    for variant in (DRPA, RPAX):
        m = build_ph_matrices(ref, basis, variant)
        e2a = e2a_correction(ref) if variant == RPAX else 0.0
        series = ph_orders(m, e2a, 30)
        assert series.partial_sums[-1] == pytest.approx(solve_plasmon_ph(m, e2a).e_corr, abs=1e-8)
        assert not series.diverging
    pp, hh = enumerate_pp_hh_bases(ref.part, ref.model, ref.spectra)
    mpp = build_pp_matrices(ref, pp, hh)
    assert pp_orders(mpp, 30).partial_sums[-1] == pytest.approx(solve_plasmon_pp(mpp).e_corr, abs=1e-8)


def test_orders_do_not_depend_on_mu():
    s = random_integrals(5, 4, seed=2, spread=2.0, eri_scale=0.1)
    ref = prepare_reference(s, single_reference_partition(s))
    pp, hh = enumerate_pp_hh_bases(ref.part, ref.model, ref.spectra)
    m = build_pp_matrices(ref, pp, hh)
    a = pp_orders(m, 8).orders
    b = pp_orders(m.shifted(m.mu + 0.05), 8).orders
    assert np.allclose(a, b, atol=1e-14)


def test_hf_table_values():
    ref = reference("hf_r1p0_cas22")
    basis = enumerate_ph_basis(ref.part, ref.model, ref.spectra)
    drpa = ph_orders(build_ph_matrices(ref, basis, DRPA), 0.0, 5)
    assert drpa.orders == pytest.approx([-0.264927, 0.084039, -0.045821, 0.030583], abs=5e-5)
    pp, hh = enumerate_pp_hh_bases(ref.part, ref.model, ref.spectra)
    pprpa = pp_orders(build_pp_matrices(ref, pp, hh), 3)
    assert pprpa.orders == pytest.approx([-0.186275, 0.054066], abs=5e-5)


def test_order_bounds():
    m = _ph_1x1(1.0, 0.1)
    for bad in (1, N_MAX_CAP + 1):
        with pytest.raises(ValueError):
            ph_orders(m, 0.0, bad)
    assert len(ph_orders(m, 0.0, N_MAX_CAP).orders) == N_MAX_CAP - 1


def test_divergence_flag():
    assert OrderSeries("x", np.array([-0.1, 0.05, -0.02, 0.01])).diverging is False
    assert OrderSeries("x", np.array([-0.1, 0.2, -0.3, 0.4, -0.5])).diverging is True
    # a strongly coupled 1 x 1 problem: |b| close to w makes the series crawl but not blow up
    assert not ph_orders(_ph_1x1(1.0, 0.99), 0.0, 20).diverging
