import numpy as np
import pytest

from conftest import DATA
from mrrpa.errors import FcidumpError
from mrrpa.integrals import (
    SpatialIntegrals,
    direct_sum,
    format_fcidump,
    parse_fcidump,
    permute_orbitals,
    read_fcidump,
    rotate_orbitals,
    spinorbitalize,
    write_fcidump,
)
from toys import hubbard_dimer, random_integrals

HEADER = " &FCI NORB=2,NELEC=2,MS2=0,\n  ORBSYM=1,1,\n  ISYM=1,\n &END\n"


def test_single_two_electron_entry():
    s = parse_fcidump(HEADER + " 0.5 1 1 1 1\n")
    assert s.eri[0, 0, 0, 0] == 0.5
    assert np.count_nonzero(s.eri) == 1
    assert np.count_nonzero(s.h) == 0
    assert (s.n_orb, s.n_elec, s.ms2) == (2, 2, 0)


def test_permutational_symmetry_fill():
    s = parse_fcidump(HEADER + " 0.25 1 2 1 1\n")
    for idx in [(0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 0)]:
        assert s.eri[idx] == 0.25
    assert np.count_nonzero(s.eri) == 4


def test_one_electron_core_and_fortran_exponents():
    s = parse_fcidump(HEADER + " -1.5D+00 1 1 0 0\n 0.1 2 1 0 0\n 7.25 0 0 0 0\n")
    assert s.h[0, 0] == -1.5
    assert s.h[0, 1] == s.h[1, 0] == 0.1
    assert s.e_core == 7.25


def test_slash_terminator_and_default_ms2():
    s = parse_fcidump("&FCI NORB=1, NELEC=2 /\n 1.0 1 1 1 1\n")
    assert s.ms2 == 0 and s.eri[0, 0, 0, 0] == 1.0


def test_orbsym_is_kept():
    assert parse_fcidump(HEADER).orbsym == (1, 1)


@pytest.mark.parametrize("body, line", [
    (" 0.5 1 3 1 1\n", 5),        # index beyond NORB
    (" abc 1 1 1 1\n", 5),        # non-numeric value
    (" 0.5 1 1 1\n", 5),          # wrong field count
    (" 0.5 1 1 -1 1\n", 5),       # negative index
])
def test_malformed_lines_report_line_number(body, line):
    with pytest.raises(FcidumpError) as err:
        parse_fcidump(HEADER + body)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


@pytest.mark.parametrize("text", ["NORB=2,NELEC=2\n", "&FCI NELEC=2\n&END\n", "&FCI NORB=2,NELEC=x\n&END\n"])
def test_malformed_header(text):
    with pytest.raises(FcidumpError):
        parse_fcidump(text)


def test_hubbard_round_trip(tmp_path):
    s = hubbard_dimer(t=1.0, U=2.0)
    path = tmp_path / "dimer.fcidump"
    write_fcidump(path, s)
    back = read_fcidump(path)
    assert back.same_as(s)
    assert np.array_equal(back.h, s.h) and np.array_equal(back.eri, s.eri)


def test_random_round_trip_is_exact():
    s = random_integrals(4, 2, seed=7)
    back = parse_fcidump(format_fcidump(s))
    assert np.array_equal(back.eri, s.eri)
    assert np.array_equal(back.h, s.h)
    assert back.e_core == s.e_core


def test_bundled_fixtures_parse():
    s = read_fcidump(DATA / "h2_631g_rhf.fcidump")
    assert (s.n_orb, s.n_elec) == (4, 2)
    assert np.allclose(s.eri, s.eri.transpose(1, 0, 2, 3))
    assert np.allclose(s.eri, s.eri.transpose(2, 3, 0, 1))


def test_spin_orbital_pauli_self_term():
    U = 1.7
    s = SpatialIntegrals(1, 2, 0, 0.0, np.zeros((1, 1)), np.full((1, 1, 1, 1), U))
    st = spinorbitalize(s)
    g = st.physicist()
    assert g[0, 0, 0, 0] == 0.0          # <1a 1a || 1a 1a>
    assert st.v_bar[0, 0, 1, 1] == U     # (1a 1a | 1b 1b) with no exchange partner
    assert g[0, 1, 0, 1] == U


def test_spin_orbital_one_body_degeneracy():
    s = SpatialIntegrals(2, 2, 0, 0.0, np.diag([-0.5, 0.3]), np.zeros((2, 2, 2, 2)))
    assert np.allclose(np.diag(spinorbitalize(s).h_so), [-0.5, -0.5, 0.3, 0.3])


def test_determinant_expectation_matches_first_quantized():
    """<D|H|D> for D = |1a 2b> against the explicit two-particle integral."""
    s = random_integrals(2, 2, seed=3)
    st = spinorbitalize(s)
    occ = [0, 3]  # 1 alpha, 2 beta
    g = st.physicist()
    e_store = sum(st.h_so[p, p] for p in occ) + 0.5 * sum(g[p, q, p, q] for p in occ for q in occ)
    # first quantized: opposite spins -> Coulomb only, (11|22)
    e_direct = s.h[0, 0] + s.h[1, 1] + s.eri[0, 0, 1, 1]
    assert e_store == pytest.approx(e_direct, abs=1e-14)


def test_direct_sum_identity_and_blocks():
    a = random_integrals(3, 2, seed=1)
    b = random_integrals(2, 2, seed=2)
    assert direct_sum(a, SpatialIntegrals.empty()).same_as(a)
    ab = direct_sum(a, b)
    assert ab.n_orb == 5 and ab.n_elec == 4
    assert ab.e_core == pytest.approx(a.e_core + b.e_core)
    mask = np.zeros((5,) * 4, dtype=bool)
    mask[:3, :3, :3, :3] = True
    mask[3:, 3:, 3:, 3:] = True
    assert np.all(ab.eri[~mask] == 0.0)
    assert np.all(ab.h[:3, 3:] == 0.0)


def test_permutation_and_rotation_are_consistent():
    s = random_integrals(4, 2, seed=9)
    order = [2, 0, 3, 1]
    p = permute_orbitals(s, order)
    u = np.eye(4)[:, order]
    r = rotate_orbitals(s, u)
    assert np.allclose(p.h, r.h) and np.allclose(p.eri, r.eri)
    with pytest.raises(ValueError):
        permute_orbitals(s, [0, 0, 1, 2])


def test_spatial_integrals_are_immutable():
    s = random_integrals(2, 2)
    with pytest.raises(ValueError):
        s.h[0, 0] = 1.0
