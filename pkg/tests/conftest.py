import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mrrpa import OrbitalPartition, prepare_reference, read_fcidump, single_reference_partition  # noqa: E402

DATA = Path(__file__).parent / "data"

# name -> (file, ncore, nact); nact = 0 means a single-reference partition
FIXTURES = {
    "h2_631g_rhf": ("h2_631g_rhf.fcidump", None, 0),
    "lih_sto3g_rhf": ("lih_sto3g_rhf.fcidump", None, 0),
    "h4_sto3g_rhf": ("h4_sto3g_rhf.fcidump", None, 0),
    "hf_r1p0_rhf": ("hf_ccpvdz_r1p0_rhf.fcidump", None, 0),
    "hf_r2p0_rhf": ("hf_ccpvdz_r2p0_rhf.fcidump", None, 0),
    "h2_stretched_rhf": ("h2_sto3g_stretched_rhf.fcidump", None, 0),
    "h2_631g_cas22": ("h2_631g_casscf.fcidump", 0, 2),
    "lih_sto3g_cas22": ("lih_sto3g_casscf.fcidump", 1, 2),
    "h4_631g_cas44": ("h4_631g_casscf.fcidump", 0, 4),
    "h4_sto3g_cas44": ("h4_sto3g_casscf.fcidump", 0, 4),
    "hf_r1p0_cas22": ("hf_ccpvdz_r1p0_casscf.fcidump", 4, 2),
    "hf_r3p0_cas22": ("hf_ccpvdz_r3p0_casscf.fcidump", 4, 2),
}


@functools.lru_cache(maxsize=None)
def spatial(name):
    return read_fcidump(DATA / FIXTURES[name][0])


def partition(name):
    _, ncore, nact = FIXTURES[name]
    s = spatial(name)
    if nact == 0:
        return single_reference_partition(s)
    return OrbitalPartition.from_counts(s.n_orb, s.n_elec, ncore, nact)


@functools.lru_cache(maxsize=None)
def reference(name):
    return prepare_reference(spatial(name), partition(name))


ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def ref_of():
    return reference
