"""FCIDUMP input/output and spin-orbital integral containers.

Spin orbitals are interleaved: spin orbital ``2*p`` is spatial orbital ``p``
with alpha spin and ``2*p + 1`` the same spatial orbital with beta spin.

Index conventions
-----------------
``SpatialIntegrals.eri[p, q, r, s]`` is the chemists' integral (pq|rs).
``IntegralStore.v_plain[p, r, q, s]`` is the coefficient ``v_{pr,qs}`` of
``1/2 p^+ q^+ s r`` in the Hamiltonian, i.e. (pr|qs) on the spatial parts.
In physicists' brackets <pq|rs> = v_{pr,qs} and
<pq||rs> = <pq|rs> - <pq|sr> = v_bar[p, r, q, s].
"""

import re
from dataclasses import dataclass, field

import numpy as np

from mrrpa.errors import FcidumpError

ALPHA, BETA = 0, 1


def spin_orbital(p, spin):
    return 2 * p + spin


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpatialIntegrals:
    n_orb: int
    n_elec: int
    ms2: int
    e_core: float
    h: np.ndarray
    eri: np.ndarray
    orbsym: tuple = ()

    def __post_init__(self):
        n = self.n_orb
        if n < 0:
            raise ValueError("n_orb must be non-negative")
        if not 0 <= self.n_elec <= 2 * n:
            raise ValueError(f"n_elec={self.n_elec} incompatible with n_orb={n}")
        h = _frozen(self.h).reshape(n, n)
        eri = _frozen(self.eri).reshape(n, n, n, n)
        if n and np.abs(h - h.T).max() > 1e-12:
            raise ValueError("one-electron integrals are not symmetric")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "eri", eri)
        object.__setattr__(self, "e_core", float(self.e_core))

    @classmethod
    def empty(cls):
        return cls(0, 0, 0, 0.0, np.zeros((0, 0)), np.zeros((0, 0, 0, 0)))

    def same_as(self, other):
        return (
            self.n_orb == other.n_orb
            and self.n_elec == other.n_elec
            and self.ms2 == other.ms2
            and self.e_core == other.e_core
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.eri, other.eri)
        )


def _eight_fold_positions(i, j, k, l):
    ij = ((i, j), (j, i))
    kl = ((k, l), (l, k))
    out = set()
    for a in ij:
        for b in kl:
            out.add(a + b)
            out.add(b + a)
    return out


# --------------------------------------------------------------------------
# FCIDUMP

_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)\s*=")


def _parse_header(text, first_line):
    body = re.sub(r"^\s*&FCI", "", text, flags=re.IGNORECASE)
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    parts = _HEADER_KEY.split(body)
    if parts[0].strip(" ,\n\t"):
        raise FcidumpError(f"unexpected header content {parts[0].strip()!r}", first_line)
    values = {}
    for key, raw in zip(parts[1::2], parts[2::2]):
        items = [t for t in re.split(r"[,\s]+", raw.strip()) if t]
        values[key.upper()] = items
    for key in ("NORB", "NELEC"):
        if key not in values or len(values[key]) != 1:
            raise FcidumpError(f"header lacks a scalar {key}", first_line)

    def as_int(key, default=None):
        if key not in values:
            return default
        try:
            return int(values[key][0])
        except ValueError:
            raise FcidumpError(f"header value {key}={values[key][0]!r} is not an integer", first_line)

    norb, nelec, ms2 = as_int("NORB"), as_int("NELEC"), as_int("MS2", 0)
    if norb < 0 or nelec < 0:
        raise FcidumpError("NORB and NELEC must be non-negative", first_line)
    try:
        orbsym = tuple(int(t) for t in values.get("ORBSYM", []))
    except ValueError:
        raise FcidumpError("ORBSYM entries must be integers", first_line)
    return norb, nelec, ms2, orbsym


def parse_fcidump(text):
    """Parse FCIDUMP text into :class:`SpatialIntegrals`.

    ORBSYM is read and kept for round-tripping but never used. Duplicate
    records overwrite earlier ones; lines ``value i 0 0 0`` (orbital energies
    emitted by some writers) are skipped.
    """
    lines = text.splitlines()
    if not lines or not lines[0].lstrip().upper().startswith("&FCI"):
        raise FcidumpError("file must start with an &FCI namelist", 1)
    header = []
    end = None
    for n, line in enumerate(lines):
        header.append(line)
        s = line.strip().upper()
        if s.endswith("&END") or s.endswith("/"):
            end = n
            break
    if end is None:
        raise FcidumpError("unterminated namelist header (no &END or /)", len(lines))
    norb, nelec, ms2, orbsym = _parse_header("\n".join(header), 1)
    if nelec > 2 * norb:
        raise FcidumpError(f"NELEC={nelec} exceeds 2*NORB", 1)

    h = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    e_core = 0.0
    for n in range(end + 1, len(lines)):
        lineno = n + 1
        fields = lines[n].split()
        if not fields:
            continue
        if len(fields) != 5:
            raise FcidumpError(f"expected 'value i j k l', got {lines[n].strip()!r}", lineno)
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
        except ValueError:
            raise FcidumpError(f"non-numeric value {fields[0]!r}", lineno)
        try:
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise FcidumpError(f"non-integer index in {lines[n].strip()!r}", lineno)
        for idx in (i, j, k, l):
            if not 0 <= idx <= norb:
                raise FcidumpError(f"index {idx} out of range [0, {norb}]", lineno)
        if i and j and k and l:
            for pos in _eight_fold_positions(i - 1, j - 1, k - 1, l - 1):
                eri[pos] = value
        elif i and j and not k and not l:
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif not (i or j or k or l):
            e_core = value
        elif i and not (j or k or l):
            continue
        else:
            raise FcidumpError(f"unrecognised index pattern {i} {j} {k} {l}", lineno)
    return SpatialIntegrals(norb, nelec, ms2, e_core, h, eri, orbsym)


def read_fcidump(path):
    with open(path) as f:
        return parse_fcidump(f.read())


def format_fcidump(s):
    """Render :class:`SpatialIntegrals` as FCIDUMP text with 17 significant digits."""
    n = s.n_orb
    orbsym = s.orbsym if len(s.orbsym) == n else (1,) * n
    out = [f" &FCI NORB={n},NELEC={s.n_elec},MS2={s.ms2},"]
    out.append("  ORBSYM=" + "".join(f"{x}," for x in orbsym))
    out.append("  ISYM=1,")
    out.append(" &END")
    fmt = "{:.16e} {:d} {:d} {:d} {:d}"
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    v = s.eri[i, j, k, l]
                    if v != 0.0:
                        out.append(fmt.format(v, i + 1, j + 1, k + 1, l + 1))
    for i in range(n):
        for j in range(i + 1):
            if s.h[i, j] != 0.0:
                out.append(fmt.format(s.h[i, j], i + 1, j + 1, 0, 0))
    out.append(fmt.format(s.e_core, 0, 0, 0, 0))
    return "\n".join(out) + "\n"


def write_fcidump(path, s):
    with open(path, "w") as f:
        f.write(format_fcidump(s))


# --------------------------------------------------------------------------
# spin-orbital store


@dataclass(frozen=True)
class IntegralStore:
    m: int
    h_so: np.ndarray
    v_plain: np.ndarray
    v_bar: np.ndarray
    e_core: float
    spatial: SpatialIntegrals = field(repr=False, default=None)

    def physicist(self, antisymmetrized=True):
        """Return g[p, q, r, s] = <pq||rs> (or <pq|rs> when not antisymmetrized)."""
        v = self.v_bar if antisymmetrized else self.v_plain
        return v.transpose(0, 2, 1, 3)


def spinorbitalize(s):
    """Expand spatial integrals to the interleaved spin-orbital basis."""
    n = s.n_orb
    m = 2 * n
    h_so = np.zeros((m, m))
    v = np.zeros((m, m, m, m))
    for a in (ALPHA, BETA):
        h_so[a::2, a::2] = s.h
        for b in (ALPHA, BETA):
            v[a::2, a::2, b::2, b::2] = s.eri
    v_bar = v - v.transpose(0, 3, 2, 1)
    return IntegralStore(m, _frozen(h_so), _frozen(v), _frozen(v_bar), s.e_core, s)


def direct_sum(a, b):
    """Two noninteracting fragments: block-diagonal h, no cross-fragment ERIs."""
    na, nb = a.n_orb, b.n_orb
    n = na + nb
    h = np.zeros((n, n))
    h[:na, :na] = a.h
    h[na:, na:] = b.h
    eri = np.zeros((n, n, n, n))
    eri[:na, :na, :na, :na] = a.eri
    eri[na:, na:, na:, na:] = b.eri
    orbsym = ()
    if len(a.orbsym) == na and len(b.orbsym) == nb:
        orbsym = tuple(a.orbsym) + tuple(b.orbsym)
    return SpatialIntegrals(n, a.n_elec + b.n_elec, a.ms2 + b.ms2, a.e_core + b.e_core, h, eri, orbsym)


def permute_orbitals(s, order):
    """Relabel orbitals so that new orbital ``k`` is old orbital ``order[k]``."""
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(s.n_orb)):
        raise ValueError("order must be a permutation of the orbitals")
    h = s.h[np.ix_(order, order)]
    eri = s.eri[np.ix_(order, order, order, order)]
    orbsym = tuple(s.orbsym[k] for k in order) if len(s.orbsym) == s.n_orb else ()
    return SpatialIntegrals(s.n_orb, s.n_elec, s.ms2, s.e_core, h, eri, orbsym)


def rotate_orbitals(s, u):
    """Transform to orbitals ``phi'_k = sum_p phi_p u[p, k]`` (u orthogonal)."""
    h = u.T @ s.h @ u
    eri = np.einsum("pqrs,pi,qj,rk,sl->ijkl", s.eri, u, u, u, u, optimize=True)
    h = 0.5 * (h + h.T)
    return SpatialIntegrals(s.n_orb, s.n_elec, s.ms2, s.e_core, h, eri, s.orbsym)
