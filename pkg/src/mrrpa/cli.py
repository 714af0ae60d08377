"""Batch runner: ``mrrpa run config.json`` and ``mrrpa extensivity config.json``.

A configuration is a single JSON document validated against ``config_schema.json``.
Each input is an FCIDUMP file; methods are named ``MR-dRPA``, ``MR-dRPA-e``,
``MR-RPAx``, ``MR-RPAx-e``, ``MR-ppRPA``, ``SR-dRPA``, ``SR-RPAx`` or ``SR-ppRPA``
(``-e`` = external-only screening).  Reports are CSV (fixed columns, 9-decimal
energies) or schema-versioned JSON, always in config order.

Exit codes: 0 all succeeded, 1 configuration / IO / computation error,
2 instability encountered, 3 route inconsistency (or failed extensivity check).
When several apply the most severe is returned, in the order 1 > 3 > 2.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from mrrpa import ph, quadrature
from mrrpa.driver import ROUTES, prepare_reference, run_method, single_reference_partition
from mrrpa.dyall import OrbitalPartition
from mrrpa.errors import ConfigError, MrrpaError
from mrrpa.integrals import direct_sum, permute_orbitals, read_fcidump

log = logging.getLogger("mrrpa")

REPORT_VERSION = 1
INCONSISTENCY_TOL = 1e-6
EXTENSIVITY_TOL = 1e-8
EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE, EXIT_INCONSISTENT = 0, 1, 2, 3

CSV_COLUMNS = (
    "version", "label", "R_over_R0", "method", "status",
    "e_ref", "e_corr", "e_total",
    "e_corr_plasmon", "e_corr_riccati", "e_corr_quadrature",
    "route_max_discrepancy", "stable", "pairing_residual", "mu", "iterations",
    "diverging", "orders", "message",
)
EXTENSIVITY_COLUMNS = (
    "version", "label", "method", "status", "e_corr_A", "e_corr_B", "e_corr_A_plus_B", "e_corr_AB",
    "difference", "passed", "message",
)


# --------------------------------------------------------------------------
# configuration


def _schema():
    return json.loads(resources.files("mrrpa").joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class MethodSpec:
    name: str
    reference: str  # "MR" or "SR"
    family: str
    screening: str

    @classmethod
    def parse(cls, name):
        ref, rest = name.split("-", 1)
        screening = ph.FULL
        if rest.endswith("-e"):
            rest, screening = rest[:-2], ph.EXTERNAL_ONLY
        return cls(name, ref, rest, screening)


@dataclass(frozen=True)
class InputSpec:
    path: str
    label: str
    r_over_r0: object = None
    partition: object = None  # dict with ncore, nact[, n_elec, nfrozen]


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple
    methods: tuple
    routes: tuple = ROUTES
    orders: int = 0
    n_points: int = quadrature.DEFAULT_POINTS
    omega0: object = None
    riccati: dict = field(default_factory=dict)
    tolerance: float = EXTENSIVITY_TOL
    output_format: str = "csv"
    output_path: object = None


def load_config(source, base_dir=None):
    """Validate a config (path, JSON text or dict) and return a RunConfig.

    Relative input and output paths are resolved against the config file's directory.
    """
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        base_dir = base_dir or path.parent
    base_dir = Path(base_dir or ".")

    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, err.absolute_path)

    methods = tuple(MethodSpec.parse(m) for m in doc["methods"])
    default_part = doc.get("partition")
    inputs = []
    for k, item in enumerate(doc["inputs"]):
        part = item.get("partition", default_part)
        if part is None and any(m.reference == "MR" for m in methods):
            raise ConfigError("multi-reference methods need a partition", ("inputs", k, "partition"))
        p = Path(item["path"])
        inputs.append(InputSpec(str(p if p.is_absolute() else base_dir / p),
                                item.get("label", p.stem), item.get("R_over_R0"), part))
    quad = doc.get("quadrature", {})
    out = doc.get("output", {})
    out_path = out.get("path")
    if out_path is not None and not Path(out_path).is_absolute():
        out_path = str(base_dir / out_path)
    routes = tuple(r for r in ROUTES if r in doc.get("routes", ROUTES))
    return RunConfig(tuple(inputs), methods, routes, doc.get("orders", 0),
                     quad.get("n_points", quadrature.DEFAULT_POINTS), quad.get("omega0_override"),
                     dict(doc.get("riccati", {})), doc.get("tolerance", EXTENSIVITY_TOL),
                     out.get("format", "csv"), out_path)


# --------------------------------------------------------------------------
# per-input pipelines


def _partition(spatial, reference, part):
    if reference == "SR":
        nfrozen = part.get("nfrozen", 0) if part else 0
        return single_reference_partition(spatial, nfrozen)
    if "n_elec" in part and part["n_elec"] != spatial.n_elec:
        raise ConfigError(f"n_elec={part['n_elec']} but the FCIDUMP has NELEC={spatial.n_elec}",
                          ("partition", "n_elec"))
    return OrbitalPartition.from_counts(spatial.n_orb, spatial.n_elec, part["ncore"], part["nact"],
                                        part.get("nfrozen", 0))


def _row(label, r, method, status, message="", result=None):
    row = {"label": label, "R_over_R0": r, "method": method, "status": status,
           "message": message, "e_ref": None, "e_corr": {}, "energy": None, "e_total": None,
           "route_max_discrepancy": None, "orders": None, "diagnostics": {}}
    if result is not None:
        row.update(e_ref=result.e_ref, e_corr=dict(result.e_corr), energy=result.energy,
                   e_total=result.e_total, diagnostics=_plain(result.diagnostics),
                   orders=None if result.orders is None else [float(x) for x in result.orders.orders])
        if result.e_corr:
            row["route_max_discrepancy"] = result.route_max_discrepancy
    return row


def _plain(obj):
    """Diagnostics as JSON-friendly builtins."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _method_kwargs(cfg):
    return dict(routes=cfg.routes, n_orders=cfg.orders, quad_points=cfg.n_points,
                omega0=cfg.omega0, riccati=cfg.riccati or None)


def _classify(result):
    if result.status == "unstable":
        return "unstable", result.error
    if len(result.e_corr) > 1 and result.route_max_discrepancy >= INCONSISTENCY_TOL:
        return "inconsistent", f"routes differ by {result.route_max_discrepancy:.3e}"
    return "ok", ""


def _run_methods(spatial, part_spec, cfg, label, r):
    """All configured methods on one set of integrals; one row per method."""
    rows, refs = [], {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            if method.reference not in refs:
                part = _partition(spatial, method.reference, part_spec)
                refs[method.reference] = prepare_reference(spatial, part)
            result = run_method(refs[method.reference], method.family, method.screening,
                                **_method_kwargs(cfg))
            status, message = _classify(result)
            rows.append(_row(label, r, method.name, status, message, result))
        except (MrrpaError, ValueError, np.linalg.LinAlgError) as exc:
            rows.append(_row(label, r, method.name, "error", f"{type(exc).__name__}: {exc}"))
        log.info("%s %s: %s (%.2fs)", label, method.name, rows[-1]["status"], time.perf_counter() - t0)
    return rows


def _run_input(args):
    inp, cfg = args
    try:
        spatial = read_fcidump(inp.path)
    except (OSError, MrrpaError) as exc:
        return [_row(inp.label, inp.r_over_r0, m.name, "error", f"{type(exc).__name__}: {exc}")
                for m in cfg.methods]
    return _run_methods(spatial, inp.partition, cfg, inp.label, inp.r_over_r0)


def _map(func, items, jobs):
    """Order-preserving map, in a process pool when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def run(cfg, jobs=1):
    """Run every method on every input; returns (rows, exit code)."""
    per_input = _map(_run_input, [(inp, cfg) for inp in cfg.inputs], jobs)
    rows = [row for group in per_input for row in group]
    return rows, exit_code(row["status"] for row in rows)


def exit_code(statuses):
    statuses = set(statuses)
    if "error" in statuses:
        return EXIT_ERROR
    if "inconsistent" in statuses or "failed" in statuses:
        return EXIT_INCONSISTENT
    if "unstable" in statuses:
        return EXIT_UNSTABLE
    return EXIT_OK


# --------------------------------------------------------------------------
# size-extensivity harness


def composite(spatial_a, part_a, spatial_b, part_b):
    """Noninteracting A + B with orbitals ordered core(A) core(B) act(A) act(B) virt(A) virt(B)."""
    ab = direct_sum(spatial_a, spatial_b)
    na = spatial_a.n_orb

    def blocks(part, offset):
        c, a = part.ncore, part.nact
        idx = np.arange(part.n_orb) + offset
        return idx[:c], idx[c:c + a], idx[c + a:]

    ca, aa, va = blocks(part_a, 0)
    cb, ab_, vb = blocks(part_b, na)
    order = np.concatenate([ca, cb, aa, ab_, va, vb])
    part = OrbitalPartition.from_counts(ab.n_orb, ab.n_elec, part_a.ncore + part_b.ncore,
                                        part_a.nact + part_b.nact)
    return permute_orbitals(ab, order), part


def _energy(ref, method, cfg):
    result = run_method(ref, method.family, method.screening, **_method_kwargs(cfg))
    if result.status != "ok":
        raise MrrpaError(f"{method.name} {result.status}: {result.error}")
    return result.energy


def _extensivity_pair(args):
    (inp_a, inp_b), cfg = args
    label = inp_a.label if inp_a is inp_b else f"{inp_a.label}+{inp_b.label}"
    rows = []
    try:
        sa = read_fcidump(inp_a.path)
        sb = sa if inp_b is inp_a else read_fcidump(inp_b.path)
    except (OSError, MrrpaError) as exc:
        return [_ext_row(label, m.name, "error", message=f"{type(exc).__name__}: {exc}")
                for m in cfg.methods]
    refs = {}
    for method in cfg.methods:
        try:
            if method.reference not in refs:
                pa = _partition(sa, method.reference, inp_a.partition)
                pb = _partition(sb, method.reference, inp_b.partition)
                s_ab, p_ab = composite(sa, pa, sb, pb)
                ref_a = prepare_reference(sa, pa)
                ref_b = ref_a if inp_b is inp_a else prepare_reference(sb, pb)
                refs[method.reference] = (ref_a, ref_b, prepare_reference(s_ab, p_ab))
            ref_a, ref_b, ref_ab = refs[method.reference]
            ea = _energy(ref_a, method, cfg)
            eb = ea if ref_b is ref_a else _energy(ref_b, method, cfg)
            eab = _energy(ref_ab, method, cfg)
            diff = abs(eab - ea - eb)
            passed = diff < cfg.tolerance
            rows.append(_ext_row(label, method.name, "ok" if passed else "failed", ea, eb, eab, diff, passed))
        except (MrrpaError, ValueError, np.linalg.LinAlgError) as exc:
            rows.append(_ext_row(label, method.name, "error", message=f"{type(exc).__name__}: {exc}"))
        log.info("%s %s: %s", label, method.name, rows[-1]["status"])
    return rows


def _ext_row(label, method, status, ea=None, eb=None, eab=None, diff=None, passed=False, message=""):
    return {"label": label, "method": method, "status": status, "e_corr_A": ea, "e_corr_B": eb,
            "e_corr_AB": eab, "difference": diff, "passed": passed, "message": message}


def extensivity_check(cfg, jobs=1):
    """|E(AB) - E(A) - E(B)| per method.  One input is paired with itself; two or more
    inputs are paired consecutively (1+2, 3+4, ...)."""
    inputs = list(cfg.inputs)
    if len(inputs) == 1:
        pairs = [(inputs[0], inputs[0])]
    elif len(inputs) % 2 == 0:
        pairs = list(zip(inputs[::2], inputs[1::2]))
    else:
        raise ConfigError("extensivity needs one input or an even number of inputs", ("inputs",))
    per_pair = _map(_extensivity_pair, [(p, cfg) for p in pairs], jobs)
    rows = [row for group in per_pair for row in group]
    return rows, exit_code(row["status"] for row in rows)


# --------------------------------------------------------------------------
# reports


def _fmt_energy(x):
    return "" if x is None else f"{x:.9f}"


def _fmt_sci(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3e}"


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


def _csv_text(header, lines):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(lines)
    return buf.getvalue()


def format_csv(rows):
    lines = []
    for row in rows:
        d = row["diagnostics"]
        orders = "" if row["orders"] is None else ";".join(_fmt_energy(x) for x in row["orders"])
        lines.append([
            REPORT_VERSION, row["label"], _fmt(row["R_over_R0"]), row["method"], row["status"],
            _fmt_energy(row["e_ref"]), _fmt_energy(row["energy"]), _fmt_energy(row["e_total"]),
            *(_fmt_energy(row["e_corr"].get(r)) for r in ROUTES),
            _fmt_sci(row["route_max_discrepancy"]), _fmt(d.get("stable")),
            _fmt_sci(d.get("pairing_residual")), _fmt_energy(d.get("mu")), _fmt(d.get("iterations")),
            _fmt(d.get("diverging")), orders, row["message"],
        ])
    return _csv_text(CSV_COLUMNS, lines)


def format_extensivity_csv(rows):
    lines = [[REPORT_VERSION, r["label"], r["method"], r["status"], _fmt_energy(r["e_corr_A"]),
              _fmt_energy(r["e_corr_B"]),
              _fmt_energy(None if r["e_corr_A"] is None else r["e_corr_A"] + r["e_corr_B"]),
              _fmt_energy(r["e_corr_AB"]), _fmt_sci(r["difference"]),
              _fmt(r["passed"]), r["message"]] for r in rows]
    return _csv_text(EXTENSIVITY_COLUMNS, lines)


def format_json(rows, kind="run"):
    doc = {"schema": f"mrrpa-{kind}-report", "schema_version": REPORT_VERSION, "rows": rows}
    return json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n"


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="mrrpa", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1, help="inputs processed concurrently")
    common.add_argument("--verbose", "-v", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="compute correlation energies").add_argument(
        "config", help="JSON configuration file")
    sub.add_parser("extensivity", parents=[common],
                   help="check |E(AB) - E(A) - E(B)| for noninteracting fragments").add_argument(
        "config", help="JSON configuration file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    jobs = args.jobs
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if jobs < 1:
        print("mrrpa: --jobs must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            rows, code = run(cfg, jobs)
            text = format_csv(rows) if cfg.output_format == "csv" else format_json(rows, "run")
        else:
            rows, code = extensivity_check(cfg, jobs)
            text = (format_extensivity_csv(rows) if cfg.output_format == "csv"
                    else format_json(rows, "extensivity"))
        _emit(text, cfg.output_path)
    except ConfigError as exc:
        print(f"mrrpa: config error at {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"mrrpa: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for row in rows:
        if row["status"] != "ok":
            log.warning("%s %s: %s %s", row["label"], row["method"], row["status"], row["message"])
    return code


if __name__ == "__main__":
    sys.exit(main())
