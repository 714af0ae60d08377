"""Single- and multi-reference random phase approximations (dRPA, RPAx, ppRPA)."""

from mrrpa.driver import Reference, prepare_reference, run_method, single_reference_partition
from mrrpa.dyall import OrbitalPartition
from mrrpa.integrals import (
    SpatialIntegrals,
    direct_sum,
    parse_fcidump,
    read_fcidump,
    spinorbitalize,
    write_fcidump,
)

__version__ = "0.1.0"

__all__ = [
    "OrbitalPartition",
    "Reference",
    "SpatialIntegrals",
    "direct_sum",
    "parse_fcidump",
    "prepare_reference",
    "read_fcidump",
    "run_method",
    "single_reference_partition",
    "spinorbitalize",
    "write_fcidump",
]
