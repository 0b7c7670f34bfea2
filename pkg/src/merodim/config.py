"""Central numeric policy: every tolerance constant lives here.

All arithmetic is 64-bit binary floating point; the tolerances below sit
far above double rounding error, which is why no arbitrary-precision
fallback exists anywhere in the package.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # relative distance at which a point counts as an exact pole hit
    pole_hit_rel: float = 1e-12
    # fraction of the local pole scale inside which series evaluation
    # switches to the principal-part split
    near_pole_factor: float = 0.1
    # orbit modulus treated as numerically infinite
    overflow_modulus: float = 1e300
    # absolute tail target for the web-constant series
    web_constant_tail: float = 1e-12
    # membership check for sampled spider-web points
    web_membership: float = 1e-10
    # polar round-trip guarantee for finite plane points
    polar_roundtrip_rel: float = 1e-12


TOL = Tolerances()

# default experiment knobs (single source of truth, echoed by `merodim defaults`)
DEFAULTS = {
    "schema_version": 1,
    "rho": 2.0,
    "M": 1,
    "R": 1.0e6,
    "r_max": 1.0e4,
    "max_entries": 5_000_000,
    "truncation_margin": 8,
    "grid": {"x0": -5.0, "y0": -5.0, "width": 10.0, "height": 10.0, "nx": 200, "ny": 200},
    "grid_R": 10.0,
    "horizon": 50,
    "levels": 50,
    "seed": 20260810,
    "jobs": 1,
    "out_dir": "merodim-out",
}

SCHEMA_VERSION = 1

# environment variable consulted for the default output directory
OUT_DIR_ENV = "MERODIM_OUT"
