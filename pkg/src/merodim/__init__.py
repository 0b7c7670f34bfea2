"""Numerical experiments on escaping sets of meromorphic functions.

Ships a pole atlas with dimension-threshold estimation, series and
disk-forest function evaluators, orbit/grid dynamics, box-counting and
nested-cover dimension bounds, construction verifiers, and an experiment
pipeline with a CLI front end.
"""

from .config import DEFAULTS, TOL
from .dimension import (
    CoverSequence,
    DimensionEstimate,
    box_count,
    escape_cover_sequence,
    fit_box_dimension,
    mcmullen_bound,
    measure_densities,
)
from .dynamics import (
    GridClassification,
    OrbitRecord,
    Rect,
    classify_grid,
    escaping_points,
    iterate_orbit,
)
from .errors import NumericalError, ValidationError
from .functions import (
    DiskForestSpec,
    EvalResult,
    ForestDisk,
    RationalFunctionSpec,
    SeriesFunctionSpec,
    eval_f,
    eval_forest,
    eval_g,
    eval_g_deriv,
    evaluate,
    tail_cutoff,
)
from .geometry import (
    Annulus,
    Disk,
    KoebeConstants,
    PlanePoint,
    koebe_constants,
    spherical_distance,
    spherical_diameter_factor,
)
from .pipeline import ExperimentConfig, ExperimentReport, run_experiment, sweep
from .poles import (
    PoleAtlas,
    PoleEntry,
    build_atlas,
    convergence_exponent_estimate,
    counting_function,
    critical_exponent,
    dimension_bound,
    pole_weight_sum,
)
from .verify import (
    AreaProbeResult,
    ConstraintReport,
    WebSample,
    area_probe,
    choose_forest_params,
    compute_web_constant,
    derivative_envelope_spotcheck,
    ring_layout,
    sample_web,
    validate_forest_params,
)

__version__ = "0.1.0"
