"""Sample-reuse Monte Carlo estimation of robustness curves.

The public surface is re-exported here; see the submodules for details:
``uncertainty`` (norm-ball families, sampling), ``grid`` (radius grids,
sizing, ENGP), ``engine`` (compressed sample-reuse runs and the oracle),
``analysis`` (interpolation bounds, confidence bands, memory bounds) and
``systems`` (predicates and the two-controller example).
"""

from .analysis import (
    BandParams,
    MemoryBoundReport,
    RobustnessCurve,
    build_band,
    confidence_limits,
    find_r_star,
    interp_error_bound,
    interpolate,
    lipschitz_bound,
    memory_bound,
    running_min,
)
from .engine import (
    RunResult,
    SampleSizeMatrix,
    ViolationMatrix,
    compress,
    decompress,
    oracle_state,
    run,
    run_conventional,
    update_sample_matrix,
    update_violation_matrix,
)
from .errors import CapExceeded, InputError, NumericalError, PredicateError, RobustCurveError
from .grid import (
    RadiusGrid,
    engp,
    engp_bound,
    explicit_grid,
    geometric_grid,
    reuse_factor,
    size_barmish,
    size_geometric,
    size_uniform,
    uniform_grid,
)
from .systems import ViolationPredicate, closed_form_P_A, closed_form_P_B, margins
from .uncertainty import Shape, UncertaintySet, gauge, radius_index, sample_uniform

__version__ = "0.1.0"
