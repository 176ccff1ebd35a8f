"""Generalized one-dimensional diffusions built from scale/speed pairs.

A library for processes generated by the second-order operator
"differentiate by u, then by v" with strictly increasing, possibly
non-smooth u and v: large-deviations action functionals, deterministic and
random time changes, small-noise Monte Carlo, and KPP wave-front
variational problems.
"""

from .action import (
    ActionValue,
    action,
    action_y,
    classical_action,
    holder_modulus,
    reduced_action,
    reduction_check,
    sigma_rate_bound,
)
from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    DvduError,
    HorizonError,
    PathTooShortError,
    PreconditionError,
    RangeError,
)
from .front import (
    FrontScenario,
    FrontSolution,
    condition_n_check,
    front_jump_detector,
    front_time,
    optimize_path,
    quasi_distance,
    w_value,
)
from .paths import (
    PathRegularityReport,
    PiecewisePath,
    compose_u,
    regularity_report,
    sup_distance,
)
from .pieces import AffinePiece, IntegralPiece, TabulatedPiece
from .rde import (
    DichotomyReport,
    McParams,
    RdeField,
    dichotomy_check,
    feynman_kac_step,
    solve_rde,
)
from .scale import (
    GluingData,
    PiecewiseMonotone,
    PointClass,
    ScalePair,
    jump_corner_pair,
    linear_pair,
    wiener_pair,
)
from .simulate import (
    ExitStats,
    OccupationStats,
    SamplePathRecord,
    SeedSpec,
    TubeEstimate,
    WienerPath,
    delay_occupation,
    exit_probability_exact,
    exit_probability_mc,
    random_time_change,
    sample_process,
    sample_terminal,
    sample_wiener,
    tube_probability,
)
from .timechange import (
    ConstancyReport,
    MollifiedPair,
    MonotoneTimeMap,
    check_constancy_on_gamma_jump,
    gamma,
    mollify,
    sigma,
    sigma_n,
)

__version__ = "0.1.0"

__all__ = [
    "ActionValue",
    "AffinePiece",
    "ConfigError",
    "ConstancyReport",
    "ConstructionError",
    "DichotomyReport",
    "DomainError",
    "DvduError",
    "ExitStats",
    "FrontScenario",
    "FrontSolution",
    "GluingData",
    "HorizonError",
    "IntegralPiece",
    "McParams",
    "MollifiedPair",
    "MonotoneTimeMap",
    "OccupationStats",
    "PathRegularityReport",
    "PathTooShortError",
    "PiecewiseMonotone",
    "PiecewisePath",
    "PointClass",
    "PreconditionError",
    "RangeError",
    "RdeField",
    "SamplePathRecord",
    "ScalePair",
    "SeedSpec",
    "TabulatedPiece",
    "TubeEstimate",
    "WienerPath",
    "action",
    "action_y",
    "check_constancy_on_gamma_jump",
    "classical_action",
    "compose_u",
    "condition_n_check",
    "delay_occupation",
    "dichotomy_check",
    "exit_probability_exact",
    "exit_probability_mc",
    "feynman_kac_step",
    "front_jump_detector",
    "front_time",
    "gamma",
    "holder_modulus",
    "jump_corner_pair",
    "linear_pair",
    "mollify",
    "optimize_path",
    "quasi_distance",
    "random_time_change",
    "reduced_action",
    "reduction_check",
    "regularity_report",
    "sample_process",
    "sample_terminal",
    "sample_wiener",
    "sigma",
    "sigma_n",
    "sigma_rate_bound",
    "solve_rde",
    "sup_distance",
    "tube_probability",
    "w_value",
    "wiener_pair",
]
