"""Computational laboratory for measure-preserving dynamics.

Concrete systems (circle maps, toral automorphisms, subshifts) together with
finite-resolution chaos certificates, limit-theorem diagnostics, empirical
traces with Lipschitz observables, dimension-drop model arithmetic, and
crossed-product K-group computations.
"""

__version__ = "0.1.0"

from .systems import (
    SystemSpec,
    SymbolPoint,
    doubling,
    rotation,
    intermittent,
    toral,
    subshift,
    full_shift,
    dyadic_permutation,
    step,
    orbit,
    distance,
    sample_invariant,
    periodic_points,
    primitivity_check,
)
from .measures import (
    EmpiricalMeasure,
    empirical_measure,
    dirac,
    ou_diagnostics,
    pushforward_measure,
    wasserstein1,
)
from .observables import (
    Observable,
    coordinate,
    cos_angle,
    sin_angle,
    torus_coordinate,
    cylinder_indicator,
    shifted,
    coboundary,
    validate_regularity,
)
from .stats import (
    ergodic_sum,
    birkhoff_average,
    correlation_series,
    edc_fit,
    variance_estimate,
    clt_test,
    asclt_test,
    deviation_profile,
    mixing_classifier,
)
from .chaos import (
    GridCell,
    transitivity_check,
    periodic_density_check,
    sensitivity_estimate,
    touhey_witness,
    chaos_certificate,
)
from .traces import (
    Trace,
    TracialObservable,
    trace_eval,
    trace_pushforward,
    tracial_ergodic_average,
    tracial_statistics_bridge,
    mix_traces,
)
from .dimdrop import (
    StageParams,
    generate_parameters,
    xi_schedule,
    MeshFunction,
    sample_mesh_function,
    demo_connecting_map,
    boundary_check,
    lipschitz_budget,
    connecting_trace_pushforward,
)
from .ktheory import (
    FGAbelianGroup,
    GroupHom,
    smith_normal_form,
    kernel_cokernel,
    pv_crossed_kgroups,
)

__all__ = [name for name in dir() if not name.startswith("_")]
