"""Bell nonlocality from a PPT bound entangled two-qutrit state.

Toolkit for constructing the rank-4 PT-invariant state, evaluating and
bounding the associated Bell functional (exact local bound, see-saw lower
bounds, moment-hierarchy upper bounds with a PPT constraint), certifying
randomness via guessing-probability programs, and measuring white-noise
robustness. All semidefinite programs run on the bundled interior-point
solver.
"""

from .bell import (
    COUNTEREXAMPLE_SCENARIO,
    Behavior,
    BellFunctional,
    DeterministicStrategy,
    MeasurementSet,
    Scenario,
    analytic_violation_closed_form,
    behavior,
    bell_operator,
    build_analytic_measurements,
    build_chsh_functional,
    build_functional_I,
    deterministic_behavior,
    evaluate,
    functional_from_json,
    functional_to_json,
    local_bound,
)
from .config import DEFAULT_TOL, Tolerances
from .hierarchy import (
    MomentStructure,
    build_structure,
    feasible_moments,
    guessing_probability,
    moment_problem,
    tsirelson_check,
    upper_bound_ppt,
)
from .linalg import (
    BipartiteDims,
    eigh,
    hermiticity_deviation,
    is_psd,
    kron,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
)
from .robustness import (
    RobustnessReport,
    noise_threshold,
    noise_threshold_bisect,
    violation_at,
)
from .sdp import (
    SdpOptions,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    problem_from_json,
    problem_to_json,
    solution_to_json,
    solve,
)
from .seesaw import (
    SeesawConfig,
    SeesawRecord,
    SolverStepError,
    alice_step,
    bob_step,
    random_measurements,
    run,
    state_step,
)
from .states import (
    EIGENVALUES,
    DensityMatrix,
    StateReport,
    build_counterexample_state,
    mix_with_white_noise,
    state_eigenvectors,
    state_from_json,
    state_to_json,
    verify_state,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
