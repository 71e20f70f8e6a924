"""Loss-tolerant linear steering inequalities for von Neumann measurements."""

from .analysis import (
    ThresholdReport,
    ViolationReport,
    critical_eta,
    critical_w,
    normalized_violation,
    quantum_beta,
    violation,
)
from .assemblages import (
    Assemblage,
    BipartiteState,
    apply_loss,
    assemble,
    filtered_functional,
    isotropic,
    lhs_assemblage,
    max_entangled,
    noisy_lossy_assemblage,
    schmidt_state,
)
from .measurements import (
    Basis,
    MeasurementSet,
    load_bases,
    lossy_povm,
    marginalize,
    max_overlap,
    mub_prime,
    parent_povm,
    random_basis,
    save_bases,
    verify_mub,
)
from .steering import (
    DeterministicStrategy,
    LhsBoundReport,
    SteeringFunctional,
    analytic_lhs_bound,
    build_functional,
    class_bound,
    exact_lhs_bound,
    projector_sum_norm_check,
    strategy_operator,
)

__version__ = "0.1.0"
