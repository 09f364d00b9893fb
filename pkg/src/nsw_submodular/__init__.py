"""Constant-factor approximation of Nash social welfare for submodular valuations.

Typical use::

    from nsw_submodular import generate_instance, run_pipeline, brute_force_nsw

    inst = generate_instance("coverage", n=3, m=7, seed=1)
    report = run_pipeline(inst)
    report["best"]["log_nsw"], brute_force_nsw(inst).log_nsw
"""
from .errors import (
    InstanceFormatError,
    InvariantViolation,
    NSWError,
    PropertyViolation,
    SizeLimitExceeded,
    SupportTooLarge,
)
from .generators import GENERATORS, generate_instance, tightness_instance
from .instance import Instance, load_instance, save_instance
from .matching import Matching, final_matching, initial_matching, max_product_matching
from .multilinear import Estimate, eval_exact, eval_overlay, eval_sample, gradient, partial_derivative
from .pipeline import PipelineConfig, check_command, compare_command, run_pipeline
from .recombination import (
    AlternatingDecomposition,
    matching_extension_bound,
    recombine,
    verify_recombination,
)
from .reference import (
    ExactResult,
    brute_force_nsw,
    brute_force_nsw_matched,
    golden_instances,
    nsw_value,
)
from .relaxation import GreedyConfig, GreedyTrace, active_agents, iterated_continuous_greedy
from .rounding import (
    RoundingOutcome,
    SparsifiedSolution,
    find_large_set,
    pad_with_dummies,
    randomized_rounding,
    restricted_randomized_rounding,
)
from .valuations import (
    AdditiveOracle,
    BudgetAdditiveOracle,
    CoverageOracle,
    ExplicitTableOracle,
    PartitionMatroidRankOracle,
    PropertyReport,
    ValuationOracle,
    build_oracle,
    check_properties,
)

__version__ = "0.1.0"
