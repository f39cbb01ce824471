"""Digraph homomorphism solving with lists, plus a falsification harness.

The solving pipeline implements a published-then-withdrawn reduction
strategy exactly as described, guards every internal claim with checks, and
ships with an exact oracle so that wrong answers are caught rather than
trusted.  See README.md for the shape of the whole thing.
"""

from .common import (
    BUDGET_EXHAUSTED,
    BudgetExhausted,
    FalsificationError,
    FalsificationEvent,
)
from .config import SolveConfig, load_config
from .consistency import (
    EmptyListSignal,
    ListAssignment,
    arc_consistency,
    pair_consistency,
    preprocess,
)
from .chom import (
    SENTINEL,
    ConsistentHom,
    NotClosedError,
    ValidationReport,
    init_from_phi,
    restrict,
    validate_all,
)
from .digraph import (
    Digraph,
    Direction,
    FormatError,
    LeveledDigraph,
    LevelMismatchError,
    NotBalancedError,
    OrientedWalk,
    apex_join,
    apex_join_instance,
    compute_levels,
    directed_cycle,
    dump_digraph_text,
    gen_balanced,
    gen_random_digraph,
    is_congruent,
    load_digraph_text,
    oriented_cycle,
)
from .harness import (
    PROFILES,
    DiscrepancyReport,
    FamilyParams,
    FuzzProfile,
    FuzzSummary,
    GenerationFailedError,
    ReplaySummary,
    classify,
    fuzz,
    gen_counterexample_family,
    instance_from_payload,
    payload_from,
    replay,
)
from .minority import (
    CongruenceMismatchError,
    MaltsevHom,
    NotMinorityError,
    PairComponent,
    RelationalReduction,
    derive_maltsev,
    image_pair_component,
    maltsev_solve,
    relational_reduction,
    walk_compose,
)
from .oracle import (
    CapExceededError,
    Homomorphism,
    enumerate_all,
    solve_exact,
    verify,
)
from .pipeline import (
    FALSIFIED_VERDICT,
    NO,
    YES,
    PipelineResult,
    run_pipeline,
)
from .polymorphism import (
    PolymorphismTable,
    PropertyReport,
    check_maltsev,
    check_polymorphism,
    check_weak_nu,
    dump_table_text,
    find_weak_nu,
    is_weak_nu_polymorphism,
    load_table_text,
)
from .reduction import (
    NMContext,
    NMOutcome,
    PossibleImageStore,
    ReachableSets,
    SolveTrace,
    SubInstance,
    big_instance,
    build_reachable,
    propagate_retargets,
    remove_nm,
    replay_events,
    small_instance,
)

__version__ = "0.1.0"
