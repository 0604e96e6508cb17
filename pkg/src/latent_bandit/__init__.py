"""Latent-state bandits: simulator, policies, theory checks, and harness."""

__version__ = "0.1.0"

from .env import (
    DualStepOutcome,
    Environment,
    Instance,
    NonErgodicChainError,
    RewardMatrix,
    StepOutcome,
    TransitionMatrix,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_environment,
    make_instance,
    make_transition_matrix,
    sample_instance,
    save_instance,
    stationary_distribution,
)
from .linmodel import ArmLinearModel
from .latent import (
    AdaRPUCB,
    AdaSPUCB,
    Fingerprint,
    GateConfig,
    GateDecision,
    LaggedContext,
    LCTS,
    LCUCB,
    ProbePhase,
    ProtocolError,
    RPUCB,
    SPUCB,
    combined_features,
    compute_gates,
    lagged_features,
)
from .baselines import (
    DiscountedUCB,
    Exp3,
    Exp3S,
    GaussianTS,
    OptimalSingleArmPolicy,
    SlidingWindowUCB,
    UCB1,
    oracle_single_arm,
    state_aware_oracle,
)
from .theory import (
    ProbingBoundInputs,
    ProbingSimResult,
    TauChoice,
    incomplete_block_term,
    optimal_tau,
    probe_cost_estimate,
    regret_rate_bound,
    simulate_idealized_probing,
)
