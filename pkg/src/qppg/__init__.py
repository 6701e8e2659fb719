"""Quantum-preconditioned policy gradients and baselines on single-qubit
control, a classical two-state task, and Rayleigh-fading link adaptation.
"""

from .agents import (
    AgentConfig,
    NaturalPGAgent,
    PolicyGradientAgent,
    QDQNAgent,
    QNPGAgent,
    QPPGAgent,
    ReplayBuffer,
    Trajectory,
    compute_returns,
    policy_gradient,
    select_action,
)
from .envs import (
    ClassicalTwoStateEnv,
    LinkAction,
    QuantumSingleQubitEnv,
    RayleighLinkEnv,
    snr_threshold,
)
from .fisher import (
    BlockLayout,
    amplitude_embed,
    block_diagonal_of,
    classical_fim,
    precondition_solve,
    qfi_pure,
    qfi_sld,
)
from .harness import (
    ExperimentConfig,
    RunRecord,
    episodes_to_success,
    ergodic_capacity,
    moving_average,
    parse_config,
    run_training,
)

__version__ = "0.1.0"
