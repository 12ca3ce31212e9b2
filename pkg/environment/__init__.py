"""
Environment Package for Off-Grid Channel Estimation
Provides the layer-by-layer MDP over unfolded or black-box SBL transitions
"""

from .transitions import (
    LayerAction,
    Transition,
    UnfoldedTransition,
    BlackBoxTransition,
    BlackBoxUpdate,
)
from .mdp import (
    EnvConfig,
    EnvState,
    StepRecord,
    EpisodeTrace,
    ChannelEstimationEnv,
    agent_policy,
    plain_sbl_policy,
    rollout,
)

__all__ = [
    'LayerAction',
    'Transition',
    'UnfoldedTransition',
    'BlackBoxTransition',
    'BlackBoxUpdate',
    'EnvConfig',
    'EnvState',
    'StepRecord',
    'EpisodeTrace',
    'ChannelEstimationEnv',
    'agent_policy',
    'plain_sbl_policy',
    'rollout',
]

__version__ = '1.0.0'
