"""
DDPG Package for Off-Grid Channel Estimation
Provides numpy actor/critic networks, replay, halting scores and checkpoints
"""

from .mlp import Mlp, mlp_forward, mlp_backward, soft_update
from .optim import AdamOptimizer
from .replay import Transition, Batch, ReplayBuffer
from .halting import HaltingNet, SingleLayerHalting, halting_score, halting_cost, halting_cost_gradient
from .reward import compute_reward
from .agent import DdpgConfig, DdpgAgent, actor_act, critic_update, actor_update, halting_update, update_targets
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    'Mlp',
    'mlp_forward',
    'mlp_backward',
    'soft_update',
    'AdamOptimizer',
    'Transition',
    'Batch',
    'ReplayBuffer',
    'HaltingNet',
    'SingleLayerHalting',
    'halting_score',
    'halting_cost',
    'halting_cost_gradient',
    'compute_reward',
    'DdpgConfig',
    'DdpgAgent',
    'actor_act',
    'critic_update',
    'actor_update',
    'halting_update',
    'update_targets',
    'save_checkpoint',
    'load_checkpoint',
]

__version__ = '1.0.0'
