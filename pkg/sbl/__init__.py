"""
SBL Package for Off-Grid Channel Estimation
Provides the off-grid sparse Bayesian learning solver and its on-grid baseline
"""

from .types import SblHyper, SblState, Posterior, SblResult, IterationRecord
from .posterior import sensing_matrix, posterior_moments, initial_state, log_evidence
from .updates import (
    update_alpha,
    update_gamma,
    beta_gradient,
    beta_gradient_terms,
    beta_surrogate,
    update_beta,
    select_support,
    reconstruct_channel,
)
from .solver import nmse, sbl_iteration, run_sbl, run_standard_sbl

__all__ = [
    'SblHyper',
    'SblState',
    'Posterior',
    'SblResult',
    'IterationRecord',
    'sensing_matrix',
    'posterior_moments',
    'initial_state',
    'log_evidence',
    'update_alpha',
    'update_gamma',
    'beta_gradient',
    'beta_gradient_terms',
    'beta_surrogate',
    'update_beta',
    'select_support',
    'reconstruct_channel',
    'nmse',
    'sbl_iteration',
    'run_sbl',
    'run_standard_sbl',
]

__version__ = '1.0.0'
