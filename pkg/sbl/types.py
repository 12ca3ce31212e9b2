"""
Value types shared by the SBL solver, the unfolded layers and the environment
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

ALPHA_FLOOR = 1e-12
GAMMA_FLOOR = 1e-12
PRECISION_CAP = 1e12


class SblHyper(BaseModel):
    """Hyperparameters of the off-grid SBL iteration"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    a: float = Field(1e-6, ge=0.0, description="Gamma hyperprior shape offset, shared by the alpha and gamma updates")
    b: float = Field(1e-6, ge=0.0, description="Gamma hyperprior rate, shared by the alpha and gamma updates")
    delta: float = Field(1e-8, gt=0.0, description="Stop when the posterior-mean channel moves by ||.||^2 <= delta")
    max_iters: int = Field(500, ge=1)
    step_beta: float = Field(2e-6, gt=0.0, description="Fixed beta step used by the 'fixed' rule")
    beta_step_rule: Literal['fixed', 'curvature', 'calibrated'] = Field(
        'fixed', description="fixed: step_beta every iteration; curvature: per-gap Gauss-Newton step every iteration; "
                             "calibrated: one step fixed on the first iteration")
    beta_step_fraction: float = Field(0.25, gt=0.0, description="Calibrated first step moves the steepest gap by this fraction of the grid spacing")
    support_ratio: float = Field(0.01, ge=0.0, le=1.0)
    gamma_cap: float = Field(PRECISION_CAP, gt=0.0)
    recompute_posterior: bool = Field(True, description="Recompute the posterior at alpha_(t+1) before the gamma update")
    beta_step_halving: bool = Field(False, description="Halve the beta step until the evidence does not decrease")
    max_halvings: int = Field(10, ge=0)
    track_evidence: bool = True

    @field_validator('a', 'b')
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("hyperprior constants must be finite")
        return value


@dataclass
class SblState:
    alpha: float
    gamma: np.ndarray
    beta: np.ndarray
    iter: int = 0

    def copy(self) -> 'SblState':
        return replace(self, gamma=self.gamma.copy(), beta=self.beta.copy())


@dataclass
class Posterior:
    """Gaussian posterior of the sparse weights: mean mu, covariance sigma, and eta"""
    mu: np.ndarray
    sigma: np.ndarray
    eta: float


@dataclass
class IterationRecord:
    alpha: float
    change: float
    evidence: float


@dataclass
class SblResult:
    h_hat: np.ndarray
    support: np.ndarray
    state: SblState
    iters_used: int
    nmse: float
    trajectory: List[IterationRecord] = field(default_factory=list)
