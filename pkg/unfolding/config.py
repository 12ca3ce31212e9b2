"""
Action-range settings for unfolded layers
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .codec import CODEC_MODES


class UnfoldingConfig(BaseModel):
    """
    How a squashed actor output in [-1, 1] becomes LayerParams.

    a maps piecewise-linearly onto [0, a_max] and b log-piecewise-linearly onto
    [b_min, b_max], both with 0 at the plain hyperprior value; c1 and step_beta
    scale their plain-iteration values, and Theta_2 entries perturb the
    plain values by theta2_scale times a per-field reference magnitude.
    """
    model_config = ConfigDict(extra='forbid')

    codec_mode: str = Field('diagonal-plus-rank1')
    a_max: float = Field(1.0, ge=0.0)
    b_min: float = Field(1e-8, gt=0.0)
    b_max: float = Field(1.0, gt=0.0)
    c1_scale: float = Field(0.5, ge=0.0, le=1.0)
    theta2_scale: float = Field(0.05, ge=0.0)
    trainable_pilot: bool = False

    @model_validator(mode='after')
    def _check(self) -> 'UnfoldingConfig':
        if self.codec_mode not in CODEC_MODES:
            raise ValueError(f"codec_mode must be one of {CODEC_MODES}")
        if self.b_min >= self.b_max:
            raise ValueError("b_min must be below b_max")
        return self
