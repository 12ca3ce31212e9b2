"""
State transitions of the channel-estimation MDP

A transition turns the flat action [L_t, payload] into a LayerAction and applies
it to the SBL state. The unfolded transition perturbs the plain-iteration
parameters; the black-box transition drives (alpha, gamma, beta) through one
diagonal tanh layer.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Optional

import numpy as np

from sbl.types import ALPHA_FLOOR, GAMMA_FLOOR, PRECISION_CAP, SblState
from unfolding.codec import ParamCodec
from unfolding.config import UnfoldingConfig
from unfolding.layer import plain_equivalent_params, unfolded_layer
from unfolding.params import LayerParams

if TYPE_CHECKING:
    from .mdp import ChannelEstimationEnv, EnvState

logger = logging.getLogger(__name__)

THETA2_FIELDS = ('w1', 'b1', 'w2', 'b2', 'b3', 'o1', 'o2')


def _centered(raw: float, centre: float, low: float, high: float) -> float:
    """raw in [-1, 1] onto [low, high], piecewise linear with 0 -> centre"""
    raw = float(raw)
    if raw >= 0.0:
        return float(centre + raw * (high - centre))
    return float(centre + raw * (centre - low))


@dataclass
class LayerAction:
    payload: Any
    halting_score: float
    beta_step: Optional[float] = None


class Transition(ABC):
    payload_dim: int

    @abstractmethod
    def decode(self, env: 'ChannelEstimationEnv', state: 'EnvState', vector: np.ndarray) -> LayerAction:
        ...

    @abstractmethod
    def apply(self, env: 'ChannelEstimationEnv', state: 'EnvState', action: LayerAction) -> SblState:
        ...


class UnfoldedTransition(Transition):
    def __init__(self, codec: ParamCodec, config: UnfoldingConfig):
        self.codec = codec
        self.config = config
        self.payload_dim = codec.flat_len

    def anchor(self, env: 'ChannelEstimationEnv', state: 'EnvState'):
        return plain_equivalent_params(state.sbl, env.pilot, env.grid, env.geom, state.y, env.hyper,
                                       step=state.beta_step)

    def plain_action(self, env: 'ChannelEstimationEnv', state: 'EnvState', halting_score: float = 1.0) -> LayerAction:
        params, step = self.anchor(env, state)
        return LayerAction(payload=params, halting_score=halting_score, beta_step=step)

    def to_params(self, raw: LayerParams, anchor: LayerParams, pilot_scale: float) -> LayerParams:
        """A zero raw vector returns the anchor unchanged."""
        cfg = self.config
        params = anchor.copy()
        params.a = _centered(raw.a, anchor.a, 0.0, max(cfg.a_max, anchor.a))
        if raw.b == 0.0:
            params.b = anchor.b
        elif anchor.b > 0.0:
            low, high, centre = np.log10(cfg.b_min), np.log10(cfg.b_max), np.log10(anchor.b)
            params.b = float(10.0 ** _centered(raw.b, centre, min(low, centre), max(high, centre)))
        else:
            params.b = _centered(raw.b, 0.0, 0.0, cfg.b_max)
        params.c1 = anchor.c1 * (1.0 + cfg.c1_scale * raw.c1)
        params.step_beta = anchor.step_beta * (1.0 + raw.step_beta)
        for name in THETA2_FIELDS:
            reference = float(np.max(np.abs(getattr(anchor, name)), initial=0.0)) or 1.0
            setattr(params, name, getattr(anchor, name) + cfg.theta2_scale * reference * getattr(raw, name))
        if raw.x_delta is not None:
            params.x_delta = cfg.theta2_scale * pilot_scale * raw.x_delta
        return params

    def decode(self, env, state, vector):
        vector = np.asarray(vector, dtype=float)
        anchor, step = self.anchor(env, state)
        raw = self.codec.decode(np.clip(vector[1:], -1.0, 1.0))
        params = self.to_params(raw, anchor, float(np.mean(np.abs(env.pilot.x))))
        return LayerAction(payload=params, halting_score=float(vector[0]), beta_step=step)

    def apply(self, env, state, action):
        return unfolded_layer(state.sbl, action.payload, env.pilot, env.grid, env.geom, state.y)


@dataclass
class BlackBoxUpdate:
    weights: np.ndarray
    bias: np.ndarray


class BlackBoxTransition(Transition):
    """
    z' = z + scale * tanh(w * z_n + b) on z = [log alpha, log gamma, beta].

    z_n is z normalised to O(1); the action supplies the diagonal weights w and
    the bias b. Outputs are clamped to the SBL state domain.
    """

    def __init__(self, grid_size: int, log_scale: float = 10.0, alpha_step: float = 1.0,
                 gamma_step: float = 2.0, beta_fraction: float = 0.25):
        self.grid_size = grid_size
        self.state_dim = 1 + 2 * grid_size
        self.payload_dim = 2 * self.state_dim
        self.log_scale = log_scale
        self.alpha_step = alpha_step
        self.gamma_step = gamma_step
        self.beta_fraction = beta_fraction

    def decode(self, env, state, vector):
        vector = np.clip(np.asarray(vector, dtype=float), -1.0, 1.0)
        payload = vector[1:]
        update = BlackBoxUpdate(weights=payload[:self.state_dim], bias=payload[self.state_dim:])
        return LayerAction(payload=update, halting_score=float(np.asarray(vector)[0]), beta_step=None)

    def apply(self, env, state, action):
        sbl = state.sbl
        j = self.grid_size
        half = env.grid.resolution / 2.0
        z = np.concatenate([[np.log(sbl.alpha)], np.log(sbl.gamma), sbl.beta])
        normalised = np.concatenate([z[:1 + j] / self.log_scale, z[1 + j:] / half])
        scale = np.concatenate([[self.alpha_step], np.full(j, self.gamma_step),
                                np.full(j, self.beta_fraction * env.grid.resolution)])
        z_next = z + scale * np.tanh(action.payload.weights * normalised + action.payload.bias)

        log_floor, log_cap = np.log(ALPHA_FLOOR), np.log(PRECISION_CAP)
        alpha = float(np.exp(np.clip(z_next[0], log_floor, log_cap)))
        gamma = np.exp(np.clip(z_next[1:1 + j], np.log(GAMMA_FLOOR), log_cap))
        beta = env.grid.clip_beta(z_next[1 + j:])
        if env.grid.active is not None:
            beta[~env.grid.active] = 0.0
        return SblState(alpha=alpha, gamma=gamma, beta=beta, iter=sbl.iter + 1)


def describe(transition: Transition) -> Dict[str, Any]:
    if isinstance(transition, UnfoldedTransition):
        return {'kind': 'unfolded', 'codec_mode': transition.codec.mode,
                'trainable_pilot': transition.codec.trainable_pilot}
    return {'kind': 'blackbox'}
