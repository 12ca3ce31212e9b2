"""
Channel-estimation MDP

A state is the SBL iterate plus the residual y - X h_t; one step applies one
layer. Episodes stop at the first step whose halting score satisfies the
stopping rule, or after max_layers steps.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from channel.generator import ChannelSample, PilotMatrix
from channel.geometry import ArrayGeometry, Grid
from ddpg.agent import DdpgAgent, actor_act
from ddpg.halting import SCORE_FLOOR
from ddpg.replay import Transition as ReplayTransition
from ddpg.reward import compute_reward
from sbl.posterior import initial_state
from sbl.solver import nmse
from sbl.types import SblHyper, SblState
from sbl.updates import reconstruct_channel, select_support
from .transitions import LayerAction, Transition, UnfoldedTransition

logger = logging.getLogger(__name__)


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    max_layers: int = Field(15, ge=1)
    epsilon: float = Field(0.1, gt=0.0, lt=1.0, description="Stop once the halting score is <= epsilon")
    eta_pen: float = Field(1e-3, ge=0.0, description="Per-layer reward penalty")
    rho: float = Field(1.0, ge=0.0)
    lambda_halt: float = Field(0.01, ge=0.0)
    discount: float = Field(0.9, gt=0.0, lt=1.0)
    halting_mode: Literal['score', 'indicator'] = 'score'
    tau_threshold: float = Field(0.5, gt=0.0, lt=1.0, description="Indicator mode continues while tau > threshold")
    normalize_halting_error: bool = True
    gamma_log_clip: float = Field(30.0, gt=0.0)

    def halts(self, score: float) -> bool:
        if self.halting_mode == 'indicator':
            return score <= self.tau_threshold
        return score <= self.epsilon


@dataclass
class EnvState:
    sbl: SblState
    y: np.ndarray
    residual: np.ndarray
    h_hat: np.ndarray
    t: int
    features: np.ndarray
    beta_step: Optional[float] = None


@dataclass
class StepRecord:
    features: np.ndarray
    action: Optional[np.ndarray]
    reward: float
    halting_score: float
    error: float
    nmse: float
    done: bool


@dataclass
class EpisodeTrace:
    steps: List[StepRecord] = field(default_factory=list)
    transitions: List[ReplayTransition] = field(default_factory=list)
    initial_nmse: float = float('nan')
    final_nmse: float = float('nan')
    discounted_return: float = 0.0

    @property
    def layers_used(self) -> int:
        return len(self.steps)

    @property
    def total_reward(self) -> float:
        return float(sum(step.reward for step in self.steps))

    @property
    def halting_scores(self) -> np.ndarray:
        return np.array([step.halting_score for step in self.steps])

    @property
    def errors(self) -> np.ndarray:
        """Halting targets of the visited states, one per step"""
        return np.array([step.error for step in self.steps])


Policy = Callable[['ChannelEstimationEnv', EnvState, bool, Optional[np.random.Generator]],
                  Union[np.ndarray, LayerAction]]


def agent_policy(agent: DdpgAgent) -> Policy:
    def act(env, state, explore, rng):
        return actor_act(agent, state.features, explore, rng)
    return act


def plain_sbl_policy(env: 'ChannelEstimationEnv', state: EnvState, explore: bool,
                     rng: Optional[np.random.Generator]) -> LayerAction:
    """Greedy policy replaying plain SBL iterations; never asks to halt"""
    if not isinstance(env.transition, UnfoldedTransition):
        raise TypeError("the plain SBL policy needs an unfolded transition")
    return env.transition.plain_action(env, state, halting_score=1.0)


class ChannelEstimationEnv:
    def __init__(self, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, hyper: SblHyper, config: EnvConfig,
                 transition: Transition):
        self.pilot = pilot
        self.grid = grid
        self.geom = geom
        self.hyper = hyper
        self.config = config
        self.transition = transition

    @property
    def state_dim(self) -> int:
        return 1 + 2 * self.grid.size + 2 * self.pilot.length

    @property
    def halting_slice(self) -> Tuple[int, int]:
        start = 1 + 2 * self.grid.size
        return start, start + 2 * self.pilot.length

    @property
    def payload_dim(self) -> int:
        return self.transition.payload_dim

    def features(self, sbl: SblState, residual: np.ndarray, y: np.ndarray) -> np.ndarray:
        """[log alpha, clip(log gamma), beta, re(residual) / ||y||, im(residual) / ||y||]"""
        norm = float(np.linalg.norm(y)) or 1.0
        clip = self.config.gamma_log_clip
        return np.concatenate([
            [np.log(sbl.alpha)],
            np.clip(np.log(sbl.gamma), -clip, clip),
            sbl.beta,
            residual.real / norm,
            residual.imag / norm,
        ])

    def _estimate(self, sbl: SblState, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        support = select_support(sbl.gamma, self.hyper.support_ratio, self.hyper.gamma_cap, self.grid.active_mask)
        h_hat = reconstruct_channel(self.grid, self.geom, sbl.beta, support, self.pilot, y)
        return h_hat, y - self.pilot.x @ h_hat

    def halting_error(self, h_hat: np.ndarray, h: np.ndarray) -> float:
        if self.config.normalize_halting_error:
            return nmse(h_hat, h)
        diff = h_hat - h
        return float(np.vdot(diff, diff).real)

    def reset(self, sample: ChannelSample) -> EnvState:
        y = sample.y
        sbl = initial_state(y, self.grid.size)
        h_hat, residual = self._estimate(sbl, y)
        return EnvState(sbl=sbl, y=y, residual=residual, h_hat=h_hat, t=0,
                        features=self.features(sbl, residual, y))

    def decode(self, state: EnvState, action: Union[np.ndarray, LayerAction]) -> LayerAction:
        if isinstance(action, LayerAction):
            return action
        action = np.asarray(action, dtype=float)
        if action.shape != (1 + self.payload_dim,):
            raise ValueError(f"action has shape {action.shape}, expected ({1 + self.payload_dim},)")
        return self.transition.decode(self, state, action)

    def step(self, state: EnvState, action: Union[np.ndarray, LayerAction], sample: ChannelSample,
             fixed_depth: Optional[int] = None) -> Tuple[EnvState, float, bool, StepRecord]:
        """
        Apply one layer. The true channel only enters the reward and the
        returned record; the done flag depends on the halting score alone.
        """
        layer_action = self.decode(state, action)
        score = float(layer_action.halting_score)

        sbl_next = self.transition.apply(self, state, layer_action)
        h_next, residual = self._estimate(sbl_next, state.y)
        next_state = EnvState(
            sbl=sbl_next, y=state.y, residual=residual, h_hat=h_next, t=state.t + 1,
            features=self.features(sbl_next, residual, state.y),
            beta_step=layer_action.beta_step if layer_action.beta_step is not None else state.beta_step,
        )

        nmse_prev = nmse(state.h_hat, sample.h)
        nmse_cur = nmse(h_next, sample.h)
        error = self.halting_error(state.h_hat, sample.h)
        halt_term = error / max(score, SCORE_FLOOR) + self.config.rho * score
        reward = compute_reward(nmse_prev, nmse_cur, self.config.eta_pen, halt_term, self.config.lambda_halt)

        if fixed_depth is not None:
            done = next_state.t >= fixed_depth
        else:
            done = self.config.halts(score) or next_state.t >= self.config.max_layers

        record = StepRecord(
            features=state.features,
            action=None if isinstance(action, LayerAction) else np.asarray(action, dtype=float),
            reward=reward,
            halting_score=score,
            error=error,
            nmse=nmse_cur,
            done=done,
        )
        return next_state, reward, done, record

    def rollout(self, policy: Union[DdpgAgent, Policy], sample: ChannelSample, explore: bool = False,
                rng: Optional[np.random.Generator] = None, fixed_depth: Optional[int] = None) -> EpisodeTrace:
        if isinstance(policy, DdpgAgent):
            policy = agent_policy(policy)
        state = self.reset(sample)
        trace = EpisodeTrace(initial_nmse=nmse(state.h_hat, sample.h))
        discount = 1.0
        limit = fixed_depth if fixed_depth is not None else self.config.max_layers

        for _ in range(limit):
            action = policy(self, state, explore, rng)
            next_state, reward, done, record = self.step(state, action, sample, fixed_depth=fixed_depth)
            trace.steps.append(record)
            trace.discounted_return += discount * reward
            discount *= self.config.discount
            if record.action is not None:
                trace.transitions.append(ReplayTransition(
                    s=state.features, a=record.action, r=reward, s_next=next_state.features,
                    done=done, error=record.error,
                ))
            state = next_state
            if done:
                break

        trace.final_nmse = nmse(state.h_hat, sample.h)
        return trace


def rollout(agent: Any, sample: ChannelSample, env: ChannelEstimationEnv, explore: bool = False,
            rng: Optional[np.random.Generator] = None) -> EpisodeTrace:
    return env.rollout(agent, sample, explore=explore, rng=rng)
