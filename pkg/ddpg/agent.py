"""
DDPG agent supplying per-layer parameters and halting scores

The action vector is [L_t, payload]: L_t comes from the halting network on the
residual slice of the state features and the payload is the tanh-squashed actor
output in [-1, 1].
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .halting import HaltingNet
from .mlp import Mlp, flat_gradients, soft_update
from .optim import AdamOptimizer
from .replay import Batch, ReplayBuffer

logger = logging.getLogger(__name__)


class DdpgConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    discount: float = Field(0.9, gt=0.0, lt=1.0)
    soft_tau: float = Field(0.005, gt=0.0, le=1.0)
    hard_update_period: Optional[int] = Field(None, ge=1, description="Copy mains into targets every N updates")
    batch_size: int = Field(64, ge=1)
    buffer_capacity: int = Field(100_000, ge=1)
    actor_lr: float = Field(1e-4, ge=0.0)
    critic_lr: float = Field(1e-3, ge=0.0)
    halting_lr: float = Field(1e-3, ge=0.0)
    noise_start: float = Field(0.3, ge=0.0)
    noise_end: float = Field(0.02, ge=0.0)
    noise_decay_episodes: int = Field(1000, ge=1)
    update_period: int = Field(1, ge=1, description="Environment steps between gradient updates")
    warmup_transitions: int = Field(256, ge=0)
    actor_hidden: List[int] = Field(default_factory=lambda: [256, 256, 256])
    critic_hidden: List[int] = Field(default_factory=lambda: [256, 256, 256])
    halting_hidden: List[int] = Field(default_factory=lambda: [64, 64], description="Hidden widths; the sigmoid head adds one layer")
    halting_weight: float = Field(1.0, ge=0.0)


class DdpgAgent:
    def __init__(self, config: DdpgConfig, actor: Mlp, critic: Mlp, halting: HaltingNet,
                 halting_slice: Tuple[int, int], rho: float, rng: np.random.Generator,
                 target_actor: Optional[Mlp] = None, target_critic: Optional[Mlp] = None):
        self.config = config
        self.actor = actor
        self.critic = critic
        self.halting = halting
        self.target_actor = target_actor if target_actor is not None else actor.copy()
        self.target_critic = target_critic if target_critic is not None else critic.copy()
        self.halting_slice = tuple(halting_slice)
        self.rho = rho
        self.buffer = ReplayBuffer(config.buffer_capacity, rng)
        self.noise_sigma = config.noise_start
        self.updates = 0
        self.actor_optimizer = AdamOptimizer(actor.parameters(), config.actor_lr)
        self.critic_optimizer = AdamOptimizer(critic.parameters(), config.critic_lr)
        self.halting_optimizer = AdamOptimizer(halting.net.parameters(), config.halting_lr)

        if self.target_actor.layer_sizes != actor.layer_sizes or self.target_critic.layer_sizes != critic.layer_sizes:
            raise ValueError("target networks must match their mains")

    @classmethod
    def build(cls, config: DdpgConfig, state_dim: int, payload_dim: int, halting_slice: Tuple[int, int],
              rho: float, rng: np.random.Generator) -> 'DdpgAgent':
        actor = Mlp.build([state_dim, *config.actor_hidden, payload_dim],
                          ['relu'] * len(config.actor_hidden) + ['tanh'], rng)
        critic = Mlp.build([state_dim + 1 + payload_dim, *config.critic_hidden, 1],
                           ['relu'] * len(config.critic_hidden) + ['identity'], rng)
        halting = HaltingNet.build(halting_slice[1] - halting_slice[0], config.halting_hidden, rng)
        logger.info(f"Built DDPG agent: state {state_dim}, payload {payload_dim}, halting input {halting.input_dim}")
        return cls(config, actor, critic, halting, halting_slice, rho, rng)

    @property
    def state_dim(self) -> int:
        return self.actor.input_dim

    @property
    def payload_dim(self) -> int:
        return self.actor.output_dim

    @property
    def action_dim(self) -> int:
        return 1 + self.payload_dim

    def halting_features(self, states: np.ndarray) -> np.ndarray:
        start, stop = self.halting_slice
        return states[..., start:stop]

    def set_noise_for_episode(self, episode: int) -> float:
        """Linear decay from noise_start to noise_end"""
        progress = min(1.0, episode / self.config.noise_decay_episodes)
        self.noise_sigma = self.config.noise_start + progress * (self.config.noise_end - self.config.noise_start)
        return self.noise_sigma

    def set_learning_rate_scale(self, scale: float) -> None:
        self.actor_optimizer.lr = self.config.actor_lr * scale
        self.critic_optimizer.lr = self.config.critic_lr * scale
        self.halting_optimizer.lr = self.config.halting_lr * scale

    def is_finite(self) -> bool:
        return all(net.is_finite() for net in (self.actor, self.critic, self.target_actor,
                                               self.target_critic, self.halting.net))


def actor_act(agent: DdpgAgent, state_features: np.ndarray, explore: bool,
              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    if state_features.shape[-1] != agent.state_dim:
        raise ValueError(f"state has {state_features.shape[-1]} features, agent expects {agent.state_dim}")
    payload, _ = agent.actor.forward(state_features)
    if explore and agent.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("exploration needs a random generator")
        payload = payload + rng.normal(0.0, agent.noise_sigma, size=payload.shape)
    payload = np.clip(payload, -1.0, 1.0)
    score = agent.halting.score_features(agent.halting_features(state_features))
    return np.concatenate([np.atleast_1d(score), payload], axis=-1)


def _policy_actions(agent: DdpgAgent, actor: Mlp, states: np.ndarray):
    payload, cache = actor.forward(states)
    scores = agent.halting.score_features(agent.halting_features(states))
    return np.concatenate([scores[:, None], payload], axis=1), cache


def critic_update(agent: DdpgAgent, batch: Batch) -> float:
    """One step on mean (Q(s, a) - r - discount (1 - done) Q'(s', mu'(s')))^2; returns the pre-step loss"""
    if len(batch) == 0:
        raise ValueError("empty batch")
    next_actions, _ = _policy_actions(agent, agent.target_actor, batch.next_states)
    next_q, _ = agent.target_critic.forward(np.concatenate([batch.next_states, next_actions], axis=1))
    targets = batch.rewards + agent.config.discount * (1.0 - batch.dones) * next_q[:, 0]

    q, cache = agent.critic.forward(np.concatenate([batch.states, batch.actions], axis=1))
    diff = q[:, 0] - targets
    loss = float(np.mean(diff ** 2))
    _, grads = agent.critic.backward(cache, (2.0 * diff / len(batch))[:, None])
    agent.critic_optimizer.step(flat_gradients(grads))
    return loss


def actor_update(agent: DdpgAgent, batch: Batch) -> float:
    """One ascent step on mean Q(s, mu(s)) through the critic's action input; returns the pre-step objective"""
    if len(batch) == 0:
        raise ValueError("empty batch")
    actions, actor_cache = _policy_actions(agent, agent.actor, batch.states)
    q, critic_cache = agent.critic.forward(np.concatenate([batch.states, actions], axis=1))
    objective = float(np.mean(q))

    d_input, _ = agent.critic.backward(critic_cache, -np.ones_like(q) / len(batch))
    d_payload = d_input[:, agent.state_dim + 1:]
    _, grads = agent.actor.backward(actor_cache, d_payload)
    agent.actor_optimizer.step(flat_gradients(grads))

    if agent.config.halting_weight > 0.0:
        halting_update(agent, batch)
    return objective


def halting_update(agent: DdpgAgent, batch: Batch) -> Optional[float]:
    """Supervised step on the halting cost for transitions that carry an error target"""
    known = np.isfinite(batch.errors)
    if not np.any(known):
        return None
    features = agent.halting_features(batch.states[known])
    return agent.halting.fit_step(features, batch.errors[known], agent.rho, agent.config.halting_weight,
                                  agent.halting_optimizer)


def update_targets(agent: DdpgAgent) -> None:
    agent.updates += 1
    period = agent.config.hard_update_period
    tau = 1.0 if (period is not None and agent.updates % period == 0) else agent.config.soft_tau
    soft_update(agent.actor, agent.target_actor, tau)
    soft_update(agent.critic, agent.target_critic, tau)
