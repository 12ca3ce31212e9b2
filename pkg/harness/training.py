"""
DDPG training loop shared by the unfolded and black-box agents
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from channel.dataset_io import Dataset
from channel.generator import ChannelSample, PilotMatrix
from channel.geometry import ArrayGeometry, Grid
from ddpg.agent import DdpgAgent, actor_update, critic_update, update_targets
from ddpg.checkpoint import load_checkpoint, save_checkpoint
from environment.mdp import ChannelEstimationEnv
from environment.transitions import BlackBoxTransition, Transition, UnfoldedTransition, describe
from unfolding.codec import ParamCodec
from utils.errors import CheckpointFormatError, DimensionMismatchError, TrainingDivergenceError
from utils.rng import spawn_rngs
from .config import ExperimentConfig, TrainingConfig

logger = logging.getLogger(__name__)

AgentKind = Literal['unfolded', 'blackbox']


@dataclass
class TrainingReport:
    kind: str
    episodes: int
    best_episode: int
    best_val_nmse: float
    best_val_layers: float
    checkpoint_path: Path
    log_path: Path
    returns: List[float] = field(default_factory=list)

    def return_trend(self) -> Tuple[float, float]:
        """Mean episode return over the first and the last tenth of training"""
        returns = np.asarray(self.returns, dtype=float)
        if returns.size == 0:
            return float('nan'), float('nan')
        decile = max(1, returns.size // 10)
        return float(np.mean(returns[:decile])), float(np.mean(returns[-decile:]))


def build_transition(config: ExperimentConfig, kind: AgentKind, dims: Tuple[int, int, int]) -> Transition:
    if kind == 'unfolded':
        codec = ParamCodec(config.unfolding.codec_mode, dims, config.unfolding.trainable_pilot)
        return UnfoldedTransition(codec, config.unfolding)
    if kind == 'blackbox':
        return BlackBoxTransition(dims[2])
    raise ValueError(f"unknown agent kind {kind!r}")


def build_environment(config: ExperimentConfig, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                      kind: AgentKind = 'unfolded') -> ChannelEstimationEnv:
    transition = build_transition(config, kind, (geom.n_antennas, pilot.length, grid.size))
    return ChannelEstimationEnv(pilot, grid, geom, config.sbl, config.env, transition)


def dataset_environment(config: ExperimentConfig, dataset: Dataset, kind: AgentKind = 'unfolded') -> ChannelEstimationEnv:
    return build_environment(config, dataset.pilot, dataset.grid, dataset.geometry, kind)


def build_agent(config: ExperimentConfig, env: ChannelEstimationEnv, rng: np.random.Generator) -> DdpgAgent:
    return DdpgAgent.build(config.ddpg, env.state_dim, env.payload_dim, env.halting_slice, config.env.rho, rng)


def learning_rate_scale(training: TrainingConfig, episode: int) -> float:
    """1 for the constant schedule; geometric decay to lr_decay_ratio otherwise"""
    if training.lr_schedule == 'constant':
        return 1.0
    progress = min(1.0, episode / max(training.episodes - 1, 1))
    return float(training.lr_decay_ratio ** progress)


def validate(agent: DdpgAgent, env: ChannelEstimationEnv, samples: Sequence[ChannelSample]) -> Tuple[float, float]:
    """Greedy rollouts; (mean NMSE, mean layers used)"""
    traces = [env.rollout(agent, sample, explore=False) for sample in samples]
    return (float(np.mean([trace.final_nmse for trace in traces])),
            float(np.mean([trace.layers_used for trace in traces])))


def checkpoint_path(output_dir: Union[str, Path], kind: AgentKind) -> Path:
    return Path(output_dir) / f"{kind}_agent.ckpt"


def training_log_path(output_dir: Union[str, Path], kind: AgentKind) -> Path:
    return Path(output_dir) / f"{kind}_training_log.csv"


def _check_finite(agent: DdpgAgent, episode: int, **values: float) -> None:
    bad = {name: value for name, value in values.items() if value is not None and not np.isfinite(value)}
    if bad or not agent.is_finite():
        detail = ', '.join(f"{name}={value}" for name, value in bad.items()) or 'non-finite network weights'
        raise TrainingDivergenceError(f"training diverged at episode {episode}: {detail}")


def train_agent(config: ExperimentConfig, train: Dataset, val: Optional[Dataset], output_dir: Union[str, Path],
                kind: AgentKind = 'unfolded') -> TrainingReport:
    """
    Run config.training.episodes exploration episodes, updating after each.

    Every validation_period episodes (and after the last one) the greedy policy
    is scored on the validation samples; the best agent by validation NMSE is
    kept as the checkpoint. The per-episode log goes to CSV.
    """
    if not train.samples:
        raise ValueError("training needs at least one sample")
    training = config.training
    env = dataset_environment(config, train, kind)
    init_rng, buffer_rng, explore_rng, pick_rng = spawn_rngs(training.seed, 4)
    agent = build_agent(config, env, init_rng)
    agent.buffer.rng = buffer_rng

    source = val if val is not None and val.samples else train
    val_samples = source.samples[:training.validation_samples]
    ckpt = checkpoint_path(output_dir, kind)
    log_path = training_log_path(output_dir, kind)

    best = (float('inf'), float('nan'), -1)
    returns, rows = [], []
    env_steps = 0
    logger.info(f"Training {kind} agent for {training.episodes} episodes on {len(train)} samples")

    for episode in range(training.episodes):
        noise = agent.set_noise_for_episode(episode)
        lr_scale = learning_rate_scale(training, episode)
        agent.set_learning_rate_scale(lr_scale)

        sample = train.samples[int(pick_rng.integers(len(train.samples)))]
        trace = env.rollout(agent, sample, explore=True, rng=explore_rng)
        critic_loss, actor_objective = None, None
        for transition in trace.transitions:
            agent.buffer.push(transition)
            env_steps += 1
            if len(agent.buffer) < agent.config.warmup_transitions or env_steps % agent.config.update_period:
                continue
            for _ in range(training.updates_per_step):
                batch = agent.buffer.sample(agent.config.batch_size)
                critic_loss = critic_update(agent, batch)
                actor_objective = actor_update(agent, batch)
                update_targets(agent)
        _check_finite(agent, episode, episode_return=trace.discounted_return, critic_loss=critic_loss,
                      actor_objective=actor_objective)
        returns.append(trace.discounted_return)

        row = {
            'episode': episode,
            'return': trace.discounted_return,
            'layers': trace.layers_used,
            'final_nmse': trace.final_nmse,
            'critic_loss': np.nan if critic_loss is None else critic_loss,
            'actor_objective': np.nan if actor_objective is None else actor_objective,
            'noise_sigma': noise,
            'lr_scale': lr_scale,
            'val_nmse': np.nan,
            'val_mean_layers': np.nan,
        }

        if (episode + 1) % training.validation_period == 0 or episode + 1 == training.episodes:
            val_nmse, val_layers = validate(agent, env, val_samples)
            row['val_nmse'], row['val_mean_layers'] = val_nmse, val_layers
            logger.info(f"episode {episode + 1}: validation NMSE {10 * np.log10(val_nmse):.2f} dB, "
                        f"mean layers {val_layers:.2f}")
            if val_nmse < best[0]:
                best = (val_nmse, val_layers, episode)
                save_checkpoint(agent, ckpt, checkpoint_metadata(config, env, kind, episode, val_nmse, val_layers))
        rows.append(row)

    log_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(log_path, index=False, float_format='%.10g')
    logger.info(f"Best validation NMSE {best[0]:.4e} at episode {best[2] + 1}; log written to {log_path}")
    return TrainingReport(kind=kind, episodes=training.episodes, best_episode=best[2], best_val_nmse=best[0],
                          best_val_layers=best[1], checkpoint_path=ckpt, log_path=log_path, returns=returns)


def checkpoint_metadata(config: ExperimentConfig, env: ChannelEstimationEnv, kind: AgentKind, episode: int,
                        val_nmse: float, val_layers: float) -> Dict[str, Any]:
    return {
        'kind': kind,
        'transition': describe(env.transition),
        'dims': [env.geom.n_antennas, env.pilot.length, env.grid.size],
        'episode': episode,
        'val_nmse': val_nmse,
        'val_mean_layers': val_layers,
        'config': json.loads(config.model_dump_json()),
    }


def load_trained(path: Union[str, Path], pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                 config: Optional[ExperimentConfig] = None) -> Tuple[DdpgAgent, ChannelEstimationEnv, Dict[str, Any]]:
    """
    Agent plus an environment over the given pilot and grid.

    The environment reuses the configuration stored with the checkpoint unless
    `config` is given; its dimensions must match the trained ones.
    """
    agent, metadata = load_checkpoint(path)
    try:
        kind = metadata['kind']
        stored = ExperimentConfig.model_validate(metadata['config'])
    except (KeyError, ValueError) as e:
        raise CheckpointFormatError(f"checkpoint {path} lacks training metadata: {e}") from e
    env = build_environment(config or stored, pilot, grid, geom, kind)
    if (env.state_dim, env.payload_dim) != (agent.state_dim, agent.payload_dim):
        raise DimensionMismatchError(
            f"checkpoint expects state/payload dims {(agent.state_dim, agent.payload_dim)}, "
            f"environment has {(env.state_dim, env.payload_dim)}")
    return agent, env, metadata
