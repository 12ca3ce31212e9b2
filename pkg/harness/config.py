"""
Experiment configuration documents

Configs are JSON files validated by pydantic. Every field has a desk-scale
default; `write_default_config` produces the reference file.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from channel.geometry import ArrayGeometry, Grid
from ddpg.agent import DdpgConfig
from environment.mdp import EnvConfig
from sbl.types import SblHyper
from unfolding.config import UnfoldingConfig
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

DESK_STEP_BETA = 5e-8


class ChannelConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    n_antennas: int = Field(32, ge=1)
    spacing_ratio: float = Field(0.5, gt=0.0)
    grid_size: int = Field(64, ge=2)
    pilot_length: int = Field(16, ge=1)
    pilot_power: float = Field(1.0, gt=0.0)
    gain_var: float = Field(1.0, gt=0.0)
    angle_spread_deg: float = Field(2.0, ge=0.0)
    rays_min: int = Field(3, ge=1)
    rays_max: int = Field(8, ge=1)
    max_clusters: int = Field(4, ge=1)

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(n_antennas=self.n_antennas, spacing_ratio=self.spacing_ratio)

    def grid(self) -> Grid:
        return Grid.uniform(self.grid_size)

    @property
    def angle_spread(self) -> float:
        return float(np.deg2rad(self.angle_spread_deg))


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    train_size: int = Field(2000, ge=0)
    val_size: int = Field(200, ge=0)
    test_size: int = Field(200, ge=0)
    train_snr_db: List[float] = Field(default_factory=lambda: [20.0], description="Each training sample draws its SNR from this list")
    eval_snr_db: float = 20.0
    seed: int = 2024


class TrainingConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    episodes: int = Field(3000, ge=1)
    updates_per_step: int = Field(1, ge=1)
    validation_period: int = Field(100, ge=1)
    validation_samples: int = Field(50, ge=1)
    lr_schedule: Literal['constant', 'decay'] = 'constant'
    lr_decay_ratio: float = Field(1e-2, gt=0.0, le=1.0, description="Final / initial learning rate for the decay schedule")
    seed: int = 7


class EvaluationConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    epsilons: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3])
    depths: Optional[List[int]] = Field(None, description="Fixed depths; defaults to 2..max_layers")
    snr_db_list: List[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0])
    grid_sizes: List[int] = Field(default_factory=lambda: [32, 64, 128])
    pilot_lengths: List[int] = Field(default_factory=lambda: [8, 16, 24])
    max_samples: Optional[int] = Field(None, ge=1)
    ray_threshold: int = Field(5, ge=1, description="Two-depth recipe: samples above this many rays get the deeper policy")
    record_wall_time: bool = False
    workers: int = Field(1, ge=1, description="Processes that share the per-sample rollouts and SBL runs")
    seed: int = 99


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    name: str = 'desk'
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    # fixed beta step sized for the default 32-antenna array and 16-symbol pilots
    sbl: SblHyper = Field(default_factory=lambda: SblHyper(track_evidence=False, step_beta=DESK_STEP_BETA))
    unfolding: UnfoldingConfig = Field(default_factory=UnfoldingConfig)
    ddpg: DdpgConfig = Field(default_factory=DdpgConfig)
    env: EnvConfig = Field(default_factory=EnvConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    output_dir: str = 'runs'

    @model_validator(mode='after')
    def _consistent(self) -> 'ExperimentConfig':
        if self.ddpg.discount != self.env.discount:
            raise ValueError(f"ddpg.discount ({self.ddpg.discount}) and env.discount ({self.env.discount}) must match")
        if self.channel.rays_min > self.channel.rays_max:
            raise ValueError("channel.rays_min must not exceed channel.rays_max")
        if not self.dataset.train_snr_db:
            raise ValueError("dataset.train_snr_db must not be empty")
        if not self.evaluation.snr_db_list:
            raise ValueError("evaluation.snr_db_list must not be empty")
        if any(not 0.0 < eps < 1.0 for eps in self.evaluation.epsilons):
            raise ValueError("evaluation.epsilons must lie in (0, 1)")
        if self.evaluation.depths and any(d < 1 for d in self.evaluation.depths):
            raise ValueError("evaluation.depths must be positive")
        return self

    def fixed_depths(self) -> List[int]:
        if self.evaluation.depths:
            return sorted(set(self.evaluation.depths))
        return list(range(2, self.env.max_layers + 1))


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        return ExperimentConfig.model_validate_json(path.read_text())
    except ValidationError as e:
        raise ConfigError(f"invalid configuration {path}: {e}") from e


def write_default_config(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = json.loads(ExperimentConfig().model_dump_json())
    path.write_text(json.dumps(document, indent=2) + '\n')
    logger.info(f"Wrote default configuration to {path}")
    return path
