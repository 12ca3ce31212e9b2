"""
Dataset generation for the train / validation / test splits
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from channel.dataset_io import Dataset, read_dataset, write_dataset
from channel.generator import ChannelSample, PilotMatrix, generate_pilots, make_sample, resample_observation
from utils.rng import make_rng, spawn_rngs
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')


def split_seed(config: ExperimentConfig, split: str) -> int:
    """Disjoint per-split seeds derived from the dataset seed"""
    return config.dataset.seed * 10 + 1 + SPLITS.index(split)


def make_pilot(config: ExperimentConfig) -> PilotMatrix:
    channel = config.channel
    return generate_pilots(channel.pilot_length, channel.geometry(), channel.pilot_power,
                           make_rng(config.dataset.seed * 10))


def generate_split(config: ExperimentConfig, pilot: PilotMatrix, split: str, size: int,
                   snr_choices: Sequence[float]) -> Dataset:
    channel = config.channel
    geom = channel.geometry()
    seed = split_seed(config, split)
    samples = []
    for rng in spawn_rngs(seed, size):
        n_rays = int(rng.integers(channel.rays_min, channel.rays_max + 1))
        snr_db = float(snr_choices[int(rng.integers(len(snr_choices)))])
        samples.append(make_sample(geom, pilot, n_rays, snr_db, rng, gain_var=channel.gain_var,
                                   angle_spread=channel.angle_spread, max_clusters=channel.max_clusters))
    logger.info(f"Generated {size} {split} samples (seed {seed})")
    return Dataset(geometry=geom, grid=channel.grid(), pilot=pilot, seed=seed, samples=samples)


def generate_datasets(config: ExperimentConfig) -> Dict[str, Dataset]:
    pilot = make_pilot(config)
    sizes = {'train': config.dataset.train_size, 'val': config.dataset.val_size, 'test': config.dataset.test_size}
    snrs = {'train': config.dataset.train_snr_db, 'val': [config.dataset.eval_snr_db],
            'test': [config.dataset.eval_snr_db]}
    return {split: generate_split(config, pilot, split, sizes[split], snrs[split]) for split in SPLITS}


def dataset_path(data_dir: Union[str, Path], split: str) -> Path:
    return Path(data_dir) / f"{split}.ds"


def write_datasets(datasets: Dict[str, Dataset], data_dir: Union[str, Path]) -> Dict[str, Path]:
    return {split: write_dataset(dataset, dataset_path(data_dir, split)) for split, dataset in datasets.items()}


def load_split(data_dir: Union[str, Path], split: str) -> Dataset:
    return read_dataset(dataset_path(data_dir, split))


def observations_at_snr(dataset: Dataset, snr_db: float, seed: int) -> List[ChannelSample]:
    """Same channels observed afresh at snr_db; identical for every scheme evaluated on them"""
    streams = spawn_rngs([seed, int(round((snr_db + 1000.0) * 1000))], len(dataset.samples))
    return [resample_observation(sample, dataset.pilot, snr_db, rng) for sample, rng in zip(dataset.samples, streams)]


def limit_samples(samples: List[ChannelSample], limit) -> List[ChannelSample]:
    return samples if limit is None else samples[:limit]


def dataset_matches(dataset: Dataset, config: ExperimentConfig) -> bool:
    channel = config.channel
    return (dataset.geometry.n_antennas == channel.n_antennas and dataset.grid.size == channel.grid_size
            and dataset.pilot.length == channel.pilot_length)


def sample_ray_counts(samples: List[ChannelSample]) -> np.ndarray:
    return np.array([sample.n_rays for sample in samples])
