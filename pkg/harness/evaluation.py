"""
Evaluation sweeps and baselines

Every scheme in a sweep sees the same per-sample observations, so per-sample
NMSE vectors can be compared pairwise. Greedy rollouts and SBL runs draw no
randomness, so fanning samples out over a process pool returns the same rows
as the sequential loop.
"""

import logging
import time
from functools import partial
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from channel.dataset_io import Dataset
from channel.generator import ChannelSample, PilotMatrix, generate_pilots, resample_observation
from channel.geometry import ArrayGeometry, Grid
from ddpg.agent import DdpgAgent
from environment.mdp import ChannelEstimationEnv, EpisodeTrace
from sbl.solver import run_sbl, run_standard_sbl
from sbl.types import SblHyper, SblResult
from utils.rng import make_rng, spawn_rngs
from .data import observations_at_snr
from .metrics import MetricsRow, depth_savings, halting_correlation, paired_win_rate

logger = logging.getLogger(__name__)

SCHEME_ADAPTIVE = 'DDPG Unfolding/Adaptive'
SCHEME_FIXED = 'Unfolding/Fixed'
SCHEME_TWO_DEPTH = 'Unfolding/Two-depth'
SCHEME_SBL = 'SBL Off-grid'
SCHEME_STANDARD = 'Standard SBL'
SCHEME_BLACKBOX_ADAPTIVE = 'DDPG Black-box/Adaptive'
SCHEME_BLACKBOX_FIXED = 'Black-box/Fixed'

Item = TypeVar('Item')
Out = TypeVar('Out')


class _Stopwatch:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.started = 0.0

    def __enter__(self) -> '_Stopwatch':
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self.started if self.enabled else 0.0


def map_samples(func: Callable[[Item], Out], items: Sequence[Item], workers: int = 1) -> List[Out]:
    """func over items in order; workers > 1 spreads them over a process pool"""
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with Pool(processes=min(workers, len(items))) as pool:
        return pool.map(func, items)


def _greedy_rollout(env: ChannelEstimationEnv, agent: DdpgAgent, fixed_depth: Optional[int],
                    sample: ChannelSample) -> EpisodeTrace:
    return env.rollout(agent, sample, explore=False, fixed_depth=fixed_depth)


def _greedy_rollout_at(env: ChannelEstimationEnv, agent: DdpgAgent,
                       job: Tuple[ChannelSample, int]) -> EpisodeTrace:
    sample, depth = job
    return env.rollout(agent, sample, explore=False, fixed_depth=depth)


def _solve(standard: bool, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, hyper: SblHyper,
           sample: ChannelSample) -> SblResult:
    solver = run_standard_sbl if standard else run_sbl
    return solver(sample, pilot, grid, geom, hyper)


def with_epsilon(env: ChannelEstimationEnv, epsilon: float) -> ChannelEstimationEnv:
    config = env.config.model_copy(update={'epsilon': epsilon})
    return ChannelEstimationEnv(env.pilot, env.grid, env.geom, env.hyper, config, env.transition)


def evaluate_policy(agent: DdpgAgent, env: ChannelEstimationEnv, samples: Sequence[ChannelSample], scheme: str,
                    sweep_var: str, sweep_value: Any, fixed_depth: Optional[int] = None,
                    record_wall_time: bool = False, workers: int = 1) -> Tuple[MetricsRow, List[EpisodeTrace]]:
    """Greedy rollouts; adaptive halting unless fixed_depth forces done at t = fixed_depth"""
    with _Stopwatch(record_wall_time) as watch:
        traces = map_samples(partial(_greedy_rollout, env, agent, fixed_depth), samples, workers)
    row = MetricsRow.from_samples(scheme, sweep_var, sweep_value,
                                  [trace.final_nmse for trace in traces],
                                  [trace.layers_used for trace in traces], watch.elapsed)
    logger.debug(f"{scheme} {sweep_var}={sweep_value}: {row.nmse_db:.2f} dB, {row.mean_layers:.2f} layers")
    return row, traces


def evaluate_sbl(samples: Sequence[ChannelSample], pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                 hyper: SblHyper, sweep_var: str, sweep_value: Any, standard: bool = False,
                 record_wall_time: bool = False, workers: int = 1) -> MetricsRow:
    """Iterative baseline run to convergence; the histogram counts iterations"""
    with _Stopwatch(record_wall_time) as watch:
        results = map_samples(partial(_solve, standard, pilot, grid, geom, hyper), samples, workers)
    return MetricsRow.from_samples(SCHEME_STANDARD if standard else SCHEME_SBL, sweep_var, sweep_value,
                                   [result.nmse for result in results],
                                   [result.iters_used for result in results], watch.elapsed)


def epsilon_sweep(agent: DdpgAgent, env: ChannelEstimationEnv, samples: Sequence[ChannelSample],
                  epsilons: Sequence[float], scheme: str = SCHEME_ADAPTIVE, record_wall_time: bool = False,
                  workers: int = 1) -> Tuple[List[MetricsRow], Dict[float, List[EpisodeTrace]]]:
    rows, traces = [], {}
    for epsilon in sorted(epsilons):
        row, traces[epsilon] = evaluate_policy(agent, with_epsilon(env, epsilon), samples, scheme,
                                               'epsilon', epsilon, record_wall_time=record_wall_time,
                                               workers=workers)
        rows.append(row)
    return rows, traces


def depth_sweep(agent: DdpgAgent, env: ChannelEstimationEnv, samples: Sequence[ChannelSample],
                depths: Sequence[int], scheme: str = SCHEME_FIXED, record_wall_time: bool = False,
                workers: int = 1) -> List[MetricsRow]:
    return [evaluate_policy(agent, env, samples, scheme, 'depth', depth, fixed_depth=depth,
                            record_wall_time=record_wall_time, workers=workers)[0]
            for depth in depths]


def snr_sweep(agent: DdpgAgent, env: ChannelEstimationEnv, dataset: Dataset, snr_db_list: Sequence[float],
              seed: int, scheme: str = SCHEME_ADAPTIVE, max_samples: Optional[int] = None,
              record_wall_time: bool = False, workers: int = 1) -> List[MetricsRow]:
    rows = []
    for snr_db in snr_db_list:
        samples = observations_at_snr(dataset, snr_db, seed)[:max_samples]
        rows.append(evaluate_policy(agent, env, samples, scheme, 'snr_db', snr_db,
                                    record_wall_time=record_wall_time, workers=workers)[0])
    return rows


def sbl_snr_sweep(dataset: Dataset, hyper: SblHyper, snr_db_list: Sequence[float], seed: int,
                  max_samples: Optional[int] = None, record_wall_time: bool = False,
                  workers: int = 1) -> List[MetricsRow]:
    rows = []
    for snr_db in snr_db_list:
        samples = observations_at_snr(dataset, snr_db, seed)[:max_samples]
        for standard in (False, True):
            rows.append(evaluate_sbl(samples, dataset.pilot, dataset.grid, dataset.geometry, hyper,
                                     'snr_db', snr_db, standard=standard, record_wall_time=record_wall_time,
                                     workers=workers))
        logger.info(f"SBL baselines at {snr_db} dB: {rows[-2].nmse_db:.2f} / {rows[-1].nmse_db:.2f} dB")
    return rows


def sbl_grid_sweep(dataset: Dataset, hyper: SblHyper, grid_sizes: Sequence[int],
                   samples: Sequence[ChannelSample], record_wall_time: bool = False,
                   workers: int = 1) -> List[MetricsRow]:
    """The observations do not depend on the grid, so every size reuses them"""
    rows = []
    for size in grid_sizes:
        grid = Grid.uniform(size)
        for standard in (False, True):
            rows.append(evaluate_sbl(samples, dataset.pilot, grid, dataset.geometry, hyper, 'grid_size', size,
                                     standard=standard, record_wall_time=record_wall_time, workers=workers))
    return rows


def sbl_pilot_sweep(dataset: Dataset, hyper: SblHyper, pilot_lengths: Sequence[int], snr_db: float, seed: int,
                    samples: Sequence[ChannelSample], record_wall_time: bool = False,
                    workers: int = 1) -> List[MetricsRow]:
    """Fresh pilots of each length; the channels are re-observed through them"""
    rows = []
    for length in pilot_lengths:
        pilot = generate_pilots(length, dataset.geometry, dataset.pilot.power, make_rng([seed, length]))
        streams = spawn_rngs([seed, length, 1], len(samples))
        observed = [resample_observation(sample, pilot, snr_db, rng) for sample, rng in zip(samples, streams)]
        for standard in (False, True):
            rows.append(evaluate_sbl(observed, pilot, dataset.grid, dataset.geometry, hyper, 'pilot_length',
                                     length, standard=standard, record_wall_time=record_wall_time,
                                     workers=workers))
    return rows


def two_depth_recipe(agent: DdpgAgent, env: ChannelEstimationEnv, samples: Sequence[ChannelSample], depth: int,
                     ray_threshold: int, record_wall_time: bool = False, workers: int = 1) -> MetricsRow:
    """
    Fixed depth keyed on the ray count: depth - 1 layers for samples with at
    most ray_threshold rays, depth + 1 above it.
    """
    jobs = [(sample, depth + 1 if sample.n_rays > ray_threshold else max(1, depth - 1)) for sample in samples]
    with _Stopwatch(record_wall_time) as watch:
        traces = map_samples(partial(_greedy_rollout_at, env, agent), jobs, workers)
    return MetricsRow.from_samples(SCHEME_TWO_DEPTH, 'depth', depth, [t.final_nmse for t in traces],
                                   [t.layers_used for t in traces], watch.elapsed)


def nearest_depth(rows: Sequence[MetricsRow], mean_layers: float) -> int:
    """Fixed depth closest to a mean layer count (ties go to the shallower depth)"""
    return int(min(rows, key=lambda row: (abs(row.mean_layers - mean_layers), row.mean_layers)).sweep_value)


def layers_by_rays(traces: Sequence[EpisodeTrace], samples: Sequence[ChannelSample]) -> Dict[int, float]:
    """Mean layers used per ray count"""
    groups: Dict[int, List[int]] = {}
    for trace, sample in zip(traces, samples):
        groups.setdefault(sample.n_rays, []).append(trace.layers_used)
    return {rays: float(np.mean(layers)) for rays, layers in sorted(groups.items())}


def halting_statistics(traces: Sequence[EpisodeTrace]) -> Dict[str, Any]:
    """Spearman correlation of halting scores with sqrt(error) over every visited state"""
    scores = np.concatenate([trace.halting_scores for trace in traces]) if traces else np.zeros(0)
    errors = np.concatenate([trace.errors for trace in traces]) if traces else np.zeros(0)
    return {
        'spearman': halting_correlation(scores, np.sqrt(np.maximum(errors, 0.0))),
        'states': int(scores.size),
    }


def ordering_report(pairs: Dict[str, Tuple[MetricsRow, MetricsRow]]) -> Dict[str, float]:
    """Paired win-rate of the first row over the second for every named comparison"""
    report = {}
    for name, (better, worse) in pairs.items():
        if better.per_sample_nmse is None or worse.per_sample_nmse is None:
            continue
        report[name] = paired_win_rate(better.per_sample_nmse, worse.per_sample_nmse)
    return report


def adaptive_summary(fixed_rows: List[MetricsRow], adaptive_rows: List[MetricsRow],
                     traces: Sequence[EpisodeTrace], samples: Sequence[ChannelSample],
                     tolerance_db: float = 0.5) -> Dict[str, Any]:
    histogram = {}
    for trace in traces:
        histogram[trace.layers_used] = histogram.get(trace.layers_used, 0) + 1
    return {
        'depth_savings': depth_savings(fixed_rows, adaptive_rows, tolerance_db),
        'mean_layers_by_epsilon': {str(row.sweep_value): row.mean_layers for row in adaptive_rows},
        'mean_layers_by_rays': {str(k): v for k, v in layers_by_rays(traces, samples).items()},
        'distinct_depths': len(histogram),
        'halting': halting_statistics(traces),
    }

