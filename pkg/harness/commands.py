"""
Command implementations behind run_experiments.py

Each command reads and writes under the run directory
<output_dir>/<config name>/, with datasets in its data/ subdirectory.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from channel.generator import pad_observation
from channel.geometry import ArrayGeometry
from ddpg.checkpoint import load_checkpoint
from utils.errors import CheckpointFormatError, DimensionMismatchError
from .config import ExperimentConfig
from .data import generate_datasets, generate_split, load_split, limit_samples, make_pilot, write_datasets
from .evaluation import (
    SCHEME_ADAPTIVE,
    SCHEME_BLACKBOX_ADAPTIVE,
    SCHEME_BLACKBOX_FIXED,
    SCHEME_FIXED,
    adaptive_summary,
    depth_sweep,
    epsilon_sweep,
    evaluate_policy,
    evaluate_sbl,
    nearest_depth,
    ordering_report,
    sbl_grid_sweep,
    sbl_pilot_sweep,
    sbl_snr_sweep,
    snr_sweep,
    two_depth_recipe,
)
from .metrics import MetricsRow, write_metrics_csv
from .training import TrainingReport, checkpoint_path, load_trained, train_agent

logger = logging.getLogger(__name__)

REFERENCE = 'reference'


def run_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / config.name


def data_dir(config: ExperimentConfig) -> Path:
    return run_dir(config) / 'data'


def apply_overrides(config: ExperimentConfig, command: str, seed: Optional[int] = None,
                    output_dir: Optional[str] = None) -> ExperimentConfig:
    """--seed reseeds the stage a command owns; --output-dir replaces output_dir"""
    update: Dict[str, Any] = {}
    if output_dir:
        update['output_dir'] = output_dir
    if seed is not None:
        if command == 'generate':
            update['dataset'] = config.dataset.model_copy(update={'seed': seed})
        elif command in ('train', 'blackbox'):
            update['training'] = config.training.model_copy(update={'seed': seed})
        else:
            update['evaluation'] = config.evaluation.model_copy(update={'seed': seed})
    return config.model_copy(update=update) if update else config


def write_summary(summary: Dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + '\n')
    logger.info(f"Wrote summary to {path}")
    return path


def cli_generate(config: ExperimentConfig) -> Dict[str, Path]:
    datasets = generate_datasets(config)
    paths = write_datasets(datasets, data_dir(config))
    logger.info(f"Datasets written to {data_dir(config)}")
    return paths


def cli_run_sbl(config: ExperimentConfig) -> List[MetricsRow]:
    """SBL Off-grid and Standard SBL over the SNR, grid-size and pilot-length sweeps"""
    evaluation = config.evaluation
    test = load_split(data_dir(config), 'test')
    samples = limit_samples(test.samples, evaluation.max_samples)
    timing = evaluation.record_wall_time
    workers = evaluation.workers

    rows = [evaluate_sbl(samples, test.pilot, test.grid, test.geometry, config.sbl, REFERENCE,
                         config.dataset.eval_snr_db, standard=standard, record_wall_time=timing, workers=workers)
            for standard in (False, True)]
    rows += sbl_snr_sweep(test, config.sbl, evaluation.snr_db_list, evaluation.seed,
                          evaluation.max_samples, timing, workers)
    rows += sbl_grid_sweep(test, config.sbl, evaluation.grid_sizes, samples, timing, workers)
    rows += sbl_pilot_sweep(test, config.sbl, evaluation.pilot_lengths, config.dataset.eval_snr_db,
                            evaluation.seed, samples, timing, workers)
    write_metrics_csv(rows, run_dir(config) / 'sbl_metrics.csv')
    write_summary(ordering_report({'sbl_offgrid_vs_standard': (rows[0], rows[1])}),
                  run_dir(config) / 'sbl_summary.json')
    return rows


def cli_train(config: ExperimentConfig, kind: str = 'unfolded') -> TrainingReport:
    train = load_split(data_dir(config), 'train')
    val = load_split(data_dir(config), 'val')
    report = train_agent(config, train, val, run_dir(config), kind)
    first, last = report.return_trend()
    logger.info(f"Episode return moved from {first:.4f} (first decile) to {last:.4f} (last decile)")
    return report


def _agent_rows(config: ExperimentConfig, ckpt: Union[str, Path], adaptive_scheme: str,
                fixed_scheme: str) -> Tuple[List[MetricsRow], Dict[str, Any], MetricsRow]:
    """Reference, epsilon, depth and SNR rows for one trained agent plus its adaptive summary"""
    evaluation = config.evaluation
    test = load_split(data_dir(config), 'test')
    samples = limit_samples(test.samples, evaluation.max_samples)
    agent, env, _ = load_trained(ckpt, test.pilot, test.grid, test.geometry)
    timing = evaluation.record_wall_time
    workers = evaluation.workers

    reference, traces = evaluate_policy(agent, env, samples, adaptive_scheme, REFERENCE,
                                        config.dataset.eval_snr_db, record_wall_time=timing, workers=workers)
    eps_rows, _ = epsilon_sweep(agent, env, samples, evaluation.epsilons, adaptive_scheme, timing, workers)
    depths = [d for d in config.fixed_depths() if d <= env.config.max_layers]
    fixed_rows = depth_sweep(agent, env, samples, depths, fixed_scheme, timing, workers)
    snr_rows = snr_sweep(agent, env, test, evaluation.snr_db_list, evaluation.seed, adaptive_scheme,
                         evaluation.max_samples, timing, workers)

    rows = [reference, *eps_rows, *fixed_rows, *snr_rows]
    summary = adaptive_summary(fixed_rows, eps_rows, traces, samples)
    if fixed_rows:
        depth = nearest_depth(fixed_rows, reference.mean_layers)
        rows.append(two_depth_recipe(agent, env, samples, depth, evaluation.ray_threshold, timing, workers))
    return rows, summary, reference


def cli_evaluate(config: ExperimentConfig, checkpoint: Optional[Union[str, Path]] = None) -> List[MetricsRow]:
    """
    Adaptive and fixed-depth sweeps for the unfolded agent, the SBL baselines
    on the same samples, and the black-box agent when its checkpoint exists.
    """
    ckpt = Path(checkpoint) if checkpoint else checkpoint_path(run_dir(config), 'unfolded')
    rows, adaptive, reference = _agent_rows(config, ckpt, SCHEME_ADAPTIVE, SCHEME_FIXED)

    test = load_split(data_dir(config), 'test')
    samples = limit_samples(test.samples, config.evaluation.max_samples)
    offgrid, standard = (evaluate_sbl(samples, test.pilot, test.grid, test.geometry, config.sbl, REFERENCE,
                                      config.dataset.eval_snr_db, standard=flag,
                                      record_wall_time=config.evaluation.record_wall_time,
                                      workers=config.evaluation.workers)
                         for flag in (False, True))
    rows += [offgrid, standard]
    pairs = {
        'sbl_offgrid_vs_unfolding': (offgrid, reference),
        'sbl_offgrid_vs_standard': (offgrid, standard),
        'unfolding_vs_standard': (reference, standard),
    }

    blackbox_ckpt = checkpoint_path(run_dir(config), 'blackbox')
    if blackbox_ckpt.exists():
        blackbox_rows, _, blackbox_reference = _agent_rows(config, blackbox_ckpt, SCHEME_BLACKBOX_ADAPTIVE,
                                                           SCHEME_BLACKBOX_FIXED)
        rows += blackbox_rows
        pairs['unfolding_vs_blackbox'] = (reference, blackbox_reference)

    write_metrics_csv(rows, run_dir(config) / 'evaluation_metrics.csv')
    write_summary({'checkpoint': str(ckpt), 'samples': len(samples), 'adaptive': adaptive,
                   'ordering': ordering_report(pairs)},
                  run_dir(config) / 'summary.json')
    return rows


def cli_blackbox(config: ExperimentConfig) -> List[MetricsRow]:
    """Black-box agent trained under the unfolded agent's episode budget, then evaluated"""
    report = cli_train(config, kind='blackbox')
    rows, adaptive, _ = _agent_rows(config, report.checkpoint_path, SCHEME_BLACKBOX_ADAPTIVE,
                                    SCHEME_BLACKBOX_FIXED)
    write_metrics_csv(rows, run_dir(config) / 'blackbox_metrics.csv')
    write_summary({'checkpoint': str(report.checkpoint_path), 'adaptive': adaptive},
                  run_dir(config) / 'blackbox_summary.json')
    return rows


def cli_zero_pad_eval(config: ExperimentConfig, checkpoint: Union[str, Path]) -> List[MetricsRow]:
    """
    Evaluate a trained agent on a smaller system (`config`) by zero-padding the
    pilots, observations and grid up to the trained dimensions.

    The agent is also scored on a test set generated at its trained dimensions,
    and the NMSE gap between the two is written to zero_pad_summary.json.
    """
    _, metadata = load_checkpoint(checkpoint)
    try:
        trained = ExperimentConfig.model_validate(metadata['config'])
        n, t, j = (int(d) for d in metadata['dims'])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"checkpoint {checkpoint} lacks training metadata: {e}") from e
    channel = config.channel
    if channel.n_antennas != n:
        raise DimensionMismatchError(f"zero padding keeps the array size: trained on N={n}, got N={channel.n_antennas}")
    if channel.pilot_length > t or channel.grid_size > j:
        raise DimensionMismatchError(
            f"smaller system (T={channel.pilot_length}, J={channel.grid_size}) exceeds trained (T={t}, J={j})")

    pilot = make_pilot(config)
    small = generate_split(config, pilot, 'test', config.dataset.test_size, [config.dataset.eval_snr_db])
    samples = [pad_observation(s, t) for s in limit_samples(small.samples, config.evaluation.max_samples)]
    geom = ArrayGeometry(n_antennas=n, spacing_ratio=channel.spacing_ratio)
    agent, env, _ = load_trained(checkpoint, pilot.padded(t), small.grid.padded(j), geom, trained)
    padded_row, _ = evaluate_policy(agent, env, samples, SCHEME_ADAPTIVE, 'zero_pad',
                                    f"T={channel.pilot_length},J={channel.grid_size}",
                                    record_wall_time=config.evaluation.record_wall_time,
                                    workers=config.evaluation.workers)

    matched_config = trained.model_copy(update={'dataset': config.dataset, 'evaluation': config.evaluation})
    matched_pilot = make_pilot(matched_config)
    matched = generate_split(matched_config, matched_pilot, 'test', config.dataset.test_size,
                             [config.dataset.eval_snr_db])
    agent, env, _ = load_trained(checkpoint, matched_pilot, matched.grid, matched.geometry, trained)
    matched_row, _ = evaluate_policy(agent, env, limit_samples(matched.samples, config.evaluation.max_samples),
                                     SCHEME_ADAPTIVE, 'zero_pad', f"T={t},J={j}",
                                     record_wall_time=config.evaluation.record_wall_time,
                                     workers=config.evaluation.workers)

    rows = [matched_row, padded_row]
    write_metrics_csv(rows, run_dir(config) / 'zero_pad_metrics.csv')
    write_summary({'trained_dims': [n, t, j], 'evaluated_dims': [n, channel.pilot_length, channel.grid_size],
                   'matched_nmse_db': matched_row.nmse_db, 'padded_nmse_db': padded_row.nmse_db,
                   'gap_db': padded_row.nmse_db - matched_row.nmse_db},
                  run_dir(config) / 'zero_pad_summary.json')
    return rows
