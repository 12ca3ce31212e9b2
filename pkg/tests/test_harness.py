import json

import numpy as np
import pandas as pd
import pytest

from conftest import random_sample
from harness.commands import (
    apply_overrides,
    cli_blackbox,
    cli_evaluate,
    cli_generate,
    cli_run_sbl,
    cli_train,
    cli_zero_pad_eval,
    data_dir,
    run_dir,
)
from harness.config import ExperimentConfig, load_config, write_default_config
from harness.data import generate_datasets, load_split, observations_at_snr, split_seed
from harness.evaluation import (
    SCHEME_ADAPTIVE,
    SCHEME_BLACKBOX_ADAPTIVE,
    SCHEME_BLACKBOX_FIXED,
    SCHEME_FIXED,
    SCHEME_SBL,
    SCHEME_STANDARD,
    evaluate_policy,
    evaluate_sbl,
    map_samples,
    nearest_depth,
    ordering_report,
)
from harness.metrics import (
    CSV_COLUMNS,
    MetricsRow,
    depth_savings,
    format_histogram,
    halting_correlation,
    paired_win_rate,
    parse_histogram,
    read_metrics_csv,
    write_metrics_csv,
)
from harness.training import learning_rate_scale, load_trained, training_log_path, validate
from utils.errors import ConfigError, DimensionMismatchError


def _tiny_config(tmp_path, **overrides) -> ExperimentConfig:
    document = {
        'name': 'tiny',
        'output_dir': str(tmp_path),
        'channel': {'n_antennas': 8, 'grid_size': 16, 'pilot_length': 6, 'rays_min': 1, 'rays_max': 3},
        'dataset': {'train_size': 6, 'val_size': 3, 'test_size': 3, 'seed': 5},
        'sbl': {'max_iters': 30, 'track_evidence': False},
        'unfolding': {'codec_mode': 'diagonal'},
        'ddpg': {'actor_hidden': [16], 'critic_hidden': [16], 'halting_hidden': [8], 'batch_size': 4,
                 'warmup_transitions': 4, 'noise_decay_episodes': 4},
        'env': {'max_layers': 3},
        'training': {'episodes': 4, 'validation_period': 2, 'validation_samples': 2, 'seed': 3},
        'evaluation': {'epsilons': [0.1, 0.3], 'depths': [1, 2], 'snr_db_list': [10.0], 'grid_sizes': [16],
                       'pilot_lengths': [6], 'max_samples': 2},
    }
    document.update(overrides)
    return ExperimentConfig.model_validate(document)


def _row(nmse, layers, value=0, scheme='s'):
    return MetricsRow.from_samples(scheme, 'depth', value, [nmse], [layers])


# configuration

def test_default_configuration():
    config = load_config()
    assert config.channel.n_antennas == 32
    assert config.fixed_depths() == list(range(2, 16))
    assert config.sbl.track_evidence is False


def test_default_file_round_trips(tmp_path):
    path = write_default_config(tmp_path / 'config.json')
    assert load_config(path) == ExperimentConfig()


def test_invalid_configuration_raises(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'channel': {'rays_min': 9, 'rays_max': 2}}))
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text(json.dumps({'unknown_section': {}}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_discount_must_agree_between_agent_and_environment(tmp_path):
    config = ExperimentConfig()
    assert config.ddpg.discount == config.env.discount
    path = tmp_path / 'discount.json'
    path.write_text(json.dumps({'ddpg': {'discount': config.env.discount / 2}}))
    with pytest.raises(ConfigError, match='discount'):
        load_config(path)


def test_seed_overrides_follow_the_command(tmp_path):
    config = _tiny_config(tmp_path)
    assert apply_overrides(config, 'generate', 11).dataset.seed == 11
    assert apply_overrides(config, 'train', 12).training.seed == 12
    assert apply_overrides(config, 'evaluate', 13).evaluation.seed == 13
    assert apply_overrides(config, 'evaluate', None, '/elsewhere').output_dir == '/elsewhere'
    assert apply_overrides(config, 'evaluate') is config


def test_learning_rate_schedules(tmp_path):
    training = _tiny_config(tmp_path).training
    assert learning_rate_scale(training, 3) == 1.0
    decay = training.model_copy(update={'lr_schedule': 'decay', 'lr_decay_ratio': 0.01})
    assert learning_rate_scale(decay, 0) == pytest.approx(1.0)
    assert learning_rate_scale(decay, decay.episodes - 1) == pytest.approx(0.01)


# data

def test_dataset_generation_is_deterministic(tmp_path):
    config = _tiny_config(tmp_path)
    first, second = generate_datasets(config), generate_datasets(config)
    for split in ('train', 'val', 'test'):
        assert len(first[split]) == len(second[split])
        for a, b in zip(first[split].samples, second[split].samples):
            np.testing.assert_array_equal(a.h, b.h)
            np.testing.assert_array_equal(a.y, b.y)
    assert len({split_seed(config, split) for split in ('train', 'val', 'test')}) == 3
    assert all(1 <= s.n_rays <= 3 for s in first['train'].samples)


def test_reobservation_is_shared_and_seeded(tmp_path):
    config = _tiny_config(tmp_path)
    test = generate_datasets(config)['test']
    low = observations_at_snr(test, -5.0, 1)
    again = observations_at_snr(test, -5.0, 1)
    other = observations_at_snr(test, 10.0, 1)
    for a, b, c, original in zip(low, again, other, test.samples):
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.h, original.h)
        assert not np.allclose(a.y, c.y)


# metrics

def test_metrics_csv_layout(tmp_path):
    rows = [MetricsRow.from_samples(SCHEME_FIXED, 'depth', 3, [0.01, 0.03], [3, 3]),
            MetricsRow.from_samples(SCHEME_ADAPTIVE, 'epsilon', 0.1, [0.02, 0.02], [2, 4], seconds=1.5)]
    path = write_metrics_csv(rows, tmp_path / 'metrics.csv')
    frame = read_metrics_csv(path)
    assert list(frame.columns) == CSV_COLUMNS
    assert frame.loc[0, 'nmse_db'] == pytest.approx(10 * np.log10(0.02))
    assert frame.loc[1, 'histogram'] == '2:1;4:1'
    assert frame.loc[1, 'mean_layers'] == pytest.approx(3.0)
    assert frame.loc[1, 'seconds'] == pytest.approx(1.5)


def test_histogram_text_format():
    assert format_histogram({5: 2, 3: 1}) == '3:1;5:2'
    assert parse_histogram('3:1;5:2') == {3: 1, 5: 2}
    assert parse_histogram('') == {}


def test_paired_win_rate_and_correlation():
    assert paired_win_rate([0.1, 0.2, 0.3, 0.4], [0.2, 0.2, 0.1, 0.1]) == pytest.approx(0.5)
    assert np.isnan(paired_win_rate([], []))
    assert halting_correlation([0.1, 0.2, 0.3, 0.4], [1.0, 2.0, 5.0, 9.0]) == pytest.approx(1.0)
    assert np.isnan(halting_correlation([0.5, 0.5, 0.5], [1.0, 2.0, 3.0]))


def test_depth_savings_against_the_best_fixed_depth():
    fixed = [_row(0.1, 2, 2), _row(0.0105, 5, 5), _row(0.01, 8, 8)]
    adaptive = [_row(0.2, 1, 0.3), _row(0.0108, 3.5, 0.1)]
    summary = depth_savings(fixed, adaptive, tolerance_db=0.5)
    assert summary['best_fixed_nmse_db'] == pytest.approx(-20.0)
    assert summary['fixed_optimum_depth'] == 5
    assert summary['adaptive_mean_layers'] == pytest.approx(3.5)
    assert summary['depth_ratio'] == pytest.approx(0.7)
    assert depth_savings(fixed, [_row(0.5, 1)])['depth_ratio'] is None
    assert depth_savings([], adaptive) == {}


def test_nearest_depth_prefers_the_shallower_tie():
    rows = [_row(0.1, 2, 2), _row(0.1, 4, 4)]
    assert nearest_depth(rows, 3.0) == 2
    assert nearest_depth(rows, 3.6) == 4


def test_ordering_report_uses_per_sample_nmse():
    better = MetricsRow.from_samples(SCHEME_SBL, 'reference', 20, [0.1, 0.2, 0.05], [5, 5, 5])
    worse = MetricsRow.from_samples(SCHEME_STANDARD, 'reference', 20, [0.2, 0.1, 0.3], [5, 5, 5])
    assert ordering_report({'pair': (better, worse)}) == {'pair': pytest.approx(2 / 3)}


# worker pool

def test_map_samples_keeps_the_input_order():
    items = list(range(7))
    assert map_samples(abs, [-i for i in items], workers=3) == items
    assert map_samples(abs, [-4], workers=3) == [4]


def test_sbl_rows_do_not_depend_on_the_worker_count(geom, grid, pilot, hyper):
    samples = [random_sample(geom, pilot, seed) for seed in range(4)]
    hyper = hyper.model_copy(update={'max_iters': 20})
    for standard in (False, True):
        serial = evaluate_sbl(samples, pilot, grid, geom, hyper, 'reference', 20, standard=standard)
        pooled = evaluate_sbl(samples, pilot, grid, geom, hyper, 'reference', 20, standard=standard, workers=2)
        np.testing.assert_allclose(pooled.per_sample_nmse, serial.per_sample_nmse, rtol=1e-12)
        assert pooled.histogram == serial.histogram


# end to end

def test_generate_train_and_evaluate(tmp_path):
    config = _tiny_config(tmp_path)
    paths = cli_generate(config)
    assert set(paths) == {'train', 'val', 'test'}
    assert all(path.exists() for path in paths.values())

    report = cli_train(config)
    assert report.checkpoint_path.exists()
    assert len(report.returns) == 4
    assert np.isfinite(report.best_val_nmse)
    log = pd.read_csv(training_log_path(run_dir(config), 'unfolded'))
    assert len(log) == 4
    assert log['val_nmse'].notna().sum() == 2

    val = load_split(data_dir(config), 'val')
    agent, env, metadata = load_trained(report.checkpoint_path, val.pilot, val.grid, val.geometry)
    assert metadata['kind'] == 'unfolded'
    assert metadata['dims'] == [8, 6, 16]
    nmse, layers = validate(agent, env, val.samples[:config.training.validation_samples])
    assert nmse == pytest.approx(report.best_val_nmse, rel=1e-12)
    assert layers == pytest.approx(report.best_val_layers)

    serial, _ = evaluate_policy(agent, env, val.samples, SCHEME_ADAPTIVE, 'reference', 20)
    pooled, _ = evaluate_policy(agent, env, val.samples, SCHEME_ADAPTIVE, 'reference', 20, workers=2)
    np.testing.assert_allclose(pooled.per_sample_nmse, serial.per_sample_nmse, rtol=1e-12)
    assert pooled.histogram == serial.histogram

    rows = cli_evaluate(config)
    schemes = {row.scheme for row in rows}
    assert {SCHEME_ADAPTIVE, SCHEME_FIXED, SCHEME_SBL, SCHEME_STANDARD} <= schemes
    frame = read_metrics_csv(run_dir(config) / 'evaluation_metrics.csv')
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == len(rows)
    summary = json.loads((run_dir(config) / 'summary.json').read_text())
    assert summary['samples'] == 2
    assert set(summary['ordering']) == {'sbl_offgrid_vs_unfolding', 'sbl_offgrid_vs_standard',
                                        'unfolding_vs_standard'}


def test_sbl_baseline_sweeps(tmp_path):
    config = _tiny_config(tmp_path)
    cli_generate(config)
    rows = cli_run_sbl(config)
    sweeps = {(row.sweep_var, row.scheme) for row in rows}
    for sweep_var in ('reference', 'snr_db', 'grid_size', 'pilot_length'):
        assert (sweep_var, SCHEME_SBL) in sweeps
        assert (sweep_var, SCHEME_STANDARD) in sweeps
    assert all(1 <= row.mean_layers <= 30 for row in rows)
    assert (run_dir(config) / 'sbl_metrics.csv').exists()
    assert 'sbl_offgrid_vs_standard' in json.loads((run_dir(config) / 'sbl_summary.json').read_text())


def test_blackbox_and_zero_padding(tmp_path):
    config = _tiny_config(tmp_path)
    cli_generate(config)
    report = cli_train(config)

    rows = cli_blackbox(config)
    assert {row.scheme for row in rows} >= {SCHEME_BLACKBOX_ADAPTIVE, SCHEME_BLACKBOX_FIXED}
    assert (run_dir(config) / 'blackbox_agent.ckpt').exists()
    assert (run_dir(config) / 'blackbox_metrics.csv').exists()

    small = _tiny_config(tmp_path, channel={'n_antennas': 8, 'grid_size': 12, 'pilot_length': 4,
                                            'rays_min': 1, 'rays_max': 3})
    matched, padded = cli_zero_pad_eval(small, report.checkpoint_path)
    assert matched.sweep_value == 'T=6,J=16'
    assert padded.sweep_value == 'T=4,J=12'
    assert np.isfinite(padded.nmse) and np.isfinite(matched.nmse)
    summary = json.loads((run_dir(small) / 'zero_pad_summary.json').read_text())
    assert summary['trained_dims'] == [8, 6, 16]
    assert summary['gap_db'] == pytest.approx(padded.nmse_db - matched.nmse_db)

    wide = _tiny_config(tmp_path, channel={'n_antennas': 8, 'grid_size': 20, 'pilot_length': 4})
    with pytest.raises(DimensionMismatchError):
        cli_zero_pad_eval(wide, report.checkpoint_path)
