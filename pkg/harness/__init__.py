"""
Harness Package for Off-Grid Channel Estimation
Provides experiment configuration, datasets, training, evaluation sweeps and metrics
"""

from .config import (
    ChannelConfig,
    DatasetConfig,
    TrainingConfig,
    EvaluationConfig,
    ExperimentConfig,
    load_config,
    write_default_config,
)
from .metrics import MetricsRow, CSV_COLUMNS, write_metrics_csv, depth_savings
from .training import TrainingReport, train_agent, load_trained
from .commands import (
    apply_overrides,
    cli_generate,
    cli_run_sbl,
    cli_train,
    cli_evaluate,
    cli_blackbox,
    cli_zero_pad_eval,
)

__all__ = [
    'ChannelConfig',
    'DatasetConfig',
    'TrainingConfig',
    'EvaluationConfig',
    'ExperimentConfig',
    'load_config',
    'write_default_config',
    'MetricsRow',
    'CSV_COLUMNS',
    'write_metrics_csv',
    'depth_savings',
    'TrainingReport',
    'train_agent',
    'load_trained',
    'apply_overrides',
    'cli_generate',
    'cli_run_sbl',
    'cli_train',
    'cli_evaluate',
    'cli_blackbox',
    'cli_zero_pad_eval',
]

__version__ = '1.0.0'
