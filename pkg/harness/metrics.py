"""
Metrics rows, CSV output and summary statistics
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['scheme', 'sweep_var', 'sweep_value', 'nmse_db', 'mean_layers', 'histogram', 'seconds']


def nmse_db(value: float) -> float:
    return float(10.0 * np.log10(value)) if value > 0 else float('-inf')


def layer_histogram(layers: Iterable[int]) -> Dict[int, int]:
    return dict(sorted(Counter(int(v) for v in layers).items()))


def format_histogram(histogram: Dict[int, int]) -> str:
    """"depth:count;depth:count" in increasing depth"""
    return ';'.join(f"{depth}:{count}" for depth, count in sorted(histogram.items()))


def parse_histogram(text: str) -> Dict[int, int]:
    if not isinstance(text, str) or not text:
        return {}
    pairs = (item.split(':') for item in text.split(';'))
    return {int(depth): int(count) for depth, count in pairs}


@dataclass
class MetricsRow:
    scheme: str
    sweep_var: str
    sweep_value: Any
    nmse: float
    mean_layers: float
    histogram: Dict[int, int] = field(default_factory=dict)
    seconds: float = 0.0
    per_sample_nmse: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def nmse_db(self) -> float:
        return nmse_db(self.nmse)

    @classmethod
    def from_samples(cls, scheme: str, sweep_var: str, sweep_value: Any, nmses: Sequence[float],
                     layers: Sequence[int], seconds: float = 0.0) -> 'MetricsRow':
        nmses = np.asarray(nmses, dtype=float)
        return cls(
            scheme=scheme,
            sweep_var=sweep_var,
            sweep_value=sweep_value,
            nmse=float(np.mean(nmses)) if nmses.size else float('nan'),
            mean_layers=float(np.mean(layers)) if len(layers) else float('nan'),
            histogram=layer_histogram(layers),
            seconds=seconds,
            per_sample_nmse=nmses,
        )

    def to_record(self) -> Dict[str, Any]:
        return {
            'scheme': self.scheme,
            'sweep_var': self.sweep_var,
            'sweep_value': self.sweep_value,
            'nmse_db': self.nmse_db,
            'mean_layers': self.mean_layers,
            'histogram': format_histogram(self.histogram),
            'seconds': self.seconds,
        }


def rows_to_frame(rows: List[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_record() for row in rows], columns=CSV_COLUMNS)


def write_metrics_csv(rows: List[MetricsRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_to_frame(rows).to_csv(path, index=False, float_format='%.10g')
    logger.info(f"Wrote {len(rows)} metrics rows to {path}")
    return path


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def paired_win_rate(better: Sequence[float], worse: Sequence[float]) -> float:
    """Fraction of paired samples where `better` is no larger than `worse`"""
    better, worse = np.asarray(better, dtype=float), np.asarray(worse, dtype=float)
    if better.size == 0 or better.shape != worse.shape:
        return float('nan')
    return float(np.mean(better <= worse))


def halting_correlation(scores: Sequence[float], errors: Sequence[float]) -> float:
    """Spearman rank correlation between halting scores and reconstruction errors"""
    scores, errors = np.asarray(scores, dtype=float), np.asarray(errors, dtype=float)
    if scores.size < 3 or np.ptp(scores) == 0 or np.ptp(errors) == 0:
        return float('nan')
    rho, _ = spearmanr(scores, errors)
    return float(rho)


def depth_savings(fixed_rows: List[MetricsRow], adaptive_rows: List[MetricsRow],
                  tolerance_db: float = 0.5) -> Dict[str, Any]:
    """
    Compare adaptive depth against the best fixed depth.

    The fixed optimum is the shallowest depth within tolerance_db of the best
    fixed NMSE; the matched adaptive row is the one with the fewest mean layers
    among those within tolerance_db of the best fixed NMSE.
    """
    if not fixed_rows or not adaptive_rows:
        return {}
    best_db = min(row.nmse_db for row in fixed_rows)
    near = [row for row in fixed_rows if row.nmse_db <= best_db + tolerance_db]
    fixed_opt = min(near, key=lambda row: row.mean_layers)
    matched = [row for row in adaptive_rows if row.nmse_db <= best_db + tolerance_db]
    summary = {
        'best_fixed_nmse_db': best_db,
        'fixed_optimum_depth': fixed_opt.mean_layers,
        'fixed_optimum_nmse_db': fixed_opt.nmse_db,
        'tolerance_db': tolerance_db,
    }
    if matched:
        adaptive = min(matched, key=lambda row: row.mean_layers)
        summary.update({
            'adaptive_sweep_value': adaptive.sweep_value,
            'adaptive_mean_layers': adaptive.mean_layers,
            'adaptive_nmse_db': adaptive.nmse_db,
            'depth_ratio': adaptive.mean_layers / fixed_opt.mean_layers,
        })
    else:
        summary['depth_ratio'] = None
    return summary
