"""
Halting-score networks and the halting cost

The score L_t tracks the reconstruction error of the current estimate. The
cost sum_t e_t / L_t + rho L_t is minimised at L_t = sqrt(e_t / rho).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .mlp import Mlp, flat_gradients
from .optim import AdamOptimizer

logger = logging.getLogger(__name__)

SCORE_FLOOR = 1e-12
SCORE_CEILING = 1.0 - 1e-12
# scores are clamped here before differentiating e / L
GRADIENT_FLOOR = 1e-4


def residual_features(residual: np.ndarray) -> np.ndarray:
    residual = np.asarray(residual)
    if np.iscomplexobj(residual):
        return np.concatenate([residual.real, residual.imag], axis=-1)
    return residual.astype(float)


class HaltingNet:
    """r fully-connected layers with a sigmoid head on the residual (re, im)"""

    def __init__(self, net: Mlp):
        if net.activations[-1] != 'sigmoid' or net.output_dim != 1:
            raise ValueError("a halting network needs a single sigmoid output")
        self.net = net

    @classmethod
    def build(cls, input_dim: int, hidden: Sequence[int], rng: np.random.Generator) -> 'HaltingNet':
        sizes = [input_dim, *hidden, 1]
        activations = ['relu'] * len(hidden) + ['sigmoid']
        return cls(Mlp.build(sizes, activations, rng, final_scale=None))

    @property
    def input_dim(self) -> int:
        return self.net.input_dim

    def score_features(self, features: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(features)
        return np.clip(out[..., 0], SCORE_FLOOR, SCORE_CEILING)

    def score(self, residual: np.ndarray) -> float:
        return float(self.score_features(residual_features(residual)))

    def fit_step(self, features: np.ndarray, errors: np.ndarray, rho: float, weight: float,
                 optimizer: AdamOptimizer) -> float:
        """One descent step on weight * mean(e / L + rho L); returns the pre-step mean cost"""
        out, cache = self.net.forward(features)
        scores = np.clip(out[:, 0], GRADIENT_FLOOR, SCORE_CEILING)
        cost = float(np.mean(errors / scores + rho * scores))
        d_scores = weight * halting_cost_gradient(errors, scores, rho) / errors.size
        _, grads = self.net.backward(cache, d_scores[:, None])
        optimizer.step(flat_gradients(grads))
        return cost


@dataclass
class SingleLayerHalting:
    """L = sigmoid(p1 ||Q r||^2 + p2)"""
    q: np.ndarray
    p1: float
    p2: float

    def score(self, residual: np.ndarray) -> float:
        projected = self.q @ np.asarray(residual)
        energy = float(np.real(np.vdot(projected, projected)))
        return float(np.clip(expit(self.p1 * energy + self.p2), SCORE_FLOOR, SCORE_CEILING))


def halting_score(hnet: Union[HaltingNet, SingleLayerHalting], residual: np.ndarray) -> float:
    return hnet.score(residual)


def _check_costs(errors, scores) -> Tuple[np.ndarray, np.ndarray]:
    errors = np.asarray(errors, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if errors.shape != scores.shape:
        raise ValueError(f"{errors.size} errors but {scores.size} scores")
    if np.any(scores <= 0.0):
        raise ValueError("halting scores must be strictly positive")
    return errors, scores


def halting_cost(errors, scores, rho: float) -> float:
    """sum_t e_t / L_t + rho L_t"""
    errors, scores = _check_costs(errors, scores)
    return float(np.sum(errors / scores + rho * scores))


def halting_cost_gradient(errors, scores, rho: float) -> np.ndarray:
    """d cost / d L_t = -e_t / L_t^2 + rho"""
    errors, scores = _check_costs(errors, scores)
    return -errors / scores ** 2 + rho
