"""
Fully-connected networks with manual backpropagation

Each layer computes y = act(x @ W + b) on row-major batches.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

ACTIVATIONS = ('tanh', 'relu', 'sigmoid', 'identity')


def _activate(kind: str, pre: np.ndarray) -> np.ndarray:
    if kind == 'tanh':
        return np.tanh(pre)
    if kind == 'relu':
        return np.maximum(pre, 0.0)
    if kind == 'sigmoid':
        return expit(pre)
    return pre


def _activation_grad(kind: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if kind == 'tanh':
        return 1.0 - out ** 2
    if kind == 'relu':
        return (pre > 0.0).astype(float)
    if kind == 'sigmoid':
        return out * (1.0 - out)
    return np.ones_like(pre)


@dataclass
class Mlp:
    layer_sizes: List[int]
    activations: List[str]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("need one activation per layer")
        for kind in self.activations:
            if kind not in ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        for idx, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[idx], self.layer_sizes[idx + 1])
            if weight.shape != expected or bias.shape != (expected[1],):
                raise ValueError(f"layer {idx} has weight {weight.shape} / bias {bias.shape}, expected {expected}")

    @classmethod
    def build(cls, layer_sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator,
              final_scale: Optional[float] = 3e-3) -> 'Mlp':
        """
        Uniform fan-in initialisation; the last layer draws from +-final_scale so
        initial outputs stay near zero.
        """
        sizes = [int(s) for s in layer_sizes]
        weights, biases = [], []
        for idx in range(len(sizes) - 1):
            last = idx == len(sizes) - 2
            bound = final_scale if (last and final_scale is not None) else 1.0 / np.sqrt(sizes[idx])
            weights.append(rng.uniform(-bound, bound, size=(sizes[idx], sizes[idx + 1])))
            biases.append(rng.uniform(-bound, bound, size=sizes[idx + 1]))
        return cls(layer_sizes=sizes, activations=list(activations), weights=weights, biases=biases)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]]:
        single = np.ndim(x) == 1
        out = np.atleast_2d(np.asarray(x, dtype=float))
        cache = []
        for weight, bias, kind in zip(self.weights, self.biases, self.activations):
            pre = out @ weight + bias
            nxt = _activate(kind, pre)
            cache.append((out, pre, nxt))
            out = nxt
        return (out[0] if single else out), cache

    def backward(self, cache, dy: np.ndarray) -> Tuple[np.ndarray, Dict[str, List[np.ndarray]]]:
        single = np.ndim(dy) == 1
        grad = np.atleast_2d(np.asarray(dy, dtype=float))
        weight_grads: List[np.ndarray] = [None] * len(self.weights)
        bias_grads: List[np.ndarray] = [None] * len(self.biases)
        for idx in reversed(range(len(self.weights))):
            inp, pre, out = cache[idx]
            grad = grad * _activation_grad(self.activations[idx], pre, out)
            weight_grads[idx] = inp.T @ grad
            bias_grads[idx] = grad.sum(axis=0)
            grad = grad @ self.weights[idx].T
        dx = grad[0] if single else grad
        return dx, {'weights': weight_grads, 'biases': bias_grads}

    def copy(self) -> 'Mlp':
        return Mlp(
            layer_sizes=list(self.layer_sizes),
            activations=list(self.activations),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


def flat_gradients(grads: Dict[str, List[np.ndarray]]) -> List[np.ndarray]:
    """Gradients in the same order as Mlp.parameters()"""
    return [*grads['weights'], *grads['biases']]


def mlp_forward(net: Any, x: np.ndarray):
    return net.forward(x)


def mlp_backward(net: Any, cache, dy: np.ndarray):
    return net.backward(cache, dy)


def soft_update(main: Mlp, target: Mlp, tau: float) -> None:
    """target <- tau * main + (1 - tau) * target, in place"""
    for source, dest in zip(main.parameters(), target.parameters()):
        if source.shape != dest.shape:
            raise ValueError(f"cannot blend parameters of shape {source.shape} into {dest.shape}")
        dest *= (1.0 - tau)
        dest += tau * source
