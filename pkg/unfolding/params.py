"""
Trainable parameters of one unfolded SBL layer
"""

from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

from utils.errors import DimensionMismatchError


@dataclass
class LayerParams:
    """
    Theta_1 = {a, b, c1, step_beta} and Theta_2 = {W1, W2, O1, o2, b1, b2, b3}.

    x_delta is the optional pilot refinement used as X + x_delta inside the layer.
    """
    a: float
    b: float
    c1: np.ndarray
    step_beta: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    o1: np.ndarray
    o2: np.ndarray
    x_delta: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, n: int, t: int, j: int, trainable_pilot: bool = False) -> 'LayerParams':
        return cls(
            a=0.0,
            b=0.0,
            c1=np.zeros(j),
            step_beta=np.zeros(j),
            w1=np.zeros((n, n), dtype=complex),
            b1=np.zeros(n, dtype=complex),
            w2=np.zeros((t, t), dtype=complex),
            b2=np.zeros(j, dtype=complex),
            b3=np.zeros(t, dtype=complex),
            o1=np.zeros((j, j), dtype=complex),
            o2=np.zeros(j, dtype=complex),
            x_delta=np.zeros((t, n), dtype=complex) if trainable_pilot else None,
        )

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.w1.shape[0], self.w2.shape[0], self.o1.shape[0]

    def validate(self, n: int, t: int, j: int) -> None:
        expected = {
            'c1': (j,), 'step_beta': (j,),
            'w1': (n, n), 'b1': (n,),
            'w2': (t, t), 'b2': (j,), 'b3': (t,),
            'o1': (j, j), 'o2': (j,),
        }
        if self.x_delta is not None:
            expected['x_delta'] = (t, n)
        for name, shape in expected.items():
            actual = np.shape(getattr(self, name))
            if actual != shape:
                raise DimensionMismatchError(f"LayerParams.{name} has shape {actual}, expected {shape}")

    def is_finite(self) -> bool:
        for item in fields(self):
            value = getattr(self, item.name)
            if value is not None and not np.all(np.isfinite(value)):
                return False
        return True

    def copy(self) -> 'LayerParams':
        values = {}
        for item in fields(self):
            value = getattr(self, item.name)
            values[item.name] = value.copy() if isinstance(value, np.ndarray) else value
        return LayerParams(**values)
