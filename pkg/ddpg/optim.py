"""
Adam optimizer over lists of numpy parameter arrays
"""

from typing import List

import numpy as np


class AdamOptimizer:
    def __init__(self, parameters: List[np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.parameters = parameters
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self.first = [np.zeros_like(p) for p in parameters]
        self.second = [np.zeros_like(p) for p in parameters]

    def step(self, gradients: List[np.ndarray]) -> None:
        """In-place descent step"""
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for param, grad, m, v in zip(self.parameters, gradients, self.first, self.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad ** 2
            param -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
