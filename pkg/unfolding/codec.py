"""
Flat real encoding of LayerParams for the DDPG action vector

Layout, in order (complex values stored as (re, im) pairs):

    field        scalar   diagonal   diagonal-plus-rank1   full
    a, b         1 each   1 each     1 each                1 each
    c1, step     1 each   J each     J each                J each
    W1 (NxN)     2        2N         6N  (d, u, v)         2N^2
    b1           2        2N         2N                    2N
    W2 (TxT)     2        2T         6T                    2T^2
    b2           2        2J         2J                    2J
    b3           2        2T         2T                    2T
    O1 (JxJ)     2        2J         6J                    2J^2
    o2           2        2J         2J                    2J
    x_delta      2T+2N    2T+2N      2T+2N  (u v^H)        2TN    (trainable pilot only)

Scalar mode repeats one value across a vector and uses s*I for square matrices.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.linalg import svd

from utils.errors import DimensionMismatchError
from .params import LayerParams

logger = logging.getLogger(__name__)

CODEC_MODES = ('scalar', 'diagonal', 'diagonal-plus-rank1', 'full')

REAL = 'real'
VECTOR = 'vector'
SQUARE = 'square'
RECTANGLE = 'rectangle'


def _as_reals(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=complex).reshape(-1).view(float)


def _as_complex(reals: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(reals, dtype=float).view(complex).copy()


def split_diagonal_rank1(matrix: np.ndarray, tolerance: float = 1e-14) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (d, u, v) with matrix = diag(d) + u v^H.

    The off-diagonal part is completed to rank one from its largest entry; exact
    for every matrix of that form.
    """
    n = matrix.shape[0]
    zero = np.zeros(n, dtype=complex)
    off = matrix - np.diag(np.diag(matrix))
    peak = float(np.max(np.abs(off))) if n else 0.0
    if n < 2 or peak <= tolerance * max(1.0, float(np.max(np.abs(matrix)))):
        return np.diag(matrix).astype(complex), zero, zero.copy()

    p, q = np.unravel_index(np.argmax(np.abs(off)), off.shape)
    # off[i, k] = u_i w_k for i != k, normalised so that w_q = 1
    w = off[p, :] / off[p, q]
    u = off[:, q].astype(complex)
    others = [k for k in range(n) if k not in (p, q)]

    u_q = None
    spread = [k for k in others if abs(w[k]) > 0]
    if spread:
        k = max(spread, key=lambda idx: abs(w[idx]))
        u_q = off[q, k] / w[k]
    w_p = None
    spread = [i for i in others if abs(u[i]) > 0]
    if spread:
        i = max(spread, key=lambda idx: abs(u[idx]))
        w_p = off[i, p] / u[i]

    if u_q is None and w_p is None:
        u_q, w_p = 1.0, off[q, p]
    elif u_q is None:
        u_q = off[q, p] / w_p if abs(w_p) > 0 else 0.0
    elif w_p is None:
        w_p = off[q, p] / u_q if abs(u_q) > 0 else 0.0
    u[q] = u_q
    w[p] = w_p

    d = np.diag(matrix) - u * w
    return d.astype(complex), u, np.conj(w)


@dataclass
class ParamCodec:
    mode: str
    dims: Tuple[int, int, int]
    trainable_pilot: bool = False
    segments: List[Tuple[str, str, int]] = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in CODEC_MODES:
            raise ValueError(f"unknown codec mode {self.mode!r}; expected one of {CODEC_MODES}")
        self.dims = tuple(int(d) for d in self.dims)
        n, t, j = self.dims
        self.segments = [
            ('a', REAL, 1), ('b', REAL, 1),
            ('c1', REAL, j), ('step_beta', REAL, j),
            ('w1', SQUARE, n), ('b1', VECTOR, n),
            ('w2', SQUARE, t), ('b2', VECTOR, j), ('b3', VECTOR, t),
            ('o1', SQUARE, j), ('o2', VECTOR, j),
        ]
        if self.trainable_pilot:
            self.segments.append(('x_delta', RECTANGLE, 0))

    def segment_length(self, name: str, kind: str, size: int) -> int:
        n, t, _ = self.dims
        if kind == REAL:
            return 1 if (self.mode == 'scalar' or name in ('a', 'b')) else size
        if kind == VECTOR:
            return 2 if self.mode == 'scalar' else 2 * size
        if kind == SQUARE:
            return {'scalar': 2, 'diagonal': 2 * size, 'diagonal-plus-rank1': 6 * size,
                    'full': 2 * size * size}[self.mode]
        return 2 * t * n if self.mode == 'full' else 2 * (t + n)

    def layout(self) -> List[Tuple[str, int, int]]:
        """(field name, offset, length) for every segment"""
        rows, offset = [], 0
        for name, kind, size in self.segments:
            length = self.segment_length(name, kind, size)
            rows.append((name, offset, length))
            offset += length
        return rows

    @property
    def flat_len(self) -> int:
        return sum(length for _, _, length in self.layout())

    def slice_of(self, name: str) -> slice:
        for field_name, offset, length in self.layout():
            if field_name == name:
                return slice(offset, offset + length)
        raise KeyError(name)

    # encoding

    def _encode_segment(self, name: str, kind: str, size: int, value) -> np.ndarray:
        if kind == REAL:
            value = np.atleast_1d(np.asarray(value, dtype=float))
            if self.mode == 'scalar' or name in ('a', 'b'):
                return np.array([float(np.mean(value))])
            return value.astype(float)
        if kind == VECTOR:
            value = np.asarray(value, dtype=complex)
            return _as_reals(np.array([np.mean(value)]) if self.mode == 'scalar' else value)
        if kind == SQUARE:
            value = np.asarray(value, dtype=complex)
            if self.mode == 'scalar':
                return _as_reals(np.array([np.mean(np.diag(value))]))
            if self.mode == 'diagonal':
                return _as_reals(np.diag(value))
            if self.mode == 'diagonal-plus-rank1':
                return _as_reals(np.concatenate(split_diagonal_rank1(value)))
            return _as_reals(value)
        value = np.asarray(value, dtype=complex)
        if self.mode == 'full':
            return _as_reals(value)
        left, singular, right = svd(value, full_matrices=False)
        return _as_reals(np.concatenate([left[:, 0] * singular[0], np.conj(right[0])]))

    def encode(self, params: LayerParams) -> np.ndarray:
        params.validate(*self.dims)
        if self.trainable_pilot and params.x_delta is None:
            raise DimensionMismatchError("codec expects a pilot refinement but params carry none")
        chunks = [self._encode_segment(name, kind, size, getattr(params, name))
                  for name, kind, size in self.segments]
        return np.concatenate(chunks)

    # decoding

    def _decode_segment(self, name: str, kind: str, size: int, chunk: np.ndarray):
        n, t, _ = self.dims
        if kind == REAL:
            if name in ('a', 'b'):
                return float(chunk[0])
            return np.full(size, float(chunk[0])) if self.mode == 'scalar' else chunk.astype(float).copy()
        if kind == VECTOR:
            values = _as_complex(chunk)
            return np.full(size, values[0]) if self.mode == 'scalar' else values
        if kind == SQUARE:
            values = _as_complex(chunk)
            if self.mode == 'scalar':
                return values[0] * np.eye(size, dtype=complex)
            if self.mode == 'diagonal':
                return np.diag(values)
            if self.mode == 'diagonal-plus-rank1':
                d, u, v = values[:size], values[size:2 * size], values[2 * size:]
                return np.diag(d) + np.outer(u, np.conj(v))
            return values.reshape(size, size)
        values = _as_complex(chunk)
        if self.mode == 'full':
            return values.reshape(t, n)
        return np.outer(values[:t], np.conj(values[t:]))

    def decode(self, flat: np.ndarray) -> LayerParams:
        flat = np.asarray(flat, dtype=float).reshape(-1)
        if flat.size != self.flat_len:
            raise DimensionMismatchError(f"flat vector has length {flat.size}, codec expects {self.flat_len}")
        values = {}
        for (name, kind, size), (_, offset, length) in zip(self.segments, self.layout()):
            values[name] = self._decode_segment(name, kind, size, flat[offset:offset + length])
        return LayerParams(**values)


def encode_params(params: LayerParams, codec: ParamCodec) -> np.ndarray:
    return codec.encode(params)


def decode_params(flat: np.ndarray, codec: ParamCodec) -> LayerParams:
    return codec.decode(flat)
