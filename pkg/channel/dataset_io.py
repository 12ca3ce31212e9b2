"""
Dataset container for channel samples

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then little-endian float64 arrays. Complex arrays are stored interleaved (re, im).
Payload order: pilot X (row-major), grid points, then per sample h, ray
angles, ray gains and y.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from utils.errors import DatasetFormatError, DimensionMismatchError
from .generator import ChannelSample, PilotMatrix
from .geometry import ArrayGeometry, Grid

logger = logging.getLogger(__name__)

DATASET_MAGIC = b'OGSBLDS\x00'
DATASET_VERSION = 1
_LENGTH = struct.Struct('<I')


@dataclass
class Dataset:
    geometry: ArrayGeometry
    grid: Grid
    pilot: PilotMatrix
    seed: int
    samples: List[ChannelSample] = field(default_factory=list)

    def __post_init__(self):
        if self.pilot.n_antennas != self.geometry.n_antennas:
            raise DimensionMismatchError("pilot columns do not match the array size")
        for sample in self.samples:
            if sample.h.shape != (self.geometry.n_antennas,) or sample.y.shape != (self.pilot.length,):
                raise DimensionMismatchError("sample dimensions do not match the dataset geometry")

    def __len__(self) -> int:
        return len(self.samples)


class _PayloadReader:
    def __init__(self, buffer: bytes, offset: int, error_cls=DatasetFormatError):
        self.buffer = buffer
        self.offset = offset
        self.error_cls = error_cls

    def real(self, count: int) -> np.ndarray:
        return self._take('<f8', count, 8).astype(float)

    def complex(self, count: int) -> np.ndarray:
        return self._take('<c16', count, 16).astype(complex)

    def _take(self, dtype: str, count: int, width: int) -> np.ndarray:
        end = self.offset + count * width
        if end > len(self.buffer):
            raise self.error_cls(f"payload truncated: needed {end} bytes, file has {len(self.buffer)}")
        values = np.frombuffer(self.buffer, dtype=dtype, count=count, offset=self.offset)
        self.offset = end
        return values

    def finish(self):
        if self.offset != len(self.buffer):
            raise self.error_cls(f"{len(self.buffer) - self.offset} unexpected trailing bytes")


def pack_container(header: Dict[str, Any], arrays: List[np.ndarray], magic: bytes = DATASET_MAGIC) -> bytes:
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    chunks = [magic, _LENGTH.pack(len(header_bytes)), header_bytes]
    for array in arrays:
        dtype = '<c16' if np.iscomplexobj(array) else '<f8'
        chunks.append(np.ascontiguousarray(array, dtype=dtype).tobytes())
    return b''.join(chunks)


def read_container(buffer: bytes, magic: bytes, expected_format: str, version: int,
                   error_cls=DatasetFormatError):
    """Split a container into (header, payload reader), validating magic and version"""
    prefix = len(magic) + _LENGTH.size
    if len(buffer) < prefix or buffer[:len(magic)] != magic:
        raise error_cls("not a recognised container (bad magic)")
    (header_len,) = _LENGTH.unpack_from(buffer, len(magic))
    if prefix + header_len > len(buffer):
        raise error_cls("header truncated")
    try:
        header = json.loads(buffer[prefix:prefix + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise error_cls(f"header is not valid JSON: {e}") from e
    if header.get('format') != expected_format:
        raise error_cls(f"expected format {expected_format!r}, found {header.get('format')!r}")
    if header.get('version') != version:
        raise error_cls(f"unsupported version {header.get('version')} (expected {version})")
    return header, _PayloadReader(buffer, prefix + header_len, error_cls)


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = {
        'format': 'offgrid-dataset',
        'version': DATASET_VERSION,
        'n_antennas': dataset.geometry.n_antennas,
        'spacing_ratio': dataset.geometry.spacing_ratio,
        'pilot_length': dataset.pilot.length,
        'pilot_power': dataset.pilot.power,
        'grid_size': dataset.grid.size,
        'grid_resolution': dataset.grid.resolution,
        'seed': dataset.seed,
        'count': len(dataset.samples),
        'samples': [
            {
                'n_clusters': s.n_clusters,
                'rays_per_cluster': s.rays_per_cluster,
                'noise_var': s.noise_var,
                'gain_var': s.gain_var,
            }
            for s in dataset.samples
        ],
    }
    arrays = [dataset.pilot.x.ravel(), dataset.grid.points]
    for s in dataset.samples:
        arrays.extend([s.h, s.ray_angles, s.ray_gains, s.y])

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_container(header, arrays))
    logger.info(f"Wrote {len(dataset.samples)} samples to {path}")
    return path


def read_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    header, reader = read_container(path.read_bytes(), DATASET_MAGIC, 'offgrid-dataset', DATASET_VERSION)
    try:
        n, t, size = header['n_antennas'], header['pilot_length'], header['grid_size']
        geometry = ArrayGeometry(n_antennas=n, spacing_ratio=header['spacing_ratio'])
        pilot = PilotMatrix(x=reader.complex(t * n).reshape(t, n), power=header['pilot_power'])
        grid = Grid(points=reader.real(size), resolution=header['grid_resolution'])

        samples = []
        for meta in header['samples']:
            n_rays = meta['n_clusters'] * meta['rays_per_cluster']
            samples.append(ChannelSample(
                h=reader.complex(n),
                ray_angles=reader.real(n_rays),
                ray_gains=reader.complex(n_rays),
                n_clusters=meta['n_clusters'],
                rays_per_cluster=meta['rays_per_cluster'],
                y=reader.complex(t),
                noise_var=meta['noise_var'],
                gain_var=meta['gain_var'],
            ))
        reader.finish()
        if len(samples) != header['count']:
            raise DatasetFormatError(f"header announces {header['count']} samples, found {len(samples)}")
        return Dataset(geometry=geometry, grid=grid, pilot=pilot, seed=header['seed'], samples=samples)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"malformed dataset header in {path}: {e}") from e
