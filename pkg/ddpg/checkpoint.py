"""
Agent checkpoints

Same container layout as datasets: magic, header length, JSON header with the
agent config and every network's layer sizes and activations, then each
network's weights and biases as little-endian float64 arrays.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from channel.dataset_io import read_container, pack_container
from utils.errors import CheckpointFormatError
from utils.rng import make_rng
from .agent import DdpgAgent, DdpgConfig
from .halting import HaltingNet
from .mlp import Mlp

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'OGSBLCK\x00'
CHECKPOINT_VERSION = 1
NETWORKS = ('actor', 'critic', 'target_actor', 'target_critic', 'halting')


def _network(agent: DdpgAgent, name: str) -> Mlp:
    return agent.halting.net if name == 'halting' else getattr(agent, name)


def save_checkpoint(agent: DdpgAgent, path: Union[str, Path], metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    header = {
        'format': 'offgrid-agent',
        'version': CHECKPOINT_VERSION,
        'config': json.loads(agent.config.model_dump_json()),
        'halting_slice': list(agent.halting_slice),
        'rho': agent.rho,
        'noise_sigma': agent.noise_sigma,
        'networks': {
            name: {'layer_sizes': _network(agent, name).layer_sizes,
                   'activations': _network(agent, name).activations}
            for name in NETWORKS
        },
        'metadata': metadata or {},
    }
    arrays = []
    for name in NETWORKS:
        net = _network(agent, name)
        arrays.extend(w.ravel() for w in net.weights)
        arrays.extend(net.biases)

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_container(header, arrays, CHECKPOINT_MAGIC))
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path], seed: Optional[int] = None) -> Tuple[DdpgAgent, Dict[str, Any]]:
    """Agent (with an empty replay buffer) and the stored metadata"""
    path = Path(path)
    header, reader = read_container(path.read_bytes(), CHECKPOINT_MAGIC, 'offgrid-agent', CHECKPOINT_VERSION,
                                    error_cls=CheckpointFormatError)
    try:
        config = DdpgConfig.model_validate(header['config'])
        networks = {}
        for name in NETWORKS:
            spec = header['networks'][name]
            sizes = [int(s) for s in spec['layer_sizes']]
            weights = [reader.real(sizes[i] * sizes[i + 1]).reshape(sizes[i], sizes[i + 1])
                       for i in range(len(sizes) - 1)]
            biases = [reader.real(sizes[i + 1]) for i in range(len(sizes) - 1)]
            networks[name] = Mlp(layer_sizes=sizes, activations=list(spec['activations']),
                                 weights=weights, biases=biases)
        reader.finish()
        agent = DdpgAgent(
            config,
            actor=networks['actor'],
            critic=networks['critic'],
            halting=HaltingNet(networks['halting']),
            halting_slice=tuple(header['halting_slice']),
            rho=float(header['rho']),
            rng=make_rng(seed),
            target_actor=networks['target_actor'],
            target_critic=networks['target_critic'],
        )
        agent.noise_sigma = float(header['noise_sigma'])
    except CheckpointFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"malformed checkpoint {path}: {e}") from e
    return agent, header.get('metadata', {})
