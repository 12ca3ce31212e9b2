"""
Channel Package for Off-Grid Channel Estimation
Provides the ULA model, channel/pilot synthesis and dataset files
"""

from .geometry import (
    ArrayGeometry,
    Grid,
    steering_vector,
    steering_derivative,
    steering_matrix,
    build_dictionary,
    build_dictionary_derivative,
)
from .generator import (
    ChannelSample,
    PilotMatrix,
    channel_from_rays,
    generate_channel,
    generate_pilots,
    observe,
    make_sample,
    resample_observation,
    pad_observation,
    snr_to_noise_var,
    split_rays,
)
from .dataset_io import Dataset, write_dataset, read_dataset

__all__ = [
    'ArrayGeometry',
    'Grid',
    'steering_vector',
    'steering_derivative',
    'steering_matrix',
    'build_dictionary',
    'build_dictionary_derivative',
    'ChannelSample',
    'PilotMatrix',
    'channel_from_rays',
    'generate_channel',
    'generate_pilots',
    'observe',
    'make_sample',
    'resample_observation',
    'pad_observation',
    'snr_to_noise_var',
    'split_rays',
    'Dataset',
    'write_dataset',
    'read_dataset',
]

__version__ = '1.0.0'
