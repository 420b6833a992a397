"""Non-orthogonal artificial noise (NORAN) secrecy toolkit.

Power-split optimization by the concave-convex procedure, CSI-keyed
codebooks that let the legitimate receiver cancel the injected noise, and
Monte Carlo secrecy/BER sweeps.
"""

from noran.channel import (
    ChannelRealization,
    Precoder,
    effective_gain,
    sample_rayleigh_channel,
    select_precoder,
    transmit,
)
from noran.codebook import Codebook, build_codebook, cancel_noran, derive_key, lookup
from noran.optimizer import CcpConfig, DcObjective, ccp_solve, oracle_grid_search
from noran.rng import RngStream
from noran.secrecy import PowerAllocation, secrecy_capacity

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "Precoder",
    "effective_gain",
    "sample_rayleigh_channel",
    "select_precoder",
    "transmit",
    "Codebook",
    "build_codebook",
    "cancel_noran",
    "derive_key",
    "lookup",
    "CcpConfig",
    "DcObjective",
    "ccp_solve",
    "oracle_grid_search",
    "RngStream",
    "PowerAllocation",
    "secrecy_capacity",
]
