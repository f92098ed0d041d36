"""Suppressing alignment for OFDM.

Shapes a suppressor signal inside the null space of the receiver's
CP-removal-after-channel operator, so it cancels out-of-band emission
and/or lowers PAPR without disturbing the intended receiver.
"""
__version__ = "0.1.0"

from .alignment import AlignmentBasis, DegenerateChannelError, alignment_basis, alignment_residual
from .channel import apply_channel, draw_channel, perturb_csi, toeplitz_channel
from .ofdm import ConfigurationError, LinearMaps, SystemConfig, build_maps, ofdm_demodulate, ofdm_modulate
from .socp import SolverError
from .suppressor import (LsqiError, SuppressorSolution, notch_bins, solve_joint, solve_lsqi,
                         spectral_operators, suppress)

__all__ = [
    "AlignmentBasis", "ConfigurationError", "DegenerateChannelError", "LinearMaps", "LsqiError",
    "SolverError", "SuppressorSolution", "SystemConfig", "alignment_basis", "alignment_residual",
    "apply_channel", "build_maps", "draw_channel", "notch_bins", "ofdm_demodulate", "ofdm_modulate",
    "perturb_csi", "solve_joint", "solve_lsqi", "spectral_operators", "suppress", "toeplitz_channel",
    "__version__",
]
