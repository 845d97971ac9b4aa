"""Compact-array speech scene simulation, classical beamforming and oracle masking."""

__version__ = "0.1.0"
