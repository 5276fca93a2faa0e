"""Swap-reward reinforcement learning for SMILES generation."""

__version__ = "0.1.0"
