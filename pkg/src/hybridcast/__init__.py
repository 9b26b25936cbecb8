"""Hybrid time-series forecaster: histogram GBDT (leaf-wise and oblivious),
a numpy LSTM, and a stacking meta-learner that blends them per timestep."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
