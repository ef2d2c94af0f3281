"""Bidirectional leader-follower teleoperation simulator with clip-based
human-in-the-loop policy fine-tuning."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
