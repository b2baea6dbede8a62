"""Radial solutions, gradient bounds and singularity classification for
-Delta_p u + |grad u|^q = 0."""

from .params import ProblemParams

__all__ = ["ProblemParams"]
__version__ = "0.1.0"
