"""dpmseg: contour segmentation by learned limit-cycle dynamics.

A binary mask is turned into a planar vector field whose unique attractor is
the region boundary, traversed counterclockwise.  A small CNN learns to
reproduce that field from oriented image patches, and segmentation is the
rollout of an agent under the learned policy until its Poincare return map
converges.
"""
from . import (agent, cli, config, errors, field, io, metrics, model,
               patches, poincare, svg, synth, validation)
from .config import RunConfig
from .errors import DpmError, NonConvergence
from .estimator import DeepPoincareSegmenter

__version__ = "0.1.0"

__all__ = [
    "agent", "cli", "config", "errors", "field", "io", "metrics", "model",
    "patches", "poincare", "svg", "synth", "validation",
    "RunConfig", "DpmError", "NonConvergence", "DeepPoincareSegmenter",
    "__version__",
]
