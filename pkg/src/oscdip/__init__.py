"""Deep-image-prior restoration with an automatic orthogonal stopping rule.

A known pseudo-noise is added to the corrupted observation; the component of
each iterate along that pseudo-noise is tracked, and the iterate where that
track bends upward most sharply is returned.
"""

from .imagecore import load_image, psnr, save_image
from .oscmonitor import MonitorConfig, MonitorState, compute_e, compute_e_masked, curvature_at

__version__ = "0.1.0"

__all__ = [
    "MonitorConfig",
    "MonitorState",
    "compute_e",
    "compute_e_masked",
    "curvature_at",
    "load_image",
    "psnr",
    "save_image",
]
