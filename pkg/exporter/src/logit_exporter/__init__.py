"""Logit exporter: runs a model over a dataset directory and its corrupted
views, writing one NDJSON record per (sample, dimension).

The corrupted views are produced by shelling out to the ``cover corrupt``
command so the pixel definitions are exactly the toolkit's; nothing here
links against the toolkit itself.  The output format is the interchange
NDJSON the toolkit ingests.
"""

from .errors import ExportError, ModelUnavailable, UndecodableImage
from .export import export, parse_dims
from .model import PixelPrototypeBackend, build_backend

__all__ = [
    "ExportError",
    "ModelUnavailable",
    "UndecodableImage",
    "PixelPrototypeBackend",
    "build_backend",
    "export",
    "parse_dims",
]
