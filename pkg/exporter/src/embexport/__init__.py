"""Offline embedding exporter for the MRVL dataset format."""

from .errors import (
    DuplicateIdError,
    ExportError,
    ImageDecodeError,
    IoError,
    ModelLoadError,
)
from .job import ExportJob, run_export
from .models import HashedProjectionEncoder, load_encoder

__all__ = [
    "ExportError",
    "ModelLoadError",
    "ImageDecodeError",
    "DuplicateIdError",
    "IoError",
    "ExportJob",
    "run_export",
    "HashedProjectionEncoder",
    "load_encoder",
]

__version__ = "0.1.0"
