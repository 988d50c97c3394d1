"""Exception types for the export tool."""


class ExportError(Exception):
    """Base class for all exporter errors."""


class ModelLoadError(ExportError):
    """The requested encoder could not be constructed."""


class ImageDecodeError(ExportError):
    """An input image is missing or not decodable."""


class DuplicateIdError(ExportError):
    """Two input items share an id."""


class IoError(ExportError):
    """Writing the output file failed."""
