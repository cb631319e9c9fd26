class ExportError(Exception):
    """Any failure that should stop the export with a message."""


class ModelUnavailable(ExportError):
    """The requested backend cannot be loaded (missing package or weights)."""


class UndecodableImage(ExportError):
    """A dataset file could not be decoded as an image."""
