"""Exception types raised across beam-qtl.

Every error derives from ``BeamQtlError`` and from the builtin it refines, so
``except ValueError`` keeps working for callers that do not know this module.
"""


class BeamQtlError(Exception):
    """Base class; knows how to describe itself as a machine-readable document"""

    def to_document(self):
        return {'error': type(self).__name__, 'message': str(self)}


class ValidationError(BeamQtlError, ValueError):
    pass


class QubitIndexError(BeamQtlError, IndexError):
    pass


class ParameterBindingError(BeamQtlError, ValueError):
    pass


class ConfigurationError(BeamQtlError, ValueError):
    pass


class CheckpointError(BeamQtlError):
    pass


class DataFormatError(ValidationError):
    def __init__(self, message, line=None, path=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.path = path

    def to_document(self):
        doc = super().to_document()
        doc['line'] = self.line
        doc['path'] = str(self.path) if self.path is not None else None
        return doc
