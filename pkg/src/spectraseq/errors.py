"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SpectraSeqError(ValueError):
    """Base class for domain errors (CLI exit code 1)."""


class ParseError(SpectraSeqError):
    pass


class InvariantError(SpectraSeqError):
    pass


class AlignmentError(SpectraSeqError):
    pass


class ShapeError(SpectraSeqError):
    pass


class InsufficientData(SpectraSeqError):
    pass


class NonlinearityError(SpectraSeqError):
    pass


class TruncationError(SpectraSeqError):
    pass


class AliasError(SpectraSeqError):
    pass


class SearchCapExceeded(SpectraSeqError):
    pass
