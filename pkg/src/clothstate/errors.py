"""Exception hierarchy.

Everything raised on purpose by the library derives from
:class:`ClothStateError`. Errors that mean "the representation could not be
extracted from these borders" derive from :class:`ExtractionError`; the
evaluation harness counts those as failures and the CLI maps them to exit
code 3.
"""


class ClothStateError(ValueError):
    """Base class for all library errors."""


class ExtractionError(ClothStateError):
    """Base class for failures to read a cloth state off a disk."""


# geometry
class DegenerateConfiguration(ClothStateError):
    pass


class DegenerateInput(ClothStateError):
    pass


class DimensionMismatch(ClothStateError):
    pass


# extract
class EmptyDisk(ExtractionError):
    pass


class NoFoldFound(ExtractionError):
    pass


class AmbiguousOrientation(ExtractionError):
    pass


class MultiFoldUnpaired(ExtractionError):
    def __init__(self, message, fold_angles=()):
        super().__init__(message)
        self.fold_angles = list(fold_angles)


class CornerMismatch(ClothStateError):
    pass


# synth
class InvalidPolygon(ClothStateError):
    pass


class BadFoldLine(ClothStateError):
    pass


class EmptyFold(ClothStateError):
    pass


class OpenChain(ClothStateError):
    pass


class TooSparse(ClothStateError):
    pass


# metrics / semantics / plan
class InvalidFold(ClothStateError):
    pass


class MalformedClose(ClothStateError):
    pass


class UnsupportedMultiFold(ClothStateError):
    pass


class PickOnFoldLine(ClothStateError):
    pass
