"""Exception hierarchy shared by every arttok module.

The CLI maps these classes onto distinct exit codes, so callers can tell a
bad file apart from a shape problem without parsing messages.
"""


class ArtError(Exception):
    """Base class for all arttok errors."""


class EmptyInputError(ArtError, ValueError):
    """An operation received zero points or an empty sequence."""


class InsufficientPointsError(ArtError, ValueError):
    """Fewer distinct points than requested centroids."""

    def __init__(self, count: int, k: int):
        super().__init__(f"need at least k={k} points to seed {k} centroids, got {count}")
        self.count = count
        self.k = k


class DimensionError(ArtError, ValueError):
    """Vector dimensions of two operands disagree."""

    def __init__(self, what: str, expected: int, actual: int):
        super().__init__(f"{what}: expected dimension {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ShapeError(ArtError, ValueError):
    """Layer counts, lengths or table shapes disagree."""


class LengthError(ArtError, ValueError):
    """A sequence does not fit into a fixed-size table."""


class InvalidTokenError(ArtError, ValueError):
    """A code lies outside the alphabet of its layer."""

    def __init__(self, layer: int, position: int, code: int, alphabet: int):
        super().__init__(
            f"invalid token {code} at (layer={layer}, position={position}); "
            f"alphabet size is {alphabet}"
        )
        self.layer = layer
        self.position = position
        self.code = code
        self.alphabet = alphabet


class NumericError(ArtError, ValueError):
    """Non-finite value where a finite one is required."""


class FormatError(ArtError):
    """A binary file is malformed: wrong magic, version or truncated."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
