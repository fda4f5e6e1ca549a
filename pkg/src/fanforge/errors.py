"""Exception types shared across the package.

Everything raised on purpose derives from FanforgeError so callers can
catch engine failures without swallowing programming errors.
"""


class FanforgeError(Exception):
    """Base class for all errors raised by fanforge."""


class ShapeMismatch(FanforgeError):
    """Raster shapes disagree, or an op received dimensions it cannot accept."""


class MissingScanMask(FanforgeError):
    """An ultrasound-specific op was asked to run on a sample without a scan mask."""


class EmptyMask(FanforgeError):
    """Mask extraction found no pixel above the intensity threshold."""


class UnknownTransform(FanforgeError):
    """A transform name is not in the registry."""


class ZeroBaseline(FanforgeError):
    """Relative improvement is undefined for a non-positive baseline mean."""


class NOutOfRange(FanforgeError):
    """Requested top-N size is outside [1, number of stats]."""


class SchemaError(FanforgeError):
    """A config document failed validation.

    ``path`` names the offending key in dotted/indexed form, e.g.
    ``op_set[2].name``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ParseError(FanforgeError):
    """A manifest line is not valid JSON or lacks required fields."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateId(FanforgeError):
    """Two manifest entries share an id."""

    def __init__(self, line, entry_id):
        self.line = line
        self.entry_id = entry_id
        super().__init__(f"line {line}: duplicate id {entry_id!r}")


class MissingFile(FanforgeError):
    """A manifest entry references a file that does not exist."""

    def __init__(self, entry_id, path):
        self.entry_id = entry_id
        self.path = path
        super().__init__(f"entry {entry_id!r}: missing file {path}")


class IoError(FanforgeError):
    """Writing an output artifact failed."""
