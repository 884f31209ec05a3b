"""Exception types shared across the package."""


class SchemaError(ValueError):
    """A machine, kernel or measurement file violates its schema or an invariant."""


class CapabilityError(ValueError):
    """A kernel needs an execution capability the machine does not provide."""


class ECMParseError(ValueError):
    """A shorthand-notation string is malformed; `position` is the 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position
