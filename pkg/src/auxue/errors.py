"""Structured exception types shared across the package.

Every contract violation raises one of these (or a module-specific
subclass) carrying the offending values as attributes, so callers can
inspect failures programmatically instead of parsing messages.
"""


class AuxueError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(AuxueError):
    """Operand shapes do not conform for the attempted operation."""

    def __init__(self, op, left_shape, right_shape):
        self.op = op
        self.left_shape = tuple(left_shape)
        self.right_shape = tuple(right_shape)
        super().__init__(
            f"{op}: shape mismatch {self.left_shape} vs {self.right_shape}"
        )


class DomainError(AuxueError):
    """Input outside the mathematical domain of the operation."""

    def __init__(self, op, detail):
        self.op = op
        self.detail = detail
        super().__init__(f"{op}: domain error: {detail}")


class ContractError(AuxueError):
    """Precondition on an argument's structure or value was violated."""


class DivergenceError(AuxueError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, stage, epoch, batch, detail):
        self.stage = stage
        self.epoch = epoch
        self.batch = batch
        self.detail = detail
        super().__init__(
            f"{stage}: non-finite value at epoch {epoch}, batch {batch}: {detail}"
        )


class PersistenceError(AuxueError):
    """Checkpoint or report file is malformed or has an unknown version."""
