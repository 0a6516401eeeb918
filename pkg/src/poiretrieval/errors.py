"""Exception types shared across the engine.

The CLI maps these onto exit codes: DataValidationError -> 3,
ConvergenceError -> 4.
"""


class DataValidationError(ValueError):
    """Input data violates a module contract."""

    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)


class UnknownItemError(KeyError, DataValidationError):
    def __init__(self, item_id):
        DataValidationError.__init__(self, f"unknown item id {item_id!r}")
        self.item_id = item_id

    def __str__(self):
        return self.args[0]


class ZeroVectorError(DataValidationError):
    """Raised when a vector cannot be l2-normalized."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget before meeting its tolerance."""
