"""Exception types.

Every error carries a machine-readable ``code`` (e.g. ``"ZERO_Q"``) and an
``exit_status`` used by the command line runner.
"""

from __future__ import annotations


class ColldecoError(Exception):
    exit_status = 1

    def __init__(self, code: str, message: str = "", **context):
        self.code = code
        self.detail = message
        self.context = context
        super().__init__(f"{code}: {message}" if message else code)

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.detail}
        if self.context:
            out["context"] = {k: _plain(v) for k, v in self.context.items()}
        return out


class InputError(ColldecoError, ValueError):
    """Invalid arguments, inconsistent dimensions or failed validation."""

    exit_status = 2


class NumericalError(ColldecoError, ArithmeticError):
    """Non-convergence, step size problems or loss of positivity."""

    exit_status = 3


class OutputError(ColldecoError, OSError):
    exit_status = 4


def _plain(value):
    try:
        import numpy as np

        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
    except ImportError:  # pragma: no cover
        pass
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value
