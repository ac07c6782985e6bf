"""Exception hierarchy shared by all cavsim modules."""


class CavsimError(Exception):
    """Base class for cavsim errors."""


class InvalidArgumentError(CavsimError, ValueError):
    """An argument violates an operation's precondition."""


class NumericalFailure(CavsimError, ArithmeticError):
    """Integration produced NaN or overflow."""


class SettleWindowExceeded(CavsimError):
    """The cavity did not ring down before the end of the time grid.

    Attributes
    ----------
    residual : float
        Excitation left in cavity + atom at the final time.
    """

    def __init__(self, residual, threshold):
        self.residual = float(residual)
        self.threshold = float(threshold)
        super().__init__(
            f"residual excitation {self.residual:.3e} exceeds {self.threshold:.1e}; "
            "extend the grid's settle window"
        )


class UndefinedFidelityError(CavsimError):
    """Fidelity requested for a state with zero surviving norm."""


class UsageError(CavsimError):
    """Bad command-line input."""
