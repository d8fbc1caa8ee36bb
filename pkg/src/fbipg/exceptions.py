"""Exception types raised by the package."""


class DimensionError(ValueError):
    """Operands have incompatible dimensions."""


class SpecError(ValueError):
    """A problem or experiment description could not be turned into an object.

    ``field`` names the offending key (dotted path) so command-line users can
    find it in their JSON file.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigurationError(ValueError):
    """Solver configuration is inconsistent with the problem."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during the iterations."""

    def __init__(self, iteration, message="non-finite value encountered"):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class UnsupportedError(NotImplementedError):
    """The requested oracle does not handle this problem structure."""


class EstimationError(ValueError):
    """Not enough usable data to estimate a quantity."""
