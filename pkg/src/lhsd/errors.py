"""Exception types shared across modules."""


class NumericalGuardError(ArithmeticError):
    """A numerical routine refused to run or failed to reach its tolerance."""


class ConfigError(ValueError):
    """An experiment configuration has one or more invalid fields.

    ``errors`` lists every problem found, each prefixed with its field path.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
