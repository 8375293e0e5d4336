"""Shared exception types."""


class DimensionError(ValueError):
    """Empty input, mixed dimensions, or a shape that cannot be interpreted."""


class ParameterError(ValueError):
    """A parameter violates its documented range (e.g. f_hat >= n/2)."""


class ConstructionError(ValueError):
    """A problem family cannot be built from the given parameters."""


class ConfigError(ValueError):
    """Invalid experiment configuration; carries every validation error found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
