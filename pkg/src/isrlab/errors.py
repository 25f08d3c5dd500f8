"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter combination is mathematically infeasible or misused.

    Raised for things like an entropy-slack equation with no root in (0, 1/2),
    a correlated-index stream requested at rho < 1, or a gap pair with c <= s.
    The CLI maps this to exit code 3.
    """


class ConfigError(ValueError):
    """An experiment config is malformed (unknown kind, missing field, bad type).

    The CLI maps this to exit code 2.
    """
