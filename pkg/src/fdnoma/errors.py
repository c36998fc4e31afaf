"""Exception hierarchy shared across the package."""


class FdnomaError(Exception):
    """Base class for all package errors."""


class ConfigError(FdnomaError):
    """Invalid system configuration or config-file syntax."""


class InfeasibleAllocationError(ConfigError):
    """Power allocation cannot support the requested SINR thresholds."""

    def __init__(self, user: int, margin: float):
        self.user = user
        self.margin = margin
        super().__init__(
            f"user {user}: a_k - gamma_th_k * sum(a_t, t>k) = {margin:.6g} <= 0; "
            "outage is certain and the closed forms diverge"
        )


class ImpairmentError(ConfigError):
    """Impairment parameters outside their valid range."""


class NumericsError(FdnomaError):
    """A numerical routine failed to reach its accuracy target."""
