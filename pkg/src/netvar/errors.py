"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input/validation problems -> 2,
numerical failures -> 3, explosive simulations -> 4.
"""


class NetvarError(Exception):
    """Base class for all package-specific errors."""


class InputError(NetvarError):
    """Invalid argument, malformed file, or inconsistent inputs."""


class GenerationFailure(NetvarError):
    """A random generator could not produce a valid draw (e.g. isolated nodes)."""


class InstabilityError(NetvarError):
    """The simulated process left the representable range (non-finite state)."""


class InsufficientLocalDataError(NetvarError):
    """Too few kernel-weighted observations, or a locally singular design."""


class SingularDesignError(NetvarError):
    """A pooled or parametric design matrix is singular beyond repair."""


class DegenerateResidualsError(NetvarError):
    """Residuals carry no variation, so a test statistic cannot be scaled."""
