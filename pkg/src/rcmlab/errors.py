"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: resource and truncation problems exit
with 3, configuration and usage problems with 2.
"""


class RCMError(Exception):
    """Base class for all errors raised by rcmlab."""


class ParameterError(RCMError, ValueError):
    """Invalid parameters for a law, lattice or operation."""


class UnsupportedOperationError(RCMError):
    """The operation is not defined for this boundary condition or input."""


class ContractError(RCMError, TypeError):
    """An input has the wrong kind (e.g. a CSRW path passed where a VSRW is needed)."""


class TruncationError(RCMError):
    """The finite box is too small for the requested scale."""


class ResourceError(RCMError):
    """The requested computation exceeds the configured step budget."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class NumericalError(RCMError):
    """An iterative solver failed to converge."""


class ConfigurationError(RCMError):
    """A verification suite was configured outside its domain of validity."""
