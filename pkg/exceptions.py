"""
Exceptions Module
Error types shared by the descriptor, division, discovery and loss modules
"""


class GBDomainError(ValueError):
    """
    Base error for the toolkit. `code` is a stable machine-readable tag.
    """

    code = "error"

    def __init__(self, message: str, code: str = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class DescriptorFormatError(GBDomainError):
    """Descriptor file does not match the binary or CSV layout"""

    code = "format"


class PreconditionError(GBDomainError):
    """Numeric precondition violated by the inputs"""

    code = "precondition"


class ConfigError(GBDomainError):
    """Invalid run configuration"""

    code = "config"
