"""Exception types shared across the package."""


class ConvstabError(Exception):
    """Base class for all package errors."""


class DomainError(ConvstabError, ValueError):
    """A point lies outside the box domain of an expression."""


class EvaluationError(ConvstabError, ArithmeticError):
    """A primitive was evaluated outside its own domain."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FeasibilityError(ConvstabError, ValueError):
    """A direction leaves the domain immediately."""


class ParseError(ConvstabError, ValueError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class CertificationRefused(ConvstabError):
    """The sampled annulus minimum does not exceed f(x*)."""

    def __init__(self, certificate):
        super().__init__(
            f"certification refused: lambda0={certificate.lambda0:.6g} <= 0 "
            f"(violating point {list(certificate.violating_point)})"
        )
        self.certificate = certificate


class UnsupportedDimension(ConvstabError, ValueError):
    pass
