"""Exception hierarchy shared by every module."""


class FixRouteError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(FixRouteError):
    """Input references something that does not exist (unknown node, bad edge)."""


class ParseError(StructuralError):
    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigurationError(FixRouteError):
    """Inputs are well formed but not usable together."""


class PreconditionError(FixRouteError):
    pass


class DomainError(FixRouteError):
    """A route handed to a ranking or classifier it does not belong to."""


class MalformedRouteError(DomainError):
    pass


class InvariantViolation(FixRouteError):
    pass


class ModelViolation(FixRouteError):
    """Raised when the routing model's own assumptions are contradicted,
    e.g. a witness walk that could only continue around a customer-provider cycle."""
