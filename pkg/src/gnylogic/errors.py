class GNYError(Exception):
    """Base class for all errors raised by this package."""


class UnboundMetaVar(GNYError):
    """A rule or schema left a pattern variable without a value (encoding bug)."""

    def __init__(self, name):
        super().__init__(f"unbound metavariable ?{name}")
        self.name = name


class IterationCapExceeded(GNYError):
    pass


class SpecError(GNYError):
    """An ill-formed protocol specification (undeclared symbol, bad reference)."""

    def __init__(self, message, label=None):
        super().__init__(f"{label}: {message}" if label else message)
        self.label = label


class RunComplete(GNYError):
    pass


class AttackError(GNYError):
    pass


class NotInTrace(GNYError):
    pass


class ParseFailure(GNYError):
    """Raised by the DSL parser; carries every :class:`~gnylogic.dsl.ParseError` found."""

    def __init__(self, errors):
        self.errors = list(errors)
        first = self.errors[0] if self.errors else None
        super().__init__(str(first) if first else "parse failed")
