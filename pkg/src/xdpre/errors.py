"""Exception vocabulary shared by every module.

The CLI prints ``type(err).__name__`` on stderr, so class names are part of
the public interface and must not be renamed casually.
"""


class XdpreError(Exception):
    """Base class for all domain errors raised by the package."""


# groups
class BackendMismatch(XdpreError):
    pass


class EmptyLabel(XdpreError):
    pass


class EmptyMessage(XdpreError):
    pass


class DecodeError(XdpreError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at byte {position})")
        self.position = position


# policy
class ParseError(XdpreError):
    def __init__(self, line: int, column: int, expected):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(expected))
        super().__init__(
            f"line {line}, column {column}: expected one of {', '.join(self.expected)}"
        )


class ReservedAttribute(XdpreError):
    pass


class PolicyNotSatisfied(XdpreError):
    pass


class NotAuthorized(XdpreError):
    pass


# scheme
class DuplicateAttribute(XdpreError):
    pass


class UnknownAttribute(XdpreError):
    pass


class MissingProtectionKey(XdpreError):
    pass


class MalformedCiphertext(XdpreError):
    pass


class TargetKeyNotDual(XdpreError):
    pass


class RetainedSecretsRequired(XdpreError):
    pass


class KeyMismatch(XdpreError):
    pass


class UnsupportedMode(XdpreError):
    pass


class IntegrityError(XdpreError):
    pass


class FormatError(XdpreError):
    pass


# indcpa / bench
class InvalidParameter(XdpreError):
    pass


class LengthMismatch(XdpreError):
    pass


# sites
class DeadlineInPast(XdpreError):
    pass


class InvalidTransition(XdpreError):
    pass


class TargetUserUnknown(XdpreError):
    pass


class WrongActor(XdpreError):
    pass
