"""Exception hierarchy shared by every stage of the interpreter."""


class NestlogError(Exception):
    """Base class for all errors raised by the interpreter."""


class ParseError(NestlogError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ProbabilityRangeError(NestlogError):
    pass


class MixedDefinitionError(NestlogError):
    pass


class NonCallableError(NestlogError):
    pass


class DepthLimitExceeded(NestlogError):
    pass


class NonGroundAnnotatedFact(NestlogError):
    pass


class InstantiationError(NestlogError):
    pass


class ArithmeticTypeError(NestlogError):
    pass


class UnknownPredicate(NestlogError):
    pass


class EngineStackError(NestlogError):
    pass


class CurrentWithoutContext(NestlogError):
    pass


class InvalidOptions(NestlogError):
    pass


class UnknownInferenceKind(NestlogError):
    pass


class OrderMismatch(NestlogError):
    pass


class MissingWeight(NestlogError):
    pass


class UniverseTooLarge(NestlogError):
    pass


class NoAnswers(NestlogError):
    pass
