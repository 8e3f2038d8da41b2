"""Exception hierarchy shared by the analysis, prompt and session layers."""


class ChainTestError(Exception):
    """Base class for all errors raised by chaintest."""


class FactsError(ChainTestError):
    """The program-facts document cannot be turned into a valid model."""


class MalformedDocument(FactsError):
    pass


class SchemaViolation(FactsError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DuplicateClass(FactsError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"duplicate class {name!r}")


class CyclicHierarchy(FactsError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("cyclic type hierarchy: " + " -> ".join(self.cycle))


class LookupFailure(ChainTestError):
    """A focal class, method or receiver does not exist in the facts."""


class UnknownReceiver(LookupFailure):
    pass


class UnknownClass(LookupFailure):
    pass


class NoSuchMethod(LookupFailure):
    pass


class TokenBudgetExceeded(ChainTestError):
    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"prompt is {size} characters, budget is {budget}")


class NoCodeFound(ChainTestError):
    pass


class BackendError(ChainTestError):
    """A language model or test runner call failed."""


class ModelError(BackendError):
    pass


class RunnerError(BackendError):
    pass


class ConfigError(ChainTestError):
    pass
