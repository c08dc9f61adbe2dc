"""Exception types shared across conlab."""

class ConlabError(Exception):
    pass

class NameParseError(ConlabError, ValueError):
    pass

class ScenarioError(ConlabError, ValueError):
    pass

class ScenarioParseError(ScenarioError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")

class CalibrationError(ConlabError, ValueError):
    pass

class MalformedKeyError(ConlabError, ValueError):
    pass

class CoverParamsError(ConlabError, ValueError):
    pass

class UnsolvableError(ConlabError):
    pass

class CorruptionError(ConlabError):
    pass
