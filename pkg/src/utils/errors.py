from typing import Optional


class GuardianError(Exception):
    """Base class for every domain error raised by the toolkit."""


class FrameValidationError(GuardianError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class FrameParseError(GuardianError):
    def __init__(self, offset: int, message: str):
        # 1-indexed over the whole frame, preamble byte = 1
        self.offset = offset
        super().__init__(f"byte {offset}: {message}")


class RuleSyntaxError(GuardianError):
    def __init__(self, column: int, message: str, line: Optional[str] = None):
        self.column = column
        self.reason = message
        self.line = line
        super().__init__(f"column {column}: {message}")


class RuleEvaluationError(GuardianError):
    pass


class InspectionDepthError(GuardianError):
    def __init__(self, match: str, message: str):
        self.match = match
        super().__init__(f"{match}: {message}")


class RfDomainError(GuardianError, ValueError):
    pass


class AnalysisError(GuardianError):
    pass


class ScenarioValidationError(GuardianError):
    pass
