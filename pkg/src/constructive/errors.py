"""Exception types shared across the pipeline."""

from __future__ import annotations


class PipelineError(ValueError):
    """Error carrying a stable machine-readable ``code``."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ValidationError(PipelineError):
    """A game record violates the schema; ``violations`` lists every failure."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        detail = "; ".join(f"{path} {reason}" for path, reason in self.violations)
        super().__init__("INVALID_FIELD", detail)


class MalformedDocument(PipelineError):
    def __init__(self, message: str):
        super().__init__("MALFORMED_DOCUMENT", message)
