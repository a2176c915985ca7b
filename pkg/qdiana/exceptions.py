from typing import Any, Optional


class QDianaError(Exception):
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidInputError(QDianaError):
    pass


class CorruptMessageError(QDianaError):
    pass


class NotStronglyConvexError(QDianaError):
    pass


class RegimeError(QDianaError):
    pass


class ParseError(QDianaError):
    def __init__(self, line: Optional[int], detail: str):
        super().__init__(f"line {line}: {detail}" if line is not None else detail)
        self.line = line


class EmptyDatasetError(QDianaError):
    pass


class InsufficientDataError(QDianaError):
    pass


class InvalidStateError(QDianaError):
    pass


class WrongMethodError(QDianaError):
    pass


class ConfigError(QDianaError):
    exit_code = 2

    def __init__(self, key_path: str, detail: str):
        super().__init__(f"{key_path}: {detail}" if key_path else detail)
        self.key_path = key_path


class NoConvergenceError(QDianaError):
    def __init__(self, detail: str, best_iterate: Any, residual: float):
        super().__init__(detail)
        self.best_iterate = best_iterate
        self.residual = residual


class DivergenceError(QDianaError):
    def __init__(self, detail: str, trace: Optional[Any] = None):
        super().__init__(detail)
        self.trace = trace
