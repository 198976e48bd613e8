from typing import Optional


class QGAError(RuntimeError):
    def __init__(self, message: str) -> None:
        super().__init__(message)

class ContractViolationError(QGAError):
    def __init__(self, message: str) -> None:
        super().__init__(message)

class RegisterRangeError(QGAError, IndexError):
    def __init__(self, message: str) -> None:
        super().__init__(message)

class ConfigurationError(QGAError):
    def __init__(self, message: str) -> None:
        super().__init__(message)

class SuperoperatorSizeError(QGAError):
    def __init__(self, size: int, cap: int) -> None:
        super().__init__((
            f"Superoperator of dimension {size} exceeds the dense cap of {cap}. "
            "Use the matrix-free path (top_eigenpairs with method='arnoldi') instead."
        ))
        self.size = size
        self.cap = cap

class ConvergenceError(QGAError):
    def __init__(self, message: str, best_residual: Optional[float] = None) -> None:
        if best_residual is not None:
            message = f"{message} (best residual {best_residual:.3e})"
        super().__init__(message)
        self.best_residual = best_residual

class ParsingError(QGAError):
    def __init__(self, message: str) -> None:
        super().__init__(message)

class ResumeConflictError(QGAError):
    def __init__(self) -> None:
        super().__init__((
            "Output directory was produced by a different experiment configuration. "
            "Choose a new output directory or restore the original config."
        ))

class EmptyStatsError(QGAError):
    def __init__(self) -> None:
        super().__init__("Cannot aggregate an empty record set.")
