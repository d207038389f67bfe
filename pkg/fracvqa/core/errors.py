"""Hierarquia de erros do solver.

Cada erro carrega um ``detail`` legível e o ``exit_code`` usado pela CLI.
"""


class FracVQAError(Exception):
    exit_code: int = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(FracVQAError):
    exit_code = 1

    def __init__(self, detail: str, field_path: str | None = None):
        super().__init__(f"{field_path}: {detail}" if field_path else detail)
        self.field_path = field_path


class UsageError(FracVQAError, ValueError):
    """Argumentos fora de faixa, índices de qubit inválidos, registradores sobrepostos."""


class SingularOperatorError(FracVQAError):
    pass


class MissingHistoryError(FracVQAError):
    pass


class DomainMismatchError(FracVQAError):
    pass


class OptimizationError(FracVQAError):
    """Falha do otimizador em algum passo; ``history`` guarda os passos já concluídos."""

    def __init__(self, detail: str, history=None, step: int | None = None):
        super().__init__(detail)
        self.history = history
        self.step = step
