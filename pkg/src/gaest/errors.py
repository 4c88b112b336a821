class GAError(Exception):
    """Base class for all errors raised by gaest."""


class ConfigError(GAError, ValueError):
    pass


class InvalidVisitError(GAError, ValueError):
    pass


class ValidationError(GAError, ValueError):
    pass


class EmptyCohortError(GAError, ValueError):
    pass


class ManifestParseError(GAError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ModalityError(GAError, ValueError):
    pass


class TrainingDivergedError(GAError, RuntimeError):
    pass


class FormulaSyntaxError(GAError, ValueError):
    def __init__(self, position: int, message: str):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class FormulaEvalError(GAError, ArithmeticError):
    pass
