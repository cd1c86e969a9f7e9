from typing import Any, Dict, Optional


class PreimageError(Exception):
    """Base error; `context` carries layer/branch/row positions for diagnostics"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def with_context(self, **context: Any) -> "PreimageError":
        """Attach extra context without losing what is already there"""
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "detail": self.message, **self.context}


class MissingVariable(PreimageError):
    pass


class NonSquareSystem(PreimageError):
    pass


class NonWideSystem(PreimageError):
    pass


class NonTallSystem(PreimageError):
    pass


class RankDeficientAllPivots(PreimageError):
    pass


class InsufficientFreeVariables(PreimageError):
    def __init__(self, message: str, residuals=(), context=None):
        super().__init__(message, context)
        self.residuals = tuple(residuals)


class RankDeficientColumns(PreimageError):
    pass


class InconsistentLayer(PreimageError):
    """A layer's affine system reduced to 0 = c with c != 0"""


class SchemaError(PreimageError):
    pass


class DimensionMismatch(PreimageError):
    pass


class InvalidActivation(PreimageError):
    pass


class BudgetExceeded(PreimageError):
    pass


class ConfigError(PreimageError):
    """A PREIMAGE_* setting has a value the program cannot use"""
