"""
errors.py: Jerarquía de errores del laboratorio

Todos los errores heredan de LabError y llevan un código legible por máquina
(`code`) y un diccionario `details`. La CLI los serializa con to_dict().

Los errores de argumentos heredan además de ValueError y los de ejecución de
RuntimeError, para que el código que ya capturaba esas excepciones siga
funcionando.
"""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Error base del laboratorio."""

    code = "lab-error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        return {
            'error': self.code,
            'message': self.message,
            'details': self.details,
        }


#  Errores de argumentos (ValueError)

class ShapeMismatchError(LabError, ValueError):
    code = "shape-mismatch"

    def __init__(self, op: str, *shapes):
        formas = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(
            f"❌ Formas incompatibles en '{op}': {formas}",
            {'op': op, 'shapes': [list(s) for s in shapes]},
        )


class InvalidModelError(LabError, ValueError):
    code = "invalid-model"


class DistributionError(LabError, ValueError):
    code = "invalid-distribution"


class SamplerAcceptanceError(LabError, ValueError):
    code = "sampler-acceptance"


class HiddenDimMismatchError(LabError, ValueError):
    code = "hidden-dim-mismatch"


class ContractionViolatedError(LabError, ValueError):
    code = "contraction-violated"


class GridPreconditionError(LabError, ValueError):
    code = "grid-precondition"


class CoverPreconditionError(LabError, ValueError):
    code = "cover-precondition"


class ConfigError(LabError, ValueError):
    code = "invalid-config"


class ReportFormatError(LabError, ValueError):
    code = "report-format"

    def __init__(self, path: str, row: Optional[int], reason: str):
        donde = f"{path}" if row is None else f"{path}, fila {row}"
        super().__init__(
            f"❌ Reporte mal formado ({donde}): {reason}",
            {'file': str(path), 'row': row, 'reason': reason},
        )


#  Errores de ejecución (RuntimeError)

class BackwardBeforeForwardError(LabError, RuntimeError):
    code = "backward-before-forward"


class NonFiniteError(LabError, RuntimeError):
    code = "non-finite"

    def __init__(self, op: str, node: int):
        super().__init__(
            f"❌ Valores no finitos tras la operación '{op}' (nodo {node})",
            {'op': op, 'node': node},
        )


class TrainingDivergedError(LabError, RuntimeError):
    code = "training-diverged"

    def __init__(self, lr: float, epoch: int, batch: int, loss: float):
        super().__init__(
            f"❌ El entrenamiento divergió (lr={lr:.3e}, época={epoch}, lote={batch}, "
            f"pérdida={loss})",
            {'lr': lr, 'epoch': epoch, 'batch': batch, 'loss': str(loss)},
        )


class EmptySurvivorSetError(LabError, RuntimeError):
    code = "empty-survivor-set"


class ManifestMismatchError(LabError, RuntimeError):
    code = "manifest-mismatch"
