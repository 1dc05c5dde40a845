"""
preprocessing.py: Etiquetado de lotes y preparación de datos de entrenamiento

Etiqueta las secuencias con el maestro (etiquetas en todas las longitudes de
prefijo y, si se pide, trazas CoT), deriva las semillas del flujo de datos en
línea por (época, lote) y arma las máscaras de posiciones de la pérdida.
"""

import logging
from typing import Optional, Union

import numpy as np

from .architectures import AnyModel, DegenerateTeacher
from .autodiff import RngStream
from .data_loader import DistributionSpec, SequenceBatch, sample_tokens
from .errors import HiddenDimMismatchError, ShapeMismatchError

logger = logging.getLogger(__name__)


def label_batch(
    teacher: AnyModel,
    tokens: Union[np.ndarray, SequenceBatch],
    with_cot: bool = False,
    teacher_id: Optional[str] = None,
) -> SequenceBatch:
    """
    Etiqueta un lote con el maestro en cada longitud de prefijo 1..T.

    Las trazas CoT son la representación oculta del maestro: sumas prefijo de ψ
    (deep set), agregados de atención previos a ω (transformer) o h_t (SSM/RNN).

    Args:
        teacher: Modelo maestro (puede ser degenerado)
        tokens: Arreglo (lote, T, n) o SequenceBatch sin etiquetar
        with_cot: Si True, adjunta las trazas ocultas
        teacher_id: Identificador del maestro para los metadatos

    Returns:
        SequenceBatch: Lote con etiquetas (lote, T, m) y cot opcional (lote, T, k)

    Raises:
        ShapeMismatchError: Si la dimensión de token no coincide con el maestro

    Ejemplo de uso:
        >>> lote = label_batch(maestro, sample_uniform(8, 6, 256, seed=0), with_cot=True)
        >>> lote.cot.shape
        (256, 6, 8)
    """
    meta = {}
    if isinstance(tokens, SequenceBatch):
        meta = dict(tokens.meta)
        tokens = tokens.tokens
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 3 or tokens.shape[-1] != teacher.n:
        raise ShapeMismatchError("label_batch", tokens.shape, ("lote", "T", teacher.n))

    salida = teacher.predict(tokens)
    meta['teacher'] = teacher_id or getattr(teacher, 'family', 'modelo')
    if isinstance(teacher, DegenerateTeacher):
        meta['degenerate'] = {'t0': teacher.t0, 'offset': teacher.offset.tolist()}
    return SequenceBatch(
        tokens=tokens,
        labels=salida.labels,
        cot=salida.hidden if with_cot else None,
        meta=meta,
    )


def check_cot_compatible(student: AnyModel, teacher: AnyModel) -> None:
    """Las trazas del estudiante y del maestro deben tener la misma dimensión oculta."""
    if student.hidden_dim != teacher.hidden_dim:
        raise HiddenDimMismatchError(
            f"❌ Dimensión oculta del estudiante ({student.hidden_dim}) distinta de la "
            f"del maestro ({teacher.hidden_dim})",
            {'student': student.hidden_dim, 'teacher': teacher.hidden_dim},
        )


#  Flujo de datos en línea

def batch_stream(seed: int, split: str, epoch: int, index: int) -> RngStream:
    """Flujo del lote `index` de la época `epoch` ('train' o 'val')."""
    return RngStream(int(seed), f"{split}/e{epoch}/b{index}")


def streaming_batch(
    teacher: AnyModel,
    dist: DistributionSpec,
    batch_size: int,
    seed: int,
    split: str,
    epoch: int,
    index: int,
    with_cot: bool = False,
) -> SequenceBatch:
    """
    Muestrea y etiqueta un lote del flujo en línea.

    Los lotes se regeneran en cada época; (seed, split, epoch, index) determina
    el lote exactamente.
    """
    lote = sample_tokens(dist, batch_size, batch_stream(seed, split, epoch, index))
    etiquetado = label_batch(teacher, lote, with_cot=with_cot)
    etiquetado.meta.update({'split': split, 'epoch': epoch, 'batch': index, 'seed': seed})
    return etiquetado


#  Máscaras de posiciones

def position_weights(T: int, final_label_only: bool = False, skip_first_position: bool = False) -> np.ndarray:
    """
    Pesos por posición de la pérdida, normalizados a media 1 sobre las posiciones activas.

    Con final_label_only sólo cuenta y_T; con skip_first_position se excluye t = 1
    (variante del transformer normalizado por i−1, cuya salida en t = 1 es ω(0)).

    Returns:
        np.ndarray: (T,) con pesos T/activas en las posiciones activas y 0 en el resto
    """
    activas = np.ones(T, dtype=np.float64)
    if final_label_only:
        activas[:-1] = 0.0
    if skip_first_position and T > 1:
        activas[0] = 0.0
    if activas.sum() == 0:
        activas[-1] = 1.0
    return activas * (T / activas.sum())
