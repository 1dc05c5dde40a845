"""
data_loader.py: Muestreo de secuencias y carga de reportes

PROPÓSITO:
    Genera las secuencias de tokens de cada distribución del laboratorio
    (hipercubo uniforme, banda composicional de entrenamiento, complemento de
    esquinas para prueba y tokens discretos), vuelca lotes a CSV y carga los
    reportes CSV con validaciones de integridad.

DEPENDENCIAS:
    - numpy: muestreo
    - pandas: lectura/escritura de CSV
    - pydantic: validación de DistributionSpec
    - utils.autodiff.RngStream: flujos aleatorios reproducibles

TRAZABILIDAD:
    - Usado por: utils/preprocessing.py, utils/training.py, utils/calculations.py,
      utils/experiments.py, utils/visualizations.py
    - Importado desde: utils/__init__.py
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .autodiff import DTYPE, RngStream
from .errors import DistributionError, ReportFormatError, SamplerAcceptanceError

logger = logging.getLogger(__name__)

SeedLike = Union[int, RngStream]

# Límites del muestreo por rechazo
MAX_PROPOSALS_PER_SAMPLE = 1_000_000
MIN_PROPOSALS_FOR_FLOOR = 10_000
DEFAULT_ACCEPTANCE_FLOOR = 1e-4
CSV_FLOAT_FORMAT = '%.12e'


class DistributionSpec(BaseModel):
    """
    Distribución de secuencias de tokens.

    kind:
        - uniform-hypercube: x_i ~ Uniform[0,1]ⁿ
        - compositional-band: |Σ_j (x_jᵏ − 0.5)| ≤ band_halfwidth para todo k
        - corner-complement: viola la banda en al menos una componente
        - discrete-grid: cada componente en {0, 1/(levels−1), …, 1}
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    kind: Literal["uniform-hypercube", "compositional-band", "corner-complement", "discrete-grid"] = \
        "uniform-hypercube"
    n: int
    T: int
    band_halfwidth: float = 0.5
    levels: Optional[int] = None
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR

    @model_validator(mode='after')
    def _validar(self):
        if self.n < 1 or self.T < 1:
            raise ValueError(f"n y T deben ser ≥ 1 (n={self.n}, T={self.T})")
        if self.band_halfwidth <= 0:
            raise ValueError("band_halfwidth debe ser positivo")
        if self.kind == "discrete-grid" and (self.levels is None or self.levels < 2):
            raise ValueError("discrete-grid requiere levels ≥ 2")
        return self

    @classmethod
    def create(cls, **kwargs) -> "DistributionSpec":
        """Construye la especificación convirtiendo errores de validación en DistributionError."""
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise DistributionError(f"❌ Distribución inválida: {e.errors()[0]['msg']}") from e

    def with_length(self, T: int) -> "DistributionSpec":
        return self.model_copy(update={'T': int(T)})

    @property
    def tag(self) -> str:
        return f"{self.kind}(n={self.n},T={self.T})"


@dataclass
class SequenceBatch:
    """
    Lote de secuencias.

    Attributes:
        tokens: (lote, T, n)
        labels: (lote, T, m) o None si aún no se etiquetó
        cot: trazas ocultas (lote, T, k) o None
        meta: distribución, semilla, maestro, tasa de aceptación
    """

    tokens: np.ndarray
    labels: Optional[np.ndarray] = None
    cot: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def length(self) -> int:
        return int(self.tokens.shape[1])


def _stream(seed: SeedLike, label: str) -> RngStream:
    return seed if isinstance(seed, RngStream) else RngStream(int(seed), label)


def _check_sizes(n: int, T: int, batch: int) -> None:
    if min(n, T, batch) < 1:
        raise DistributionError(f"❌ n, T y batch deben ser ≥ 1 (n={n}, T={T}, batch={batch})")


def band_satisfied(tokens: np.ndarray, halfwidth: float = 0.5) -> np.ndarray:
    """
    Indica qué secuencias cumplen la banda composicional en todas sus componentes.

    Args:
        tokens: (lote, T, n)

    Returns:
        np.ndarray: booleano (lote,)
    """
    desvio = np.sum(np.asarray(tokens) - 0.5, axis=1)
    return np.all(np.abs(desvio) <= halfwidth, axis=-1)


#  Muestreadores

def sample_uniform(n: int, T: int, batch: int, seed: SeedLike) -> SequenceBatch:
    """Tokens i.i.d. Uniform[0,1]ⁿ."""
    _check_sizes(n, T, batch)
    stream = _stream(seed, "datos/uniforme")
    tokens = stream.generator().random((batch, T, n))
    return SequenceBatch(tokens, meta={'distribution': "uniform-hypercube", 'seed': stream.seed,
                                       'stream': stream.stream_id})


def sample_compositional_train(
    n: int,
    T: int,
    batch: int,
    seed: SeedLike,
    halfwidth: float = 0.5,
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR,
) -> SequenceBatch:
    """
    Secuencias que cumplen −h ≤ Σ_j (x_jᵏ − 0.5) ≤ h para todo k.

    ALGORITMO:
        La restricción se factoriza por componente, así que cada columna x_{1..T}ᵏ
        se muestrea por rechazo de forma independiente. Es exactamente la
        distribución uniforme restringida a la banda y evita el colapso de la
        aceptación conjunta, que es el producto de las n aceptaciones por componente.

    Raises:
        SamplerAcceptanceError: Si la aceptación por componente cae bajo
            `acceptance_floor` (tras al menos 10⁴ propuestas) o se supera el
            tope de 10⁶ propuestas por muestra
    """
    _check_sizes(n, T, batch)
    rng = _stream(seed, "datos/banda").generator()
    columnas = np.empty((batch * n, T), dtype=DTYPE)
    pendientes = np.arange(batch * n)
    propuestas = 0
    aceptadas = 0
    while pendientes.size:
        # Propone en exceso según la aceptación observada
        tasa = aceptadas / propuestas if propuestas else 0.5
        cuantas = int(min(max(pendientes.size / max(tasa, 1e-3), 64), 1_000_000))
        candidatas = rng.random((cuantas, T))
        ok = candidatas[np.abs(np.sum(candidatas - 0.5, axis=1)) <= halfwidth]
        propuestas += cuantas
        aceptadas += len(ok)
        usar = min(len(ok), pendientes.size)
        columnas[pendientes[:usar]] = ok[:usar]
        pendientes = pendientes[usar:]
        tasa = aceptadas / propuestas
        if propuestas >= MIN_PROPOSALS_FOR_FLOOR and tasa < acceptance_floor:
            raise SamplerAcceptanceError(
                f"❌ Aceptación de la banda {tasa:.2e} < {acceptance_floor:.0e}; "
                f"reduzca T o n (la aceptación decae con T)",
                {'acceptance': tasa, 'T': T, 'n': n},
            )
        if pendientes.size and propuestas > MAX_PROPOSALS_PER_SAMPLE * batch * n:
            raise SamplerAcceptanceError(
                "❌ Se superó el tope de propuestas del muestreo por rechazo",
                {'proposals': propuestas, 'T': T, 'n': n},
            )
    tokens = columnas.reshape(batch, n, T).transpose(0, 2, 1).copy()
    tasa = aceptadas / propuestas
    return SequenceBatch(tokens, meta={
        'distribution': "compositional-band", 'component_acceptance': tasa,
        'sequence_acceptance': tasa ** n,
    })


def sample_corner_test(n: int, T: int, batch: int, seed: SeedLike, halfwidth: float = 0.5) -> SequenceBatch:
    """
    Secuencias del complemento de la banda: propuestas uniformes rechazadas
    cuando cumplen la banda en todas las componentes.
    """
    _check_sizes(n, T, batch)
    rng = _stream(seed, "datos/esquinas").generator()
    bloques = []
    obtenidas = 0
    propuestas = 0
    while obtenidas < batch:
        cuantas = max(2 * (batch - obtenidas), 64)
        candidatas = rng.random((cuantas, T, n))
        ok = candidatas[~band_satisfied(candidatas, halfwidth)]
        propuestas += cuantas
        bloques.append(ok)
        obtenidas += len(ok)
        if obtenidas < batch and propuestas > MAX_PROPOSALS_PER_SAMPLE * batch:
            raise SamplerAcceptanceError("❌ Se superó el tope de propuestas en el complemento")
    tokens = np.concatenate(bloques)[:batch]
    return SequenceBatch(tokens, meta={
        'distribution': "corner-complement", 'acceptance': obtenidas / propuestas,
    })


def sample_discrete(n: int, T: int, batch: int, levels: int, seed: SeedLike) -> SequenceBatch:
    """Cada componente uniforme en {0, 1/(levels−1), …, 1}."""
    _check_sizes(n, T, batch)
    if levels < 2:
        raise DistributionError(f"❌ levels debe ser ≥ 2 (recibido {levels})")
    rng = _stream(seed, "datos/discreto").generator()
    tokens = rng.integers(0, levels, size=(batch, T, n)) / (levels - 1)
    return SequenceBatch(tokens.astype(DTYPE), meta={'distribution': "discrete-grid", 'levels': levels})


def sample_tokens(dist: DistributionSpec, batch: int, seed: SeedLike) -> SequenceBatch:
    """Despacha al muestreador de la distribución."""
    if dist.kind == "uniform-hypercube":
        out = sample_uniform(dist.n, dist.T, batch, seed)
    elif dist.kind == "compositional-band":
        out = sample_compositional_train(dist.n, dist.T, batch, seed, dist.band_halfwidth,
                                         dist.acceptance_floor)
    elif dist.kind == "corner-complement":
        out = sample_corner_test(dist.n, dist.T, batch, seed, dist.band_halfwidth)
    else:
        out = sample_discrete(dist.n, dist.T, batch, dist.levels, seed)
    out.meta['distribution'] = dist.tag
    return out


def estimate_band_acceptance(T: int, proposals: int, seed: SeedLike, halfwidth: float = 0.5) -> float:
    """Fracción de propuestas uniformes escalares de longitud T que caen en la banda."""
    rng = _stream(seed, "datos/aceptacion").generator()
    x = rng.random((proposals, T, 1))
    return float(np.mean(band_satisfied(x, halfwidth)))


#  Volcado y carga de CSV

def batch_frame(batch: SequenceBatch) -> pd.DataFrame:
    """Lote en formato largo: seq_id, t, x0..x{n−1}, y0..y{m−1} (t desde 1)."""
    B, T, n = batch.tokens.shape
    datos = {
        'seq_id': np.repeat(np.arange(B), T),
        't': np.tile(np.arange(1, T + 1), B),
    }
    for i in range(n):
        datos[f'x{i}'] = batch.tokens[:, :, i].ravel()
    if batch.labels is not None:
        for i in range(batch.labels.shape[-1]):
            datos[f'y{i}'] = batch.labels[:, :, i].ravel()
    return pd.DataFrame(datos)


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Escribe un CSV con formato de flotantes fijo (reejecuciones byte a byte idénticas)."""
    ruta = Path(path)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(ruta, index=False, float_format=CSV_FLOAT_FORMAT, encoding='utf-8', lineterminator='\n')
    return ruta


def dump_batch_csv(batch: SequenceBatch, path: Union[str, Path]) -> Path:
    return write_csv(batch_frame(batch), path)


REPORT_COLUMNS = {
    'eval': ['model', 'family', 't', 'risk_mean', 'risk_std', 'r2_mean', 'r2_std', 'perm_score'],
    'trajectory': ['t'],
    'train': ['epoch', 'train_loss', 'val_loss', 'lr'],
}


def load_report_csv(path: Union[str, Path], kind: str = 'eval') -> pd.DataFrame:
    """
    Carga un reporte CSV del laboratorio y valida su integridad.

    Args:
        path: Ruta al CSV
        kind: 'eval', 'trajectory' o 'train'

    Returns:
        pd.DataFrame: Reporte validado

    Raises:
        FileNotFoundError: Si el archivo no existe
        ReportFormatError: Columnas faltantes, celdas no numéricas, riesgos
            negativos, R² > 1 o longitudes no positivas (nombra archivo y fila)

    Ejemplo de uso:
        >>> df = load_report_csv("runs/lengthgen/results.csv")
        >>> df.groupby('family')['risk_mean'].max()
    """
    archivo = Path(path)
    if not archivo.exists():
        raise FileNotFoundError(f"❌ No se encontró el archivo: {path}")
    try:
        df = pd.read_csv(archivo, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise ReportFormatError(str(path), None, "archivo vacío")
    except pd.errors.ParserError as e:
        raise ReportFormatError(str(path), None, f"error al parsear CSV: {e}")

    # Validación 1: columnas requeridas
    faltantes = [c for c in REPORT_COLUMNS[kind] if c not in df.columns]
    if faltantes:
        raise ReportFormatError(str(path), None, f"columnas faltantes: {faltantes}")
    if kind == 'trajectory' and not any(c.startswith('y_true') for c in df.columns):
        raise ReportFormatError(str(path), None, "sin columnas y_true*")
    if df.empty:
        raise ReportFormatError(str(path), None, "sin filas")

    # Validación 2: columnas numéricas
    numericas = [c for c in df.columns if c not in ('model', 'family')]
    for col in numericas:
        valores = pd.to_numeric(df[col], errors='coerce')
        malas = valores.isna() & df[col].notna()
        if malas.any():
            fila = int(np.flatnonzero(malas.to_numpy())[0]) + 1
            raise ReportFormatError(str(path), fila, f"valor no numérico en '{col}'")
        df[col] = valores

    # Validación 3: rangos
    chequeos = []
    if 't' in df.columns:
        chequeos.append(('t', df['t'] < 1, "t debe ser ≥ 1"))
    for col in ('risk_mean', 'risk_std', 'train_loss', 'val_loss'):
        if col in df.columns:
            chequeos.append((col, df[col] < 0, f"'{col}' negativo"))
    if 'r2_mean' in df.columns:
        chequeos.append(('r2_mean', df['r2_mean'] > 1 + 1e-9, "R² mayor que 1"))
    for _, mascara, razon in chequeos:
        if mascara.any():
            fila = int(np.flatnonzero(mascara.to_numpy())[0]) + 1
            raise ReportFormatError(str(path), fila, razon)
    return df
