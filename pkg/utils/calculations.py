"""
calculations.py: Métricas de evaluación

PROPÓSITO:
    Riesgos por longitud, curvas de generalización en longitud, identificación
    lineal (R² de la regresión entre representaciones aprendidas y verdaderas)
    y recuperación de permutaciones en RNNs.

DEPENDENCIAS:
    - numpy: operaciones numéricas
    - pandas: tablas de reportes
    - scipy.linalg: mínimos cuadrados (lstsq)

TRAZABILIDAD:
    - Usado por: utils/experiments.py, utils/theory.py
    - Depende de: utils/architectures.py, utils/data_loader.py
    - Importado desde: utils/__init__.py
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import linalg

from .architectures import AnyModel, DegenerateTeacher
from .autodiff import RngStream
from .data_loader import DistributionSpec, sample_tokens, write_csv
from .errors import ConfigError, HiddenDimMismatchError, ShapeMismatchError

logger = logging.getLogger(__name__)

EVAL_CHUNK = 1024
OFF_ARGMAX_TOLERANCE = 0.1


def _predict_chunked(model: AnyModel, tokens: np.ndarray, chunk: int = EVAL_CHUNK):
    etiquetas, ocultos = [], []
    for inicio in range(0, tokens.shape[0], chunk):
        out = model.predict(tokens[inicio:inicio + chunk])
        etiquetas.append(out.labels)
        ocultos.append(out.hidden)
    return np.concatenate(etiquetas), np.concatenate(ocultos)


def _labels_only(model: AnyModel, tokens: np.ndarray, chunk: int = EVAL_CHUNK) -> np.ndarray:
    return _predict_chunked(model, tokens, chunk)[0]


# Función 1: Riesgo a una longitud fija
@dataclass(frozen=True)
class RiskEstimate:
    """Estimación Monte Carlo de R̃(h, t) = E[ℓ(y_t, h(x_{≤t}))]."""

    t: int
    mean: float
    std_err: float
    num_samples: int


def risk_at_length(
    student: AnyModel,
    teacher: AnyModel,
    t: int,
    dist: DistributionSpec,
    num_samples: int,
    seed: int,
) -> RiskEstimate:
    """
    Error cuadrático esperado exactamente en la longitud t.

    ALGORITMO:
        1. Muestrear num_samples secuencias de longitud t de `dist`
        2. Comparar las salidas en la posición t con ‖ŷ_t − y_t‖² (suma sobre dimensiones de salida)
        3. Media y error estándar sobre las secuencias

    Args:
        student: Modelo evaluado
        teacher: Maestro (define las etiquetas)
        t: Longitud (≥ 1)
        dist: Distribución de evaluación (se ajusta su T a t)
        num_samples: Número de secuencias (≥ 1)
        seed: Semilla del flujo de evaluación

    Returns:
        RiskEstimate: Media y error estándar

    Ejemplo de uso:
        >>> risk_at_length(maestro, maestro, 20, dist, 10_000, seed=0).mean
        0.0
    """
    if t < 1 or num_samples < 1:
        raise ConfigError(f"❌ Se requiere t ≥ 1 y num_samples ≥ 1 (t={t}, num_samples={num_samples})")
    lote = sample_tokens(dist.with_length(t), num_samples, RngStream(int(seed), f"eval/t{t}"))
    y_est = _labels_only(student, lote.tokens)[:, t - 1]
    y_true = _labels_only(teacher, lote.tokens)[:, t - 1]
    perdidas = np.sum((y_est - y_true) ** 2, axis=-1)
    error = float(np.std(perdidas, ddof=1) / np.sqrt(num_samples)) if num_samples > 1 else 0.0
    return RiskEstimate(t=int(t), mean=float(np.mean(perdidas)), std_err=error, num_samples=num_samples)


def positionwise_risk(student: AnyModel, teacher: AnyModel, tokens: np.ndarray) -> np.ndarray:
    """Riesgo ‖ŷ_t − y_t‖² promediado sobre el lote en cada posición t = 1..T. Forma (T,)."""
    diferencia = _labels_only(student, tokens) - _labels_only(teacher, tokens)
    return np.mean(np.sum(diferencia ** 2, axis=2), axis=0)


# Función 2: Identificación lineal
@dataclass
class IdentificationResult:
    """R² de la regresión φ ≈ Wψ + b (verdadera sobre aprendida)."""

    r2_per_dim: np.ndarray
    r2_mean: float
    degenerate: bool
    coef: np.ndarray


def linear_identification_r2(learned: np.ndarray, true: np.ndarray) -> IdentificationResult:
    """
    Ajusta por mínimos cuadrados ordinarios φ ≈ Wψ + b y calcula R² por dimensión.

    R² = 1 − SS_res / SS_tot en cada dimensión de φ. Una dimensión constante
    vale 1 si se reproduce exactamente y 0 si no. Un diseño de rango
    deficiente se ajusta con la pseudo-inversa y se marca `degenerate`.

    Args:
        learned: ψ, forma (muestras, k_aprendida)
        true: φ, forma (muestras, k_verdadera)

    Raises:
        ShapeMismatchError: Si las muestras no coinciden o son menos que k_aprendida + 1
    """
    psi = np.asarray(learned, dtype=np.float64)
    phi = np.asarray(true, dtype=np.float64)
    if psi.ndim == 1:
        psi = psi[:, None]
    if phi.ndim == 1:
        phi = phi[:, None]
    if psi.shape[0] != phi.shape[0] or psi.shape[0] < psi.shape[1] + 1:
        raise ShapeMismatchError("linear_identification_r2", psi.shape, phi.shape)

    diseno = np.hstack([psi, np.ones((psi.shape[0], 1))])
    coef, _, rango, _ = linalg.lstsq(diseno, phi)
    residuo = phi - diseno @ coef
    ss_res = np.sum(residuo ** 2, axis=0)
    ss_tot = np.sum((phi - phi.mean(axis=0)) ** 2, axis=0)
    escala = np.maximum(np.sum(phi ** 2, axis=0), 1.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        r2 = np.where(
            ss_tot > 1e-12 * escala,
            1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0),
            np.where(ss_res <= 1e-12 * escala, 1.0, 0.0),
        )
    degenerado = int(rango) < diseno.shape[1]
    if degenerado:
        logger.debug(f"Diseño de rango deficiente ({rango} < {diseno.shape[1]}): ajuste por pseudo-inversa")
    return IdentificationResult(r2_per_dim=r2, r2_mean=float(np.mean(r2)), degenerate=degenerado, coef=coef)


def identification_r2(student: AnyModel, teacher: AnyModel, tokens: np.ndarray) -> Dict[str, object]:
    """
    R² de identificación por posición: media sobre dimensiones en cada posición
    y luego media sobre posiciones.

    Las representaciones son las sumas prefijo (deep set), los agregados de
    atención (transformer) o h_t (SSM/RNN).

    Returns:
        dict: r2_mean, r2_by_position (lista), degenerate (bool)
    """
    _, aprendidas = _predict_chunked(student, tokens)
    _, verdaderas = _predict_chunked(teacher, tokens)
    por_posicion, degenerado = [], False
    for i in range(tokens.shape[1]):
        res = linear_identification_r2(aprendidas[:, i, :], verdaderas[:, i, :])
        por_posicion.append(res.r2_mean)
        degenerado = degenerado or res.degenerate
    return {
        'r2_mean': float(np.mean(por_posicion)),
        'r2_by_position': por_posicion,
        'degenerate': degenerado,
    }


# Función 3: Recuperación de permutaciones
@dataclass
class PermutationResult:
    """Mapa lineal M (h_maestro ≈ M h_estudiante) y su estructura de permutación."""

    score: float
    assignment: np.ndarray
    is_permutation: bool
    matrix: np.ndarray


def permutation_recovery(student: AnyModel, teacher: AnyModel, probe_tokens: np.ndarray) -> PermutationResult:
    """
    Ajusta M con h_maestro ≈ M h_estudiante sobre todas las posiciones de las
    secuencias de prueba y mide cuán cerca está M de una permutación.

    Una fila cuenta si su columna de máximo |M| no la comparte otra fila y la
    norma fuera del máximo es ≤ 0.1 de la norma de la fila.

    Returns:
        PermutationResult: score = fracción de filas que cuentan; assignment[r]
        = columna de máximo de la fila r

    Raises:
        HiddenDimMismatchError: Si las dimensiones ocultas difieren
    """
    if student.hidden_dim != teacher.hidden_dim:
        raise HiddenDimMismatchError(
            f"❌ Dimensiones ocultas distintas: {student.hidden_dim} vs {teacher.hidden_dim}",
            {'student': student.hidden_dim, 'teacher': teacher.hidden_dim},
        )
    _, h_est = _predict_chunked(student, probe_tokens)
    _, h_true = _predict_chunked(teacher, probe_tokens)
    k = h_est.shape[-1]
    x = h_est.reshape(-1, k)
    y = h_true.reshape(-1, k)
    solucion, _, _, _ = linalg.lstsq(x, y)
    m = solucion.T

    magnitudes = np.abs(m)
    asignacion = np.argmax(magnitudes, axis=1)
    columnas, cuentas = np.unique(asignacion, return_counts=True)
    compartidas = set(columnas[cuentas > 1].tolist())
    filas_ok = 0
    for r in range(k):
        fuera = m[r].copy()
        fuera[asignacion[r]] = 0.0
        norma = np.linalg.norm(m[r])
        if asignacion[r] not in compartidas and norma > 0 and np.linalg.norm(fuera) <= OFF_ARGMAX_TOLERANCE * norma:
            filas_ok += 1
    return PermutationResult(
        score=filas_ok / k,
        assignment=asignacion,
        is_permutation=not compartidas,
        matrix=m,
    )


def parameter_distance(student: AnyModel, teacher: AnyModel, names: Sequence[str]) -> Dict[str, float]:
    """Distancia de Frobenius ‖θ_est − θ_maestro‖ por parámetro."""
    return {
        nombre: float(np.linalg.norm(student.params[nombre] - teacher.params[nombre]))
        for nombre in names
    }


# Función 4: Curva de generalización en longitud
EVAL_COLUMNS = ['model', 'family', 't', 'risk_mean', 'risk_std', 'r2_mean', 'r2_std', 'perm_score']


@dataclass
class EvalReport:
    """Tabla de riesgos por longitud (media ± desviación sobre semillas) y metadatos."""

    rows: List[dict] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=EVAL_COLUMNS)

    def risk(self, t: int, model: Optional[str] = None) -> float:
        df = self.frame
        if model is not None:
            df = df[df['model'] == model]
        return float(df.loc[df['t'] == t, 'risk_mean'].iloc[0])

    def extend(self, other: "EvalReport") -> "EvalReport":
        return EvalReport(rows=self.rows + other.rows, meta={**self.meta, **other.meta})

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(self.frame, path)

    def to_dict(self) -> dict:
        return {'rows': self.frame.to_dict(orient='records'), 'meta': self.meta}

    def to_json(self, path: Union[str, Path]) -> Path:
        ruta = Path(path)
        ruta.parent.mkdir(parents=True, exist_ok=True)
        ruta.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2, default=json_default),
                        encoding='utf-8')
        return ruta


def json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"No serializable: {type(obj)}")


def _family(model: AnyModel) -> str:
    base = model.base if isinstance(model, DegenerateTeacher) else model
    return base.spec.family


def length_gen_curve(
    students: Union[AnyModel, Sequence[AnyModel]],
    teacher: AnyModel,
    lengths: Sequence[int],
    dist: DistributionSpec,
    seeds: Sequence[int],
    num_samples: int = 10_000,
    model_name: str = "student",
    id_sequences: Optional[int] = None,
) -> EvalReport:
    """
    Riesgo por longitud (más allá de la longitud de entrenamiento) sobre semillas.

    Args:
        students: Un estudiante o uno por semilla (mismo orden que seeds)
        teacher: Maestro
        lengths: Longitudes estrictamente crecientes
        dist: Distribución de evaluación
        seeds: Semillas (una fila de riesgo por semilla antes de promediar)
        num_samples: Secuencias por (longitud, semilla)
        model_name: Nombre del modelo en la columna `model`
        id_sequences: Si se indica, calcula el R² de identificación con ese número
            de secuencias de prueba; para RNNs también el puntaje de permutación

    Returns:
        EvalReport: Una fila por longitud

    Raises:
        ConfigError: Si lengths está vacío o no es estrictamente creciente
    """
    lengths = [int(t) for t in lengths]
    if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ConfigError(f"❌ Las longitudes deben ser no vacías y estrictamente crecientes: {lengths}")
    if isinstance(students, (list, tuple)):
        if len(students) != len(seeds):
            raise ConfigError("❌ Se requiere un estudiante por semilla")
        por_semilla = list(students)
    else:
        por_semilla = [students] * len(seeds)

    familia = _family(por_semilla[0])
    permutacion = [np.nan] * len(seeds)
    if id_sequences and familia == "rnn" and _family(teacher) == "rnn":
        for s, (semilla, est) in enumerate(zip(seeds, por_semilla)):
            sonda = sample_tokens(dist, id_sequences, RngStream(int(semilla), "eval/permutacion"))
            permutacion[s] = permutation_recovery(est, teacher, sonda.tokens).score

    filas = []
    for t in lengths:
        riesgos, r2s = [], []
        for semilla, est in zip(seeds, por_semilla):
            riesgos.append(risk_at_length(est, teacher, t, dist, num_samples, semilla).mean)
            if id_sequences:
                sonda = sample_tokens(dist.with_length(t), id_sequences,
                                      RngStream(int(semilla), f"eval/identificacion/t{t}"))
                r2s.append(identification_r2(est, teacher, sonda.tokens)['r2_mean'])
        filas.append({
            'model': model_name,
            'family': familia,
            't': t,
            'risk_mean': float(np.mean(riesgos)),
            'risk_std': float(np.std(riesgos)),
            'r2_mean': float(np.mean(r2s)) if r2s else np.nan,
            'r2_std': float(np.std(r2s)) if r2s else np.nan,
            'perm_score': float(np.nanmean(permutacion)) if not np.all(np.isnan(permutacion)) else np.nan,
        })
        logger.debug(f"t={t}: riesgo={filas[-1]['risk_mean']:.3e}")
    return EvalReport(rows=filas, meta={
        'teacher': _family(teacher),
        'distribution': dist.tag,
        'seeds': [int(s) for s in seeds],
        'num_samples': num_samples,
    })


# Función 5: Trayectoria de una secuencia
def trajectory_frame(student: AnyModel, teacher: AnyModel, tokens: np.ndarray) -> pd.DataFrame:
    """
    Etiquetas verdaderas y predichas de una sola secuencia (T, n).

    Returns:
        pd.DataFrame: columnas t, y_true0.., y_pred0..
    """
    x = np.asarray(tokens, dtype=np.float64)
    if x.ndim == 3:
        x = x[0]
    y_true = teacher.predict(x).labels
    y_pred = student.predict(x).labels
    datos = {'t': np.arange(1, x.shape[0] + 1)}
    for i in range(y_true.shape[-1]):
        datos[f'y_true{i}'] = y_true[:, i]
    for i in range(y_pred.shape[-1]):
        datos[f'y_pred{i}'] = y_pred[:, i]
    return pd.DataFrame(datos)
