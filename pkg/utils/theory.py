"""
theory.py: Herramientas teóricas verificables numéricamente

PROPÓSITO:
    - Clases finitas de hipótesis: umbral T0 de longitud de entrenamiento y
      conjuntos sobrevivientes
    - Aprendiz restringido sobre una η-cobertura del espacio de parámetros
    - Cotas de Lipschitz uniformes (bloque transformer y RNN) con sondas empíricas
    - Cota de complejidad de Rademacher (lema de Massart sobre la cobertura)

DEPENDENCIAS:
    - numpy: álgebra lineal
    - pandas: tablas de riesgos y sobrevivientes
    - scipy.special: sigmoide

TRAZABILIDAD:
    - Usado por: utils/experiments.py
    - Depende de: utils/architectures.py, utils/calculations.py
    - Importado desde: utils/__init__.py

CONVENCIONES:
    - Las longitudes se indexan desde 1; `horizon` es la mayor longitud sondeada.
    - Un T_h infinito se representa con None.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from .architectures import MlpSpec, ModelSpec, SequenceModel, build_model, build_spec
from .autodiff import RngStream
from .calculations import risk_at_length
from .data_loader import DistributionSpec, write_csv
from .errors import (
    ConfigError,
    ContractionViolatedError,
    CoverPreconditionError,
    EmptySurvivorSetError,
    GridPreconditionError,
)

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 200
MAX_COVER_POINTS = 5000
EXACT_TOLERANCE = 1e-10


#  Modelos escalares

def scalar_ssm(lam: float, b: float, w: float = 1.0, c: float = 0.0) -> SequenceModel:
    """SSM escalar h_t = λh_{t−1} + b x_t, y_t = w h_t + c (ω afín sin activación)."""
    spec = ModelSpec(
        family="ssm", n=1, m=1, k=1, capacity="high-capacity",
        omega=MlpSpec(1, 1, (), output_activation="none"),
    )
    return build_model(spec, {
        'lambda': [[lam]], 'b_in': [[b]], 'omega.w0': [[w]], 'omega.b0': [c],
    })


def scalar_ssm_coefficients(model: SequenceModel) -> Optional[Tuple[float, float, float, float]]:
    """(λ, b, w, c) si el modelo es un SSM escalar con ω afín; None en otro caso."""
    spec = getattr(model, 'spec', None)
    if (spec is None or spec.family != "ssm" or (spec.n, spec.m, spec.k) != (1, 1, 1)
            or spec.omega.hidden_dims or spec.omega.output_activation != "none"
            or getattr(model, 'family', '') == "degenerate"):
        return None
    p = model.params
    return (float(p['lambda'][0, 0]), float(p['b_in'][0, 0]),
            float(p['omega.w0'][0, 0]), float(p['omega.b0'][0]))


def scalar_ssm_exact_risk(entry: Sequence[float], teacher: Sequence[float], horizon: int) -> np.ndarray:
    """
    Riesgo exacto por longitud entre dos SSM escalares con tokens Uniform[0,1].

    Con Δy_t = Σ_j a_j x_{t−j} + Δc y a_j = w b λ^j − w* b* λ*^j:
        E[(Δy_t)²] = Σ_{j<t} a_j²/12 + (Σ_{j<t} a_j/2 + Δc)²

    Args:
        entry, teacher: (λ, b, w, c)
        horizon: Mayor longitud

    Returns:
        np.ndarray: (horizon,) riesgos para t = 1..horizon
    """
    lam, b, w, c = entry
    lam_s, b_s, w_s, c_s = teacher
    j = np.arange(horizon)
    with np.errstate(over='ignore', invalid='ignore'):
        a = w * b * np.power(lam, j) - w_s * b_s * np.power(lam_s, j)
    suma = np.cumsum(a)
    cuadrados = np.cumsum(a ** 2)
    return cuadrados / 12.0 + (suma / 2.0 + (c - c_s)) ** 2


def cumulative_risk(risks: Sequence[float], T: int) -> float:
    """R(h, T) = Σ_{t≤T} R̃(h, t); no decreciente en T."""
    return float(np.sum(np.asarray(risks, dtype=np.float64)[:T]))


def risk_curve(
    model: SequenceModel,
    teacher: SequenceModel,
    horizon: int,
    dist: Optional[DistributionSpec] = None,
    num_samples: int = 100_000,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Riesgos R̃(model, t) para t = 1..horizon y sus errores estándar.

    Exacto (error 0) para SSM escalares afines con tokens uniformes; Monte Carlo
    en otro caso.
    """
    ent, mae = scalar_ssm_coefficients(model), scalar_ssm_coefficients(teacher)
    if ent is not None and mae is not None and (dist is None or dist.kind == "uniform-hypercube"):
        return scalar_ssm_exact_risk(ent, mae, horizon), np.zeros(horizon)
    if dist is None:
        raise GridPreconditionError("❌ Se requiere una distribución para estimar riesgos por Monte Carlo")
    est = [risk_at_length(model, teacher, t, dist, num_samples, seed) for t in range(1, horizon + 1)]
    return np.array([e.mean for e in est]), np.array([e.std_err for e in est])


# Función 1: Clase finita de hipótesis
@dataclass
class HypothesisGrid:
    """
    Clase finita: ejes cuantizados por parámetro y entradas enumeradas.

    Attributes:
        axes: valores permitidos por parámetro (orden de los ejes = orden de la tupla)
        entries: tuplas de parámetros
        models: modelo construido por entrada
        risk_table: entrada × longitud (se llena en finite_class_t0)
    """

    axes: Dict[str, List[float]]
    entries: List[Tuple[float, ...]]
    models: List[SequenceModel]
    risk_table: Optional[pd.DataFrame] = None

    @classmethod
    def scalar_ssm(cls, lambdas: Sequence[float], bs: Sequence[float] = (1.0,),
                   ws: Sequence[float] = (1.0,)) -> "HypothesisGrid":
        """Rejilla de SSM escalares con ω(z) = w z."""
        ejes = {'lambda': [float(v) for v in lambdas], 'b': [float(v) for v in bs],
                'w': [float(v) for v in ws]}
        entradas = list(itertools.product(*ejes.values()))
        return cls(ejes, entradas, [scalar_ssm(l, b, w) for l, b, w in entradas])

    @classmethod
    def from_models(cls, models: Sequence[SequenceModel], labels: Optional[Sequence[str]] = None) -> "HypothesisGrid":
        """Rejilla explícita (p. ej., incluye transformaciones de similitud del maestro)."""
        etiquetas = list(labels) if labels is not None else [f"h{i}" for i in range(len(models))]
        return cls({'entry': etiquetas}, [(e,) for e in etiquetas], list(models))

    def index_of(self, teacher: SequenceModel) -> Optional[int]:
        for i, modelo in enumerate(self.models):
            if modelo.spec == teacher.spec and all(
                np.allclose(modelo.params[k], teacher.params[k], atol=1e-12) for k in teacher.params
            ):
                return i
        return None

    def to_dict(self) -> dict:
        return {'axes': self.axes, 'entries': [list(e) for e in self.entries]}


@dataclass
class FiniteClassResult:
    """Resultado de la certificación de una clase finita."""

    t_h: List[Optional[int]]
    t0: int
    tolerance: float
    horizon: int
    teacher_index: int
    risks: np.ndarray
    certified: bool

    def survivors(self, T: int) -> List[int]:
        """Entradas con riesgo ≤ tolerancia en todo t ≤ T."""
        return [i for i, th in enumerate(self.t_h) if th is None or th > T]

    def frame(self, grid: HypothesisGrid, T: int) -> pd.DataFrame:
        """Tabla de sobrevivientes: entry_id, parámetros, T_h, survives_at_T."""
        filas = []
        for i, entrada in enumerate(grid.entries):
            fila = {'entry_id': i}
            fila.update(dict(zip(grid.axes.keys(), entrada)))
            fila['T_h'] = -1 if self.t_h[i] is None else self.t_h[i]
            fila['survives_at_T'] = int(i in self.survivors(T))
            filas.append(fila)
        return pd.DataFrame(filas)


def finite_class_t0(
    grid: HypothesisGrid,
    teacher: SequenceModel,
    dist: Optional[DistributionSpec] = None,
    tolerance: Optional[float] = None,
    horizon: int = DEFAULT_HORIZON,
    num_samples: int = 100_000,
    seed: int = 0,
) -> FiniteClassResult:
    """
    Umbral T0 de una clase finita realizable.

    ALGORITMO:
        1. Riesgo por longitud de cada entrada frente al maestro (t = 1..horizon)
        2. T_h = menor t con riesgo > tolerancia (None si nunca ocurre)
        3. T0 = máximo de los T_h finitos (0 si no hay)
        4. Certificación: los sobrevivientes a T > T0 tienen riesgo ≤ tolerancia
           en todas las longitudes sondeadas, y el riesgo acumulado no decrece

    Args:
        grid: Rejilla de hipótesis (debe contener al maestro)
        teacher: Maestro
        dist: Distribución (None = tokens uniformes escalares, riesgo exacto)
        tolerance: Tolerancia de riesgo (por defecto 1e-10 exacto o 10× el error
            estándar Monte Carlo)
        horizon: Mayor longitud sondeada

    Raises:
        GridPreconditionError: Si el maestro no es una entrada de la rejilla

    Ejemplo de uso:
        >>> grid = HypothesisGrid.scalar_ssm([0.0, 0.5])
        >>> finite_class_t0(grid, scalar_ssm(0.5, 1.0)).t0
        2
    """
    indice = grid.index_of(teacher)
    if indice is None:
        raise GridPreconditionError(
            "❌ La rejilla no contiene al maestro (realizabilidad); refine los ejes",
            {'axes': grid.axes},
        )
    curvas, errores = zip(*(risk_curve(m, teacher, horizon, dist, num_samples, seed) for m in grid.models))
    riesgos = np.vstack(curvas)
    if tolerance is None:
        maximo_error = float(np.max(errores))
        tolerance = EXACT_TOLERANCE if maximo_error == 0 else 10.0 * maximo_error

    t_h: List[Optional[int]] = []
    for fila in riesgos:
        excede = np.flatnonzero(fila > tolerance)
        t_h.append(int(excede[0]) + 1 if excede.size else None)
    finitos = [t for t in t_h if t is not None]
    t0 = max(finitos) if finitos else 0

    acumulados = np.cumsum(riesgos, axis=1)
    monotono = bool(np.all(np.diff(acumulados, axis=1) >= -1e-15))
    sobrevivientes = [i for i, th in enumerate(t_h) if th is None]
    certificado = monotono and all(np.all(riesgos[i] <= tolerance) for i in sobrevivientes)

    grid.risk_table = pd.DataFrame(riesgos, columns=[f"t{t}" for t in range(1, horizon + 1)])
    logger.info(f"✅ Clase finita: T0={t0}, {len(sobrevivientes)}/{len(t_h)} entradas generalizan")
    return FiniteClassResult(
        t_h=t_h, t0=t0, tolerance=float(tolerance), horizon=horizon,
        teacher_index=indice, risks=riesgos, certified=certificado,
    )


# Función 2: Cobertura y aprendiz restringido
def scalar_ssm_lipschitz(lambda_sup: float, b_sup: float, x_sup: float = 1.0) -> float:
    """
    Constante de Lipschitz de θ = (λ, b) ↦ y_t para un SSM escalar con w = 1,
    |λ| ≤ λ_sup < 1, |b| ≤ b_sup y |x| ≤ x_sup, uniforme en t:
        L = x_sup·√((1/(1−λ_sup))² + (b_sup/(1−λ_sup)²)²)
    """
    if not 0 <= lambda_sup < 1:
        raise ContractionViolatedError(f"❌ Se requiere 0 ≤ λ_sup < 1 (recibido {lambda_sup})")
    return float(x_sup * math.hypot(1.0 / (1.0 - lambda_sup), b_sup / (1.0 - lambda_sup) ** 2))


@dataclass
class CoverSpec:
    """
    η-cobertura de una caja de parámetros.

    La rejilla es un retículo alineado con los ejes de paso 2η/√d (centros de
    celda), de modo que todo θ de la caja está a distancia euclidiana ≤ η de
    algún punto.
    """

    names: Tuple[str, ...]
    bounds: Tuple[Tuple[float, float], ...]
    eta: float
    lipschitz: float
    epsilon: float
    grid: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def size(self) -> int:
        return int(self.grid.shape[0])

    def nearest(self, theta: Sequence[float]) -> int:
        return int(np.argmin(np.linalg.norm(self.grid - np.asarray(theta, dtype=np.float64), axis=1)))

    def to_dict(self) -> dict:
        return {
            'names': list(self.names),
            'bounds': [list(b) for b in self.bounds],
            'eta': self.eta,
            'lipschitz': self.lipschitz,
            'epsilon': self.epsilon,
            'grid': self.grid.tolist(),
        }


def build_cover(
    names: Sequence[str],
    bounds: Sequence[Tuple[float, float]],
    epsilon: float,
    lipschitz: float,
    eta: Optional[float] = None,
    max_points: int = MAX_COVER_POINTS,
) -> CoverSpec:
    """
    Construye la η-cobertura con η = ε/L por defecto.

    Raises:
        CoverPreconditionError: Si η > ε/L, la caja es vacía o la cobertura
            supera `max_points`
    """
    if epsilon <= 0 or lipschitz <= 0:
        raise CoverPreconditionError("❌ ε y L deben ser positivos")
    eta = epsilon / lipschitz if eta is None else float(eta)
    if eta <= 0 or eta > epsilon / lipschitz * (1 + 1e-12):
        raise CoverPreconditionError(
            f"❌ η={eta:.4g} no cumple 0 < η ≤ ε/L = {epsilon / lipschitz:.4g}",
            {'eta': eta, 'epsilon': epsilon, 'lipschitz': lipschitz},
        )
    d = len(bounds)
    paso = 2.0 * eta / math.sqrt(d)
    ejes = []
    for lo, hi in bounds:
        if hi < lo:
            raise CoverPreconditionError(f"❌ Caja vacía: [{lo}, {hi}]")
        celdas = max(1, math.ceil((hi - lo) / paso - 1e-12))
        ejes.append(lo + paso * (np.arange(celdas) + 0.5))
    total = int(np.prod([len(e) for e in ejes]))
    if total > max_points:
        raise CoverPreconditionError(
            f"❌ La cobertura tendría {total} puntos (> {max_points}); reduzca la caja o aumente ε",
            {'points': total},
        )
    malla = np.array(list(itertools.product(*ejes)), dtype=np.float64)
    return CoverSpec(tuple(names), tuple((float(a), float(b)) for a, b in bounds), eta, lipschitz,
                     float(epsilon), malla)


def scalar_ssm_cover(
    lambda_bounds: Tuple[float, float],
    b_bounds: Tuple[float, float],
    epsilon: float,
    lambda_sup: Optional[float] = None,
    x_sup: float = 1.0,
) -> CoverSpec:
    """Cobertura (λ, b) de un SSM escalar con L de scalar_ssm_lipschitz."""
    lambda_sup = max(abs(lambda_bounds[0]), abs(lambda_bounds[1])) if lambda_sup is None else lambda_sup
    b_sup = max(abs(b_bounds[0]), abs(b_bounds[1]))
    lip = scalar_ssm_lipschitz(lambda_sup, b_sup, x_sup)
    return build_cover(("lambda", "b"), (lambda_bounds, b_bounds), epsilon, lip)


@dataclass
class SurvivorPath:
    """Conjuntos sobrevivientes A_T para T = 0..horizon."""

    sets: List[List[int]]
    risks: np.ndarray
    std_err: np.ndarray
    stabilized_at: int
    nested: bool

    @property
    def final(self) -> List[int]:
        return self.sets[-1]

    def frame(self, cover: CoverSpec, T: int) -> pd.DataFrame:
        filas = []
        for i, punto in enumerate(cover.grid):
            excede = np.flatnonzero(self.risks[i] > cover.epsilon)
            fila = {'entry_id': i}
            fila.update(dict(zip(cover.names, punto.tolist())))
            fila['T_h'] = int(excede[0]) + 1 if excede.size else -1
            fila['survives_at_T'] = int(i in self.sets[min(T, len(self.sets) - 1)])
            filas.append(fila)
        return pd.DataFrame(filas)


def _cover_models(cover: CoverSpec, builder: Callable[..., SequenceModel]) -> List[SequenceModel]:
    return [builder(*punto) for punto in cover.grid]


def constrained_survivors(
    cover: CoverSpec,
    teacher: SequenceModel,
    epsilon: Optional[float],
    T: int,
    dist: Optional[DistributionSpec] = None,
    builder: Callable[..., SequenceModel] = scalar_ssm,
    num_samples: int = 100_000,
    seed: int = 0,
) -> List[int]:
    """
    {θ ∈ Θ_c : R̃(θ, t) ≤ ε para todo 1 ≤ t ≤ T}.

    Raises:
        EmptySurvivorSetError: Si no sobrevive ningún punto (informa el punto
            más cercano a cumplir y su peor riesgo)
    """
    return survivor_path(cover, teacher, epsilon, T, dist, builder, num_samples, seed).sets[T]


def survivor_path(
    cover: CoverSpec,
    teacher: SequenceModel,
    epsilon: Optional[float] = None,
    horizon: int = DEFAULT_HORIZON,
    dist: Optional[DistributionSpec] = None,
    builder: Callable[..., SequenceModel] = scalar_ssm,
    num_samples: int = 100_000,
    seed: int = 0,
) -> SurvivorPath:
    """
    Sobrevivientes para cada T = 0..horizon y longitud de estabilización.

    Los conjuntos son anidados por construcción (cada T agrega una restricción);
    `stabilized_at` es el menor T desde el cual el conjunto no cambia hasta el horizonte.
    """
    epsilon = cover.epsilon if epsilon is None else float(epsilon)
    modelos = _cover_models(cover, builder)
    curvas, errores = zip(*(risk_curve(m, teacher, horizon, dist, num_samples, seed) for m in modelos))
    riesgos = np.vstack(curvas)
    peor = np.maximum.accumulate(riesgos, axis=1)

    conjuntos = [list(range(cover.size))]
    for T in range(1, horizon + 1):
        conjuntos.append([int(i) for i in np.flatnonzero(peor[:, T - 1] <= epsilon)])
    if not conjuntos[-1]:
        cercano = int(np.argmin(peor[:, -1]))
        raise EmptySurvivorSetError(
            "❌ Ningún punto de la cobertura sobrevive; revise la consistencia de η y L",
            {'nearest_miss': cover.grid[cercano].tolist(), 'worst_risk': float(peor[cercano, -1]),
             'epsilon': epsilon, 'eta': cover.eta, 'lipschitz': cover.lipschitz},
        )
    anidados = all(set(b) <= set(a) for a, b in zip(conjuntos, conjuntos[1:]))
    estable = horizon
    while estable > 0 and conjuntos[estable - 1] == conjuntos[-1]:
        estable -= 1
    logger.info(f"✅ Cobertura de {cover.size} puntos: {len(conjuntos[-1])} sobreviven; estable desde T={estable}")
    return SurvivorPath(conjuntos, riesgos, np.vstack(errores), estable, anidados)


# Función 3: Cotas de Lipschitz
class LipschitzConstants(BaseModel):
    """Constantes de las cotas de Lipschitz uniformes (todas ≥ 0)."""

    model_config = ConfigDict(extra='forbid')

    l_omega: float = Field(0.0, ge=0)
    m_omega: float = Field(0.0, ge=0)
    l_psi: float = Field(0.0, ge=0)
    l_sigma: float = Field(0.25, ge=0)
    lambda_sup: float = Field(0.0, ge=0)
    b_sup: float = Field(0.0, ge=0)
    x_sup: float = Field(0.0, ge=0)
    h_sup: float = Field(0.0, ge=0)
    w_sup: float = Field(0.0, ge=0)
    gamma1: float = Field(0.0, ge=0)
    gamma2: float = Field(0.0, ge=0)


def lipschitz_bound_transformer_block(l_omega: float, m_omega: float, l_psi: float) -> float:
    """√(L_ω² + M_ω²·L_ψ²) para un bloque y_i = ω((1/i) Σ_j ψ(x_i, x_j))."""
    if min(l_omega, m_omega, l_psi) < 0:
        raise ConfigError("❌ Las constantes de Lipschitz deben ser no negativas")
    return float(math.sqrt(l_omega ** 2 + (m_omega * l_psi) ** 2))


@dataclass(frozen=True)
class RnnLipschitzBound:
    """Cota de la RNN y sus términos intermedios."""

    bound: float
    printed_bound: float
    h_sup: float
    gamma1: float
    gamma2: float


def lipschitz_bound_rnn(constants: LipschitzConstants) -> RnnLipschitzBound:
    """
    Cota uniforme en t para h_t = σ(Λh_{t−1} + Bx_t), y_t = ω(h_t).

        h_sup = L_σ B_sup x_sup / (1 − L_σ Λ_sup)
        γ₁ = M_ω L_σ² B_sup x_sup / (1 − L_σ Λ_sup)²
        γ₂ = M_ω L_σ x_sup / (1 − L_σ Λ_sup)
        cota = √(L_ω² + γ₁² + γ₂²)

    `printed_bound` usa L_σ en lugar de L_ω en el primer término. Si `h_sup` > 0 se usa
    esa cota de ‖h_t‖ en γ₁ = M_ω L_σ h_sup / (1 − L_σ Λ_sup) (σ sin centrar: h_sup = √k).

    Raises:
        ContractionViolatedError: Si L_σ·Λ_sup ≥ 1
    """
    c = constants
    contraccion = c.l_sigma * c.lambda_sup
    if contraccion >= 1:
        raise ContractionViolatedError(
            f"❌ Se requiere L_σ·Λ_sup < 1 (recibido {contraccion:.4g})",
            {'l_sigma': c.l_sigma, 'lambda_sup': c.lambda_sup},
        )
    resto = 1.0 - contraccion
    h_sup = c.h_sup or c.l_sigma * c.b_sup * c.x_sup / resto
    gamma1 = c.m_omega * c.l_sigma * h_sup / resto
    gamma2 = c.m_omega * c.l_sigma * c.x_sup / resto
    return RnnLipschitzBound(
        bound=math.sqrt(c.l_omega ** 2 + gamma1 ** 2 + gamma2 ** 2),
        printed_bound=math.sqrt(c.l_sigma ** 2 + gamma1 ** 2 + gamma2 ** 2),
        h_sup=h_sup, gamma1=gamma1, gamma2=gamma2,
    )


def rnn_probe_constants(lambda_sup: float, b_sup: float, x_sup: float, w_sup: float) -> LipschitzConstants:
    """
    Constantes de la RNN de prueba: σ centrada (L_σ = ¼) y lectura lineal W con
    ‖W‖ ≤ w_sup, de modo que L_ω = h_sup y M_ω = w_sup.
    """
    parcial = lipschitz_bound_rnn(LipschitzConstants(
        l_sigma=0.25, lambda_sup=lambda_sup, b_sup=b_sup, x_sup=x_sup, m_omega=w_sup,
    ))
    return LipschitzConstants(
        l_omega=parcial.h_sup, m_omega=w_sup, l_sigma=0.25, lambda_sup=lambda_sup,
        b_sup=b_sup, x_sup=x_sup, h_sup=parcial.h_sup, gamma1=parcial.gamma1, gamma2=parcial.gamma2,
    )


def rnn_model_constants(lambda_sup: float, b_sup: float, w_sup: float, x_sup: float, k: int) -> LipschitzConstants:
    """
    Constantes de la RNN estructurada del laboratorio, h_t = σ(Λh + Bx), y = σ(A h),
    con ‖Λ‖₂ ≤ Λ_sup, ‖B‖₂ ≤ B_sup, ‖A‖₂ ≤ w_sup.

    h_t ∈ (0, 1)^k, así que h_sup = √k; ω = σ(A·) da L_ω = L_σ√k y M_ω = L_σ w_sup.
    """
    h_sup = math.sqrt(k)
    return LipschitzConstants(
        l_omega=0.25 * h_sup, m_omega=0.25 * w_sup, l_sigma=0.25, lambda_sup=lambda_sup,
        b_sup=b_sup, x_sup=x_sup, h_sup=h_sup, w_sup=w_sup,
    )


def transformer_model_constants(w_sup: float, x_sup: float, k: int) -> LipschitzConstants:
    """
    Constantes del transformer estructurado (atención sigmoide, media sobre j ≤ i, una
    cabeza) con todas las matrices y el sesgo de ω de norma ≤ w_sup.

        ‖ψ(θ) − ψ(θ')‖ ≤ a(‖ΔW_q‖ + ‖ΔW_k‖) + x_sup‖ΔW_v‖,  a = L_σ w_sup² x_sup³ / √k
        L_ψ = √(2a² + x_sup²),  L_ω = L_σ √((w_sup x_sup)² + 1),  M_ω = L_σ w_sup
    """
    a = 0.25 * w_sup ** 2 * x_sup ** 3 / math.sqrt(k)
    return LipschitzConstants(
        l_omega=0.25 * math.hypot(w_sup * x_sup, 1.0), m_omega=0.25 * w_sup,
        l_psi=math.sqrt(2 * a ** 2 + x_sup ** 2), x_sup=x_sup, w_sup=w_sup,
    )


@dataclass
class LipschitzProbeResult:
    """Cocientes empíricos ‖h(θ) − h(θ')‖ / ‖θ − θ'‖ frente a la cota analítica."""

    family: str
    bound: float
    max_ratio: float
    violations: int
    trials: int
    envelope: pd.DataFrame

    def to_dict(self) -> dict:
        return {
            'family': self.family, 'bound': self.bound, 'max_ratio': self.max_ratio,
            'violations': self.violations, 'trials': self.trials,
        }


def _scale_to_norm(g: np.ndarray, norm: float) -> np.ndarray:
    actual = np.linalg.norm(g, 2)
    return g * (norm / actual) if actual > 0 else g


def _ball(rng: np.random.Generator, shape: Tuple[int, ...], radius: float) -> np.ndarray:
    """Vectores (…, d) uniformes en dirección con norma ≤ radius."""
    g = rng.standard_normal(shape)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return g * radius * rng.random(shape[:-1] + (1,))


def _rnn_probe_outputs(lam, b, w, x):
    h = np.zeros(lam.shape[0])
    salidas = []
    for xt in x:
        h = special.expit(lam @ h + b @ xt) - 0.5
        salidas.append(w @ h)
    return np.array(salidas)


def _transformer_probe_outputs(wv, wo, x):
    n = x.shape[-1]
    T = x.shape[0]
    compuerta = special.expit(x @ x.T / math.sqrt(n))
    valores = np.tanh(x @ wv.T)
    pesos = np.tril(compuerta) / np.arange(1, T + 1)[:, None]
    return (pesos @ valores) @ wo.T


LIPSCHITZ_FAMILIES = ("rnn", "transformer", "rnn-model", "transformer-model")


def _lipschitz_setup(family: str, constants: Optional[LipschitzConstants], dims: Tuple[int, int, int]):
    """
    (constantes, cota, caja, salida(θ, x)) de cada familia; la caja asigna a cada
    parámetro su forma y la cota de su norma (None = sin restricción).
    """
    n, m, k = dims
    if family == "rnn":
        c = constants or rnn_probe_constants(lambda_sup=2.0, b_sup=1.0, x_sup=1.0, w_sup=1.0)
        caja = {'lambda': ((k, k), c.lambda_sup), 'b_in': ((k, n), c.b_sup), 'w': ((m, k), c.m_omega)}

        def salida(th, x):
            return _rnn_probe_outputs(th['lambda'], th['b_in'], th['w'], x)

        return c, lipschitz_bound_rnn(c).bound, caja, salida
    if family == "transformer":
        c = constants or LipschitzConstants(x_sup=1.0, m_omega=1.0)
        c = c.model_copy(update={'l_psi': c.x_sup, 'l_omega': math.sqrt(k)})
        caja = {'wv': ((k, n), None), 'wo': ((m, k), c.m_omega)}

        def salida(th, x):
            return _transformer_probe_outputs(th['wv'], th['wo'], x)

        return c, lipschitz_bound_transformer_block(c.l_omega, c.m_omega, c.l_psi), caja, salida
    if family == "rnn-model":
        base = constants or LipschitzConstants(lambda_sup=2.0, b_sup=1.0, w_sup=1.0, x_sup=1.0)
        c = rnn_model_constants(base.lambda_sup, base.b_sup, base.w_sup, base.x_sup, k)
        spec = build_spec("rnn", (k, k, k))
        caja = {'lambda': ((k, k), c.lambda_sup), 'b_in': ((k, k), c.b_sup), 'a_out': ((k, k), c.w_sup)}
        cota = lipschitz_bound_rnn(c).bound
    elif family == "transformer-model":
        base = constants or LipschitzConstants(w_sup=1.0, x_sup=1.0)
        c = transformer_model_constants(base.w_sup, base.x_sup, k)
        spec = build_spec("transformer", (n, m, k))
        caja = {nombre: (forma, c.w_sup) for nombre, forma in spec.param_shapes().items()}
        cota = lipschitz_bound_transformer_block(c.l_omega, c.m_omega, c.l_psi)
    else:
        raise ConfigError(f"❌ Familia sin sonda de Lipschitz: {family}. Use {LIPSCHITZ_FAMILIES}")

    def salida_modelo(th, x):
        return build_model(spec, th).predict(x).labels

    return c, cota, caja, salida_modelo


def empirical_lipschitz(
    family: str,
    constants: Optional[LipschitzConstants] = None,
    trials: int = 1000,
    seed: int = 0,
    max_t: int = 100,
    dims: Tuple[int, int, int] = (3, 2, 4),
) -> LipschitzProbeResult:
    """
    Máximo cociente empírico entre variaciones de la salida y de los parámetros.

    ALGORITMO:
        1. Sortear θ dentro de la caja de las constantes y θ' (la mitad de los
           ensayos como perturbación pequeña de θ, la otra mitad independiente)
        2. Sortear una secuencia con ‖x_t‖ ≤ x_sup
        3. Cociente por longitud t = 1..max_t; se guarda el máximo por t

    Familias:
        - 'rnn': h_t = (σ−½)(Λh + Bx), y = W h; θ = (Λ, B, W),
          ‖Λ‖₂ ≤ Λ_sup, ‖B‖₂ ≤ B_sup, ‖W‖₂ ≤ M_ω
        - 'transformer': ψ = σ(x_iᵀx_j/√n)·tanh(W_v x_j), y = W_o z; θ = (W_v, W_o),
          ‖W_o‖₂ ≤ M_ω, L_ψ = x_sup, L_ω = √k
        - 'rnn-model': RnnModel estructurado con n = m = k; θ = (Λ, B, A) con
          ‖Λ‖₂ ≤ Λ_sup, ‖B‖₂ ≤ B_sup, ‖A‖₂ ≤ w_sup (ver rnn_model_constants)
        - 'transformer-model': TransformerModel estructurado (sigmoide, una cabeza);
          todos los parámetros con norma ≤ w_sup (ver transformer_model_constants)

    Args:
        dims: (n, m, k); 'rnn-model' usa (k, k, k)

    Returns:
        LipschitzProbeResult: cota, máximo observado, violaciones y envolvente por t
    """
    c, cota, caja, salida = _lipschitz_setup(family, constants, dims)
    n = dims[2] if family == "rnn-model" else dims[0]
    rng = RngStream(int(seed), f"lipschitz/{family}").generator()
    maximos = np.zeros(max_t)

    def sortear() -> Dict[str, np.ndarray]:
        theta = {}
        for nombre, (forma, tope) in caja.items():
            g = rng.standard_normal(forma)
            theta[nombre] = g if tope is None else _scale_to_norm(g, tope * rng.random())
        return theta

    def limitar(theta: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        return {
            nombre: p if caja[nombre][1] is None
            else _scale_to_norm(p, min(np.linalg.norm(p, 2), caja[nombre][1]))
            for nombre, p in theta.items()
        }

    violaciones = 0
    for ensayo in range(trials):
        theta = sortear()
        if ensayo % 2 == 0:
            otro = sortear()
        else:
            otro = limitar({nombre: p + 1e-3 * rng.standard_normal(p.shape) for nombre, p in theta.items()})
        distancia = math.sqrt(sum(np.sum((theta[nombre] - otro[nombre]) ** 2) for nombre in caja))
        if distancia == 0:
            continue
        x = _ball(rng, (max_t, n), c.x_sup)
        diferencia = np.linalg.norm(salida(theta, x) - salida(otro, x), axis=-1)
        cocientes = diferencia / distancia
        maximos = np.maximum(maximos, cocientes)
        violaciones += int(np.sum(cocientes > cota * (1 + 1e-9)))

    envolvente = pd.DataFrame({'t': np.arange(1, max_t + 1), 'max_ratio': maximos})
    resultado = LipschitzProbeResult(family, float(cota), float(maximos.max()), violaciones, trials, envolvente)
    if violaciones:
        logger.warning(f"⚠️ {violaciones} cocientes superan la cota analítica ({family})")
    return resultado


# Función 4: Cota de Rademacher
def rademacher_bound(c: float, cover_size: int, m: int, T: int, epsilon: float) -> float:
    """
    2c·√(log N / (m T)) + ε  (lema de Massart sobre una ε-cobertura de N puntos).

    Args:
        c: Cota de la pérdida
        cover_size: N ≥ 1
        m: Número de secuencias ≥ 1
        T: Longitud ≥ 1
        epsilon: Radio de la cobertura
    """
    if cover_size < 1 or m < 1 or T < 1:
        raise ConfigError(f"❌ Se requiere N, m, T ≥ 1 (N={cover_size}, m={m}, T={T})")
    return float(2.0 * c * math.sqrt(math.log(cover_size) / (m * T)) + epsilon)


def write_theory_json(payload: dict, path: Union[str, Path]) -> Path:
    ruta = Path(path)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    ruta.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding='utf-8')
    return ruta
