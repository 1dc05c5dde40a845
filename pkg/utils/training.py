"""
training.py: Entrenamiento por minimización del riesgo (ERM) y con supervisión CoT

PROPÓSITO:
    Bucles de entrenamiento sobre lotes generados en línea con AdamW (decaimiento
    de pesos desacoplado) y reducción de la tasa de aprendizaje en meseta,
    con los hiperparámetros por defecto de la configuración experimental de referencia.

DEPENDENCIAS:
    - numpy: actualización de parámetros
    - pydantic: validación de TrainConfig
    - tqdm: barra de progreso por época
    - pandas: exportación del TrainReport a CSV

TRAZABILIDAD:
    - Usado por: utils/experiments.py
    - Importado desde: utils/__init__.py

NOTAS:
    - La pérdida es ‖ŷ_t − y_t‖² (suma sobre dimensiones de salida) promediada
      sobre posiciones t = 1..T y el lote. Sumar sobre t en lugar de promediar no cambia
      el minimizador para T fijo.
    - Sin recorte de gradientes.
"""

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from tqdm import tqdm

from .architectures import AnyModel, SequenceModel
from .autodiff import DTYPE, Node, Tape, backward
from .data_loader import DistributionSpec, SequenceBatch, write_csv
from .errors import ConfigError, NonFiniteError, ShapeMismatchError, TrainingDivergedError
from .preprocessing import check_cot_compatible, position_weights, streaming_batch

logger = logging.getLogger(__name__)

COT_WEIGHT = 1.0


class TrainConfig(BaseModel):
    """Hiperparámetros de entrenamiento (valores por defecto de la configuración de referencia)."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    lr: float = Field(1e-3, gt=0)
    weight_decay: float = Field(0.01, ge=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.95, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    plateau_factor: float = Field(0.8, gt=0, lt=1)
    plateau_threshold: float = Field(1e-6, ge=0)
    cooldown_epochs: int = Field(1, ge=0)
    min_lr: float = Field(1e-7, gt=0)
    batch_size: int = Field(256, ge=1)
    batches_per_epoch: int = Field(100, ge=1)
    epochs: int = Field(100, ge=1)
    validation_batches: int = Field(10, ge=1)
    loss: Literal["label-only", "label-plus-cot"] = "label-only"
    seed: int = 0
    final_label_only: bool = False
    skip_first_position: bool = False
    frozen: Tuple[str, ...] = ()
    progress: bool = True

    @model_validator(mode='after')
    def _validar(self):
        if self.min_lr > self.lr:
            raise ValueError(f"min_lr ({self.min_lr}) no puede superar lr ({self.lr})")
        return self

    @classmethod
    def create(cls, **kwargs) -> "TrainConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            primero = e.errors()[0]
            campo = ".".join(str(p) for p in primero['loc'])
            raise ConfigError(f"❌ TrainConfig inválido ({campo}): {primero['msg']}") from e


#  Optimizador

@dataclass
class OptimizerState:
    """Momentos de AdamW por parámetro, contador de pasos y tasa actual."""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-3

    @classmethod
    def create(cls, params: Dict[str, np.ndarray], lr: float) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
            lr=float(lr),
        )


def adamw_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: OptimizerState,
    config: TrainConfig,
) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """
    Un paso de AdamW con corrección de sesgo y decaimiento desacoplado.

    θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ  (ambos términos con el θ anterior)

    Los parámetros sin gradiente (congelados) no cambian.

    Returns:
        (params, state): nuevos diccionarios; las entradas no se modifican
    """
    paso = state.step + 1
    b1, b2 = config.beta1, config.beta2
    lr, wd = state.lr, config.weight_decay
    nuevos, m, v = {}, {}, {}
    for nombre, theta in params.items():
        g = grads.get(nombre)
        if g is None or nombre in config.frozen:
            nuevos[nombre] = theta
            m[nombre], v[nombre] = state.m[nombre], state.v[nombre]
            continue
        m[nombre] = b1 * state.m[nombre] + (1 - b1) * g
        v[nombre] = b2 * state.v[nombre] + (1 - b2) * g * g
        m_hat = m[nombre] / (1 - b1 ** paso)
        v_hat = v[nombre] / (1 - b2 ** paso)
        nuevos[nombre] = theta - lr * m_hat / (np.sqrt(v_hat) + config.eps) - lr * wd * theta
    return nuevos, OptimizerState(m=m, v=v, step=paso, lr=lr)


@dataclass(frozen=True)
class PlateauState:
    """Estado de la reducción en meseta."""

    lr: float
    best: Optional[float] = None
    bad_epochs: int = 0
    cooldown: int = 0
    seen: int = 0
    reductions: int = 0


def plateau_schedule(history: List[float], state: PlateauState, config: TrainConfig) -> PlateauState:
    """
    Procesa las pérdidas de validación aún no vistas de `history`.

    Reduce lr por `plateau_factor` cuando la mejora respecto de la mejor pérdida
    es menor que `plateau_threshold` (absoluto); tras cada reducción, las épocas
    de enfriamiento se ignoran. lr nunca baja de `min_lr`.

    Ejemplo de uso:
        >>> cfg = TrainConfig()
        >>> plateau_schedule([1.0, 1.0], PlateauState(lr=1e-3), cfg).lr
        0.0008
    """
    st = state
    for perdida in history[state.seen:]:
        best, malas, enfriamiento = st.best, st.bad_epochs, st.cooldown
        if best is None or perdida < best - config.plateau_threshold:
            best, malas = perdida, 0
        else:
            malas += 1
        if enfriamiento > 0:
            enfriamiento -= 1
            malas = 0
        lr, reducciones = st.lr, st.reductions
        if malas > 0 and lr > config.min_lr:
            lr = max(lr * config.plateau_factor, config.min_lr)
            reducciones += 1
            enfriamiento = config.cooldown_epochs
            malas = 0
            logger.debug(f"Meseta: lr reducido a {lr:.3e}")
        st = PlateauState(lr=lr, best=best, bad_epochs=malas, cooldown=enfriamiento,
                          seen=st.seen + 1, reductions=reducciones)
    return st


#  Reporte

class TrainReport(BaseModel):
    """Trayectoria del entrenamiento por época."""

    train_loss: List[float] = []
    val_loss: List[float] = []
    lr: List[float] = []
    steps: int = 0
    wall_time: float = 0.0
    loss: str = "label-only"

    @property
    def final_val_loss(self) -> float:
        return self.val_loss[-1] if self.val_loss else float('nan')

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'epoch': np.arange(1, len(self.train_loss) + 1),
            'train_loss': self.train_loss,
            'val_loss': self.val_loss,
            'lr': self.lr,
        })

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(self.to_frame(), path)

    def to_json(self, path: Union[str, Path]) -> Path:
        ruta = Path(path)
        ruta.parent.mkdir(parents=True, exist_ok=True)
        ruta.write_text(json.dumps(self.model_dump(), sort_keys=True, indent=2), encoding='utf-8')
        return ruta


#  Objetivo

def _weighted_mse(tape: Tape, pred: Node, target: Node, weights: Optional[np.ndarray]) -> Node:
    if weights is None:
        return tape.squared_error(pred, target)
    diff = tape.sub(pred, target)
    w = np.broadcast_to(weights[:, None], pred.shape[-2:]).copy()
    cuadrados = tape.mul(tape.mul(diff, diff), tape.constant(w))
    return tape.reduce_mean(tape.reduce_sum(cuadrados, axis=-1))


def batch_objective(
    model: SequenceModel,
    batch: SequenceBatch,
    config: TrainConfig,
    tape: Optional[Tape] = None,
) -> Tuple[Node, Tape]:
    """
    Pérdida del lote: error de etiquetas (más error de trazas si loss='label-plus-cot').

    Returns:
        (pérdida escalar, tape usado)
    """
    tape = tape or Tape()
    T = batch.length
    pesos = None
    if config.final_label_only or config.skip_first_position:
        pesos = position_weights(T, config.final_label_only, config.skip_first_position)
    out = model.forward(tape, batch.tokens, config.frozen)
    perdida = _weighted_mse(tape, out.labels, tape.constant(batch.labels), pesos)
    if config.loss == "label-plus-cot":
        traza = _weighted_mse(tape, out.hidden, tape.constant(batch.cot), pesos)
        perdida = tape.add(perdida, tape.scale(traza, COT_WEIGHT))
    return perdida, tape


def _check_compatible(student: SequenceModel, teacher: AnyModel, config: TrainConfig) -> None:
    if student.n != teacher.n or student.m != teacher.m:
        raise ShapeMismatchError("estudiante/maestro", (student.n, student.m), (teacher.n, teacher.m))
    desconocidos = set(config.frozen) - set(student.params)
    if desconocidos:
        raise ConfigError(f"❌ Parámetros congelados desconocidos: {sorted(desconocidos)}")


def _train(
    student: SequenceModel,
    teacher: AnyModel,
    dist: DistributionSpec,
    config: TrainConfig,
) -> Tuple[SequenceModel, TrainReport]:
    _check_compatible(student, teacher, config)
    usa_cot = config.loss == "label-plus-cot"
    if usa_cot:
        check_cot_compatible(student, teacher)
    if student.spec.t_max is not None and dist.T < student.spec.t_max:
        logger.warning(f"⚠️ T={dist.T} < t_max={student.spec.t_max}: núcleos posicionales sin datos")

    params = {k: v.copy() for k, v in student.params.items()}
    opt = OptimizerState.create(params, config.lr)
    meseta = PlateauState(lr=config.lr)
    reporte = TrainReport(loss=config.loss)
    inicio = time.perf_counter()

    epocas = tqdm(range(config.epochs), desc="Entrenamiento", disable=not config.progress, leave=False)
    for epoca in epocas:
        perdidas = []
        for b in range(config.batches_per_epoch):
            lote = streaming_batch(teacher, dist, config.batch_size, config.seed, "train", epoca, b, usa_cot)
            modelo = student.with_params(params)
            try:
                perdida, tape = batch_objective(modelo, lote, config)
                grads = backward(tape, perdida)
            except NonFiniteError:
                raise TrainingDivergedError(opt.lr, epoca, b, float('nan'))
            valor = float(perdida.value)
            params, opt = adamw_step(params, grads, opt, config)
            if not np.isfinite(valor) or not all(np.all(np.isfinite(p)) for p in params.values()):
                raise TrainingDivergedError(opt.lr, epoca, b, valor)
            perdidas.append(valor)

        modelo = student.with_params(params)
        validacion = []
        for b in range(config.validation_batches):
            lote = streaming_batch(teacher, dist, config.batch_size, config.seed, "val", epoca, b, usa_cot)
            try:
                validacion.append(float(batch_objective(modelo, lote, config, Tape(record=False))[0].value))
            except NonFiniteError:
                raise TrainingDivergedError(opt.lr, epoca, -1, float('nan'))

        reporte.train_loss.append(float(np.mean(perdidas)))
        reporte.val_loss.append(float(np.mean(validacion)))
        reporte.lr.append(opt.lr)
        meseta = plateau_schedule(reporte.val_loss, meseta, config)
        opt = replace(opt, lr=meseta.lr)
        epocas.set_postfix(loss=f"{reporte.train_loss[-1]:.2e}", lr=f"{opt.lr:.1e}")
        logger.debug(f"Época {epoca + 1}: train={reporte.train_loss[-1]:.3e} "
                     f"val={reporte.val_loss[-1]:.3e} lr={opt.lr:.2e}")

    reporte.steps = opt.step
    reporte.wall_time = time.perf_counter() - inicio
    logger.info(f"✅ Entrenamiento finalizado ({config.loss}): val={reporte.final_val_loss:.3e} "
                f"en {reporte.wall_time:.1f}s")
    return student.with_params(params), reporte


def erm_train(
    student: SequenceModel,
    teacher: AnyModel,
    dist: DistributionSpec,
    config: TrainConfig,
) -> Tuple[SequenceModel, TrainReport]:
    """
    Minimiza el riesgo empírico sobre prefijos t = 1..T con lotes generados en línea.

    Args:
        student: Modelo inicial (no se modifica)
        teacher: Maestro que etiqueta los lotes
        dist: Distribución de entrenamiento (longitud T = dist.T)
        config: Hiperparámetros

    Returns:
        (estudiante entrenado, TrainReport)

    Raises:
        TrainingDivergedError: Pérdida o parámetros no finitos (informa lr, época y lote)
    """
    if config.loss != "label-only":
        config = config.model_copy(update={'loss': "label-only"})
    return _train(student, teacher, dist, config)


def cot_train(
    student: SequenceModel,
    teacher: AnyModel,
    dist: DistributionSpec,
    config: TrainConfig,
) -> Tuple[SequenceModel, TrainReport]:
    """
    Entrena con pérdida de etiquetas + pérdida de trazas intermedias (peso 1 cada una).

    Raises:
        HiddenDimMismatchError: Si las dimensiones ocultas no coinciden
    """
    check_cot_compatible(student, teacher)
    return _train(student, teacher, dist, config.model_copy(update={'loss': "label-plus-cot"}))
