"""
config.py: Configuración de experimentos

PROPÓSITO:
    Modelo pydantic de la configuración de un experimento, presets de escala
    (smoke, desk, paper), lectura de archivos TOML con precedencia
    preset < archivo < banderas de la CLI, y hash estable de la configuración.

DEPENDENCIAS:
    - pydantic: validación
    - toml: archivos de configuración editables a mano

TRAZABILIDAD:
    - Usado por: utils/experiments.py, utils/cli.py
    - Importado desde: utils/__init__.py
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .training import TrainConfig

logger = logging.getLogger(__name__)

Experiment = Literal["lengthgen", "compgen", "failure", "cot", "nonrealizable",
                     "finite", "cover", "lipschitz", "discrete"]
Family = Literal["deepset", "transformer", "ssm", "rnn"]
Capacity = Literal["structured-perceptron", "structured-diffeo", "high-capacity"]
Scale = Literal["smoke", "desk", "paper"]

CURVE_EXPERIMENTS = ("lengthgen", "failure", "cot", "nonrealizable", "discrete")


class ExperimentConfig(BaseModel):
    """
    Configuración completa de un experimento.

    Las semillas usadas son seed, seed+1, …, seed+seeds−1.
    """

    model_config = ConfigDict(extra='forbid')

    experiment: Experiment = "lengthgen"
    scale: Scale = "smoke"
    family: Family = "deepset"
    capacity: Capacity = "structured-perceptron"
    student_family: Optional[Family] = None
    student_capacity: Optional[Capacity] = None

    n: int = Field(4, ge=1)
    m: int = Field(4, ge=1)
    k: int = Field(4, ge=1)
    train_T: int = Field(4, ge=1)
    eval_lengths: List[int] = [4, 8, 16]
    seeds: int = Field(1, ge=1)
    seed: int = 0
    eval_samples: int = Field(512, ge=1)
    id_sequences: int = Field(200, ge=2)
    train: TrainConfig = TrainConfig()

    attention: Literal["sigmoid", "relu", "softmax", "linear"] = "sigmoid"
    normalization: Literal["mean-over-i", "mean-over-i-minus-1"] = "mean-over-i"
    heads: int = Field(1, ge=1)
    t_max: Optional[int] = None

    offset_c: Optional[float] = None
    t0: Optional[int] = None
    levels: int = Field(2, ge=2)
    band_halfwidth: float = Field(0.5, gt=0)

    horizon: int = Field(200, ge=1)
    epsilon: float = Field(0.1, gt=0)
    lipschitz_trials: int = Field(1000, ge=1)
    workers: int = Field(1, ge=1)
    output_dir: str = "resultados"

    @field_validator('eval_lengths')
    @classmethod
    def _longitudes(cls, v: List[int]) -> List[int]:
        if not v or any(t < 1 for t in v):
            raise ValueError("eval_lengths debe ser no vacío con longitudes ≥ 1")
        return sorted(set(int(t) for t in v))

    @model_validator(mode='after')
    def _incluir_entrenamiento(self):
        if self.experiment in CURVE_EXPERIMENTS and self.train_T not in self.eval_lengths:
            self.eval_lengths = sorted(set(self.eval_lengths) | {self.train_T})
        return self

    @property
    def seed_list(self) -> List[int]:
        return [self.seed + i for i in range(self.seeds)]

    @property
    def dims(self):
        return (self.n, self.m, self.k)


#  Presets de escala

PRESETS: Dict[str, Dict[str, Any]] = {
    'smoke': {
        'scale': 'smoke', 'n': 4, 'm': 4, 'k': 4, 'train_T': 4,
        'eval_lengths': [4, 8, 16], 'seeds': 1, 'eval_samples': 512, 'id_sequences': 200,
        'horizon': 60, 'lipschitz_trials': 200,
        'train': {'epochs': 2, 'batches_per_epoch': 10, 'batch_size': 64, 'validation_batches': 2},
    },
    'desk': {
        'scale': 'desk', 'n': 8, 'm': 8, 'k': 8, 'train_T': 6,
        'eval_lengths': [6, 12, 30, 60], 'seeds': 3, 'eval_samples': 2000, 'id_sequences': 1000,
        'horizon': 200, 'lipschitz_trials': 1000,
        'train': {'epochs': 40, 'batches_per_epoch': 100, 'batch_size': 256},
    },
    'paper': {
        'scale': 'paper', 'n': 20, 'm': 20, 'k': 20, 'train_T': 10,
        'eval_lengths': [10, 20, 50, 100], 'seeds': 5, 'eval_samples': 10_000, 'id_sequences': 1000,
        'horizon': 200, 'lipschitz_trials': 1000,
        'train': {},
    },
}


def _mezclar(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    """Mezcla profunda: los valores de `extra` ganan."""
    resultado = copy.deepcopy(base)
    for clave, valor in extra.items():
        if isinstance(valor, dict) and isinstance(resultado.get(clave), dict):
            resultado[clave] = _mezclar(resultado[clave], valor)
        elif valor is not None:
            resultado[clave] = valor
    return resultado


def load_config(
    path: Optional[Union[str, Path]] = None,
    scale: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Resuelve la configuración: preset < archivo TOML < banderas.

    Args:
        path: Archivo TOML (opcional)
        scale: 'smoke', 'desk' o 'paper' (por defecto el del archivo o 'smoke')
        overrides: Campos de la CLI (los None se ignoran)

    Raises:
        ConfigError: Archivo ilegible o valores inválidos
    """
    archivo: Dict[str, Any] = {}
    if path is not None:
        ruta = Path(path)
        if not ruta.exists():
            raise ConfigError(f"❌ No se encontró el archivo de configuración: {ruta}")
        try:
            archivo = toml.load(ruta)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"❌ TOML inválido en {ruta}: {e}") from e

    escala = scale or archivo.get('scale') or 'smoke'
    if escala not in PRESETS:
        raise ConfigError(f"❌ Escala desconocida: {escala}. Use {sorted(PRESETS)}")
    datos = _mezclar(PRESETS[escala], archivo)
    datos = _mezclar(datos, overrides or {})
    datos['scale'] = escala
    try:
        return ExperimentConfig.model_validate(datos)
    except ValidationError as e:
        primero = e.errors()[0]
        campo = ".".join(str(p) for p in primero['loc'])
        raise ConfigError(f"❌ Configuración inválida ({campo}): {primero['msg']}",
                          {'field': campo}) from e


def canonical_json(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 del JSON canónico (claves ordenadas) de la configuración resuelta."""
    return hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()


def dump_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Escribe la configuración resuelta como TOML (reproducible con --config)."""
    ruta = Path(path)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    ruta.write_text(toml.dumps(config.model_dump(mode='json', exclude_none=True)), encoding='utf-8')
    return ruta
