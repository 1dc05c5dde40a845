"""
architectures.py: Familias de modelos de secuencias (maestro y estudiante)

PROPÓSITO:
    Implementa las cuatro familias estructuradas (deep sets, transformer causal
    sin layer norm, SSM lineal y RNN), sus variantes de alta capacidad, los
    maestros degenerados para los casos de falla y la exposición de las
    representaciones ocultas (sumas prefijo, agregados de atención, h_t).

DEPENDENCIAS:
    - numpy: parámetros y álgebra lineal
    - utils.autodiff: Tape y RngStream

TRAZABILIDAD:
    - Usado por: utils/preprocessing.py (etiquetado), utils/training.py,
      utils/calculations.py, utils/theory.py, utils/experiments.py
    - Importado desde: utils/__init__.py

CONVENCIONES:
    - tokens: arreglo (lote, T, n) o (T, n); etiquetas (…, T, m); ocultos (…, T, k)
    - Las matrices siguen la orientación matemática: W_q es k×n, Λ es k×k, B es k×n
    - Las posiciones son 1-indexadas en la documentación (t = 1..T)
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import ClassVar, Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import DTYPE, Node, RngStream, Tape
from .errors import InvalidModelError, ShapeMismatchError

logger = logging.getLogger(__name__)

FAMILIES = ("deepset", "transformer", "ssm", "rnn")
CAPACITIES = ("structured-perceptron", "structured-diffeo", "high-capacity")
ATTENTION_KINDS = ("sigmoid", "relu", "softmax", "linear")
NORMALIZATIONS = ("mean-over-i", "mean-over-i-minus-1")
ACTIVATIONS = ("sigmoid", "none", "exp", "log", "relu", "tanh")

# Desviación estándar de la inicialización de los MLP del maestro
INIT_STD = 0.6
MAX_CONDITION = 1e8
MODEL_FORMAT_VERSION = 1


#  Especificaciones

@dataclass(frozen=True)
class MlpSpec:
    """MLP con activación sigmoide en capas ocultas y activación de salida configurable."""

    in_dim: int
    out_dim: int
    hidden_dims: Tuple[int, ...] = ()
    hidden_activation: str = "sigmoid"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        dims = (self.in_dim, self.out_dim) + self.hidden_dims
        if any(int(d) < 1 for d in dims):
            raise InvalidModelError(f"❌ Dimensiones de MLP inválidas: {dims}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise InvalidModelError(f"❌ Activación no válida: {act}. Use {ACTIVATIONS}")

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        return (self.in_dim,) + self.hidden_dims + (self.out_dim,)

    @property
    def depth(self) -> int:
        return len(self.hidden_dims) + 1

    def param_shapes(self, prefix: str) -> Dict[str, Tuple[int, ...]]:
        formas = {}
        dims = self.layer_dims
        for l in range(self.depth):
            formas[f"{prefix}.w{l}"] = (dims[l + 1], dims[l])
            formas[f"{prefix}.b{l}"] = (dims[l + 1],)
        return formas

    def to_dict(self) -> dict:
        return {
            'in_dim': self.in_dim,
            'out_dim': self.out_dim,
            'hidden_dims': list(self.hidden_dims),
            'hidden_activation': self.hidden_activation,
            'output_activation': self.output_activation,
        }


@dataclass(frozen=True)
class ModelSpec:
    """
    Arquitectura completa: familia, dimensiones, clase de capacidad y opciones.

    Args:
        family: 'deepset', 'transformer', 'ssm' o 'rnn'
        n, m, k: dimensión de token, de etiqueta y oculta
        capacity: 'structured-perceptron', 'structured-diffeo' o 'high-capacity'
        psi: MLP ψ (sólo deep sets)
        omega: MLP ω (None en la RNN estructurada, que usa σ∘A)
        attention, normalization, heads, t_max: opciones del transformer
    """

    family: str
    n: int
    m: int
    k: int
    capacity: str = "structured-perceptron"
    psi: Optional[MlpSpec] = None
    omega: Optional[MlpSpec] = None
    attention: str = "sigmoid"
    normalization: str = "mean-over-i"
    heads: int = 1
    t_max: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidModelError(f"❌ Familia no válida: {self.family}. Use {FAMILIES}")
        if self.capacity not in CAPACITIES:
            raise InvalidModelError(f"❌ Capacidad no válida: {self.capacity}. Use {CAPACITIES}")
        if min(self.n, self.m, self.k) < 1:
            raise InvalidModelError(f"❌ Dimensiones inválidas: n={self.n}, m={self.m}, k={self.k}")
        if self.attention not in ATTENTION_KINDS:
            raise InvalidModelError(f"❌ Atención no válida: {self.attention}")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidModelError(f"❌ Normalización no válida: {self.normalization}")
        if self.heads < 1:
            raise InvalidModelError("❌ Se requiere al menos una cabeza de atención")
        if self.t_max is not None:
            if self.t_max < 1:
                raise InvalidModelError("❌ t_max debe ser ≥ 1")
            if self.heads != 1 or self.attention == "softmax":
                raise InvalidModelError(
                    "❌ Los núcleos posicionales sólo admiten una cabeza y atención no softmax"
                )
        self._check_heads()

    def _check_heads(self):
        fam, cap = self.family, self.capacity
        if fam == "deepset":
            if self.psi is None or self.psi.in_dim != self.n or self.psi.out_dim != self.k:
                raise InvalidModelError("❌ ψ del deep set debe ir de n a k")
        if fam == "rnn" and cap != "high-capacity":
            if self.omega is not None:
                raise InvalidModelError("❌ La RNN estructurada usa σ(A h); omega debe ser None")
        elif self.omega is None or self.omega.in_dim != self.k or self.omega.out_dim != self.m:
            raise InvalidModelError("❌ ω debe ir de k a m")
        if cap == "structured-perceptron" and self.omega is not None:
            if self.omega.hidden_dims or self.omega.output_activation != "sigmoid":
                raise InvalidModelError(
                    "❌ structured-perceptron exige ω con una sola capa afín + sigmoide"
                )
        if cap == "structured-diffeo":
            if fam in ("ssm", "rnn"):
                raise InvalidModelError("❌ structured-diffeo sólo aplica a deep sets y transformers")
            if self.k != self.m:
                raise InvalidModelError("❌ structured-diffeo exige dim. de entrada de ω = m")
        if fam in ("ssm", "rnn") and cap != "high-capacity":
            if not (self.n == self.m == self.k):
                raise InvalidModelError("❌ SSM/RNN estructurados exigen m = k = n")

    @property
    def structured(self) -> bool:
        return self.capacity != "high-capacity"

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Formas de todos los parámetros, en orden determinista."""
        n, k, m = self.n, self.k, self.m
        formas: Dict[str, Tuple[int, ...]] = {}
        if self.family == "deepset":
            formas.update(self.psi.param_shapes("psi"))
        elif self.family == "transformer":
            if self.t_max is not None:
                for d in range(self.t_max):
                    for nombre in ("wq", "wk", "wv"):
                        formas[f"{nombre}.d{d}"] = (k, n)
            else:
                for h in range(self.heads):
                    for nombre in ("wq", "wk", "wv"):
                        formas[f"{nombre}.h{h}"] = (k, n)
                if self.heads > 1:
                    formas["w_mix"] = (k, self.heads * k)
        else:
            formas["lambda"] = (k, k)
            formas["b_in"] = (k, n)
            if self.family == "rnn" and self.structured:
                formas["a_out"] = (m, k)
        if self.omega is not None:
            formas.update(self.omega.param_shapes("omega"))
        return formas

    def to_dict(self) -> dict:
        return {
            'family': self.family,
            'n': self.n,
            'm': self.m,
            'k': self.k,
            'capacity': self.capacity,
            'psi': None if self.psi is None else self.psi.to_dict(),
            'omega': None if self.omega is None else self.omega.to_dict(),
            'attention': self.attention,
            'normalization': self.normalization,
            'heads': self.heads,
            't_max': self.t_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        datos = dict(data)
        for clave in ("psi", "omega"):
            if datos.get(clave) is not None:
                datos[clave] = MlpSpec(**datos[clave])
        return cls(**datos)


class ForwardOutput(NamedTuple):
    """Salida de un pase en el tape: etiquetas y representación oculta (nodos)."""

    labels: Node
    hidden: Node


class ForwardResult(NamedTuple):
    """Salida numérica: etiquetas y representación oculta (arreglos)."""

    labels: np.ndarray
    hidden: np.ndarray


#  Utilidades de pase hacia adelante

def _as_tokens(tokens, n: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(tokens, dtype=DTYPE)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != n:
        raise ShapeMismatchError("tokens", x.shape, ("lote", "T", n))
    return x, single


def bind_params(tape: Tape, params: Dict[str, np.ndarray], frozen: Iterable[str] = ()) -> Dict[str, Node]:
    """Registra los parámetros en el tape (los congelados como constantes)."""
    congelados = set(frozen)
    return {
        nombre: tape.constant(valor) if nombre in congelados else tape.leaf(valor, nombre)
        for nombre, valor in params.items()
    }


def _activate(tape: Tape, x: Node, activation: str) -> Node:
    if activation == "sigmoid":
        return tape.sigmoid(x)
    if activation == "relu":
        return tape.relu(x)
    if activation == "tanh":
        return tape.tanh(x)
    if activation == "exp":
        return tape.exp(x)
    if activation == "log":
        return tape.log(x)
    return x


def mlp_forward(tape: Tape, p: Dict[str, Node], prefix: str, spec: MlpSpec, x: Node) -> Node:
    """Aplica el MLP `prefix` sobre el último eje de x."""
    for l in range(spec.depth):
        x = tape.add(tape.matmul(x, tape.transpose(p[f"{prefix}.w{l}"])), p[f"{prefix}.b{l}"])
        act = spec.output_activation if l == spec.depth - 1 else spec.hidden_activation
        x = _activate(tape, x, act)
    return x


def _attention_masks(T: int, normalization: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Máscaras (T, T) de la atención causal.

    Returns:
        (permitido, pesos): permitido[i, j] indica si j participa en la posición i;
        pesos[i, j] = permitido / denominador (1/i ó 1/(i−1); fila 1 nula en la
        variante i−1, de modo que z_1 = 0).
    """
    i = np.arange(1, T + 1)[:, None]
    j = np.arange(1, T + 1)[None, :]
    if normalization == "mean-over-i":
        permitido = (j <= i).astype(DTYPE)
        denominador = i.astype(DTYPE)
    else:
        permitido = (j < i).astype(DTYPE)
        denominador = np.maximum(i - 1, 1).astype(DTYPE)
    return permitido, permitido / denominador


#  Modelos

@dataclass
class SequenceModel:
    """Modelo de secuencia: especificación + diccionario de parámetros."""

    spec: ModelSpec
    params: Dict[str, np.ndarray]
    family: ClassVar[str] = ""

    def __post_init__(self):
        formas = self.spec.param_shapes()
        faltantes = set(formas) - set(self.params)
        if faltantes:
            raise InvalidModelError(f"❌ Parámetros faltantes: {sorted(faltantes)}")
        self.params = {
            nombre: np.array(self.params[nombre], dtype=DTYPE) for nombre in formas
        }
        for nombre, forma in formas.items():
            if self.params[nombre].shape != forma:
                raise ShapeMismatchError(f"parámetro '{nombre}'", forma, self.params[nombre].shape)

    @property
    def hidden_dim(self) -> int:
        return self.spec.k

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    def forward(self, tape: Tape, tokens: np.ndarray, frozen: Iterable[str] = ()) -> ForwardOutput:
        raise NotImplementedError

    def predict(self, tokens) -> ForwardResult:
        """Etiquetas y ocultos sin grabar el tape."""
        x, single = _as_tokens(tokens, self.n)
        out = self.forward(Tape(record=False), x)
        if single:
            return ForwardResult(out.labels.value[0], out.hidden.value[0])
        return ForwardResult(out.labels.value, out.hidden.value)

    def copy(self) -> "SequenceModel":
        return type(self)(self.spec, {k: v.copy() for k, v in self.params.items()})

    def with_params(self, params: Dict[str, np.ndarray]) -> "SequenceModel":
        return type(self)(self.spec, params)

    def num_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


class DeepSetModel(SequenceModel):
    """h(x_1..x_i) = ω(Σ_{j≤i} ψ(x_j)); oculto = suma prefijo antes de ω."""

    family = "deepset"

    def forward(self, tape, tokens, frozen=()):
        x, _ = _as_tokens(tokens, self.n)
        p = bind_params(tape, self.params, frozen)
        phi = mlp_forward(tape, p, "psi", self.spec.psi, tape.constant(x))
        sumas = tape.cumsum(phi, axis=1)
        return ForwardOutput(mlp_forward(tape, p, "omega", self.spec.omega, sumas), sumas)


class TransformerModel(SequenceModel):
    """
    Transformer causal de un bloque: y_i = ω(z_i), z_i = (1/i) Σ_{j≤i} ψ(x_i, x_j)
    con ψ = act(q_iᵀk_j/√d)·v_j. Variantes: normalización 1/(i−1) con j < i,
    softmax (sin garantía teórica), varias cabezas y núcleos por distancia relativa.
    """

    family = "transformer"

    def _gate(self, tape: Tape, scores: Node) -> Node:
        kind = self.spec.attention
        if kind == "sigmoid":
            return tape.sigmoid(scores)
        if kind == "relu":
            return tape.relu(scores)
        return scores

    def _head(self, tape, p, x, sufijo, pesos, permitido) -> Node:
        q = tape.matmul(x, tape.transpose(p[f"wq.{sufijo}"]))
        k = tape.matmul(x, tape.transpose(p[f"wk.{sufijo}"]))
        v = tape.matmul(x, tape.transpose(p[f"wv.{sufijo}"]))
        scores = tape.scale(tape.bmm(q, tape.transpose(k)), 1.0 / np.sqrt(self.spec.k))
        if self.spec.attention == "softmax":
            # Filas sin ninguna j permitida (i = 1 en la variante i−1) quedan en cero
            bloqueo = np.where(permitido > 0, 0.0, -1e9)
            filas = (permitido.sum(axis=1, keepdims=True) > 0).astype(DTYPE)
            a = tape.softmax(tape.add(scores, tape.constant(bloqueo)), axis=-1)
            a = tape.mul(a, tape.constant(np.broadcast_to(filas, permitido.shape).copy()))
        else:
            a = tape.mul(self._gate(tape, scores), tape.constant(pesos))
        return tape.bmm(a, v)

    def aggregate(self, tape: Tape, p: Dict[str, Node], x: np.ndarray) -> Node:
        T = x.shape[1]
        permitido, pesos = _attention_masks(T, self.spec.normalization)
        xc = tape.constant(x)
        if self.spec.t_max is not None:
            z = None
            i = np.arange(T)[:, None]
            j = np.arange(T)[None, :]
            for d in range(min(self.spec.t_max, T)):
                en_d = (i - j == d).astype(DTYPE)
                zd = self._head(tape, p, xc, f"d{d}", pesos * en_d, permitido * en_d)
                z = zd if z is None else tape.add(z, zd)
            return z
        cabezas = [self._head(tape, p, xc, f"h{h}", pesos, permitido) for h in range(self.spec.heads)]
        if self.spec.heads == 1:
            return cabezas[0]
        return tape.matmul(tape.concat(cabezas, axis=-1), tape.transpose(p["w_mix"]))

    def forward(self, tape, tokens, frozen=()):
        x, _ = _as_tokens(tokens, self.n)
        p = bind_params(tape, self.params, frozen)
        z = self.aggregate(tape, p, x)
        return ForwardOutput(mlp_forward(tape, p, "omega", self.spec.omega, z), z)


def _check_invertible(params: Dict[str, np.ndarray], names: Sequence[str]) -> None:
    for nombre in names:
        cond = np.linalg.cond(params[nombre])
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise InvalidModelError(
                f"❌ '{nombre}' no es invertible (número de condición {cond:.3e})",
                {'param': nombre, 'condition': float(cond)},
            )


class SsmModel(SequenceModel):
    """h_t = Λ h_{t−1} + B x_t, y_t = ω(h_t)."""

    family = "ssm"

    def __post_init__(self):
        super().__post_init__()
        if self.spec.structured:
            _check_invertible(self.params, ("lambda", "b_in"))

    def states(self, tape: Tape, p: Dict[str, Node], x: np.ndarray) -> Node:
        u = tape.matmul(tape.constant(x), tape.transpose(p["b_in"]))
        lam_t = tape.transpose(p["lambda"])
        estados = []
        h = None
        for t in range(x.shape[1]):
            ut = tape.take(u, t, axis=1)
            h = ut if h is None else tape.add(tape.matmul(h, lam_t), ut)
            estados.append(h)
        return tape.stack(estados, axis=1)

    def forward(self, tape, tokens, frozen=()):
        x, _ = _as_tokens(tokens, self.n)
        p = bind_params(tape, self.params, frozen)
        h = self.states(tape, p, x)
        return ForwardOutput(mlp_forward(tape, p, "omega", self.spec.omega, h), h)


class RnnModel(SequenceModel):
    """h_t = σ(Λ h_{t−1} + B x_t) con h_0 = 0, y_t = σ(A h_t)."""

    family = "rnn"

    def __post_init__(self):
        super().__post_init__()
        if self.spec.structured:
            _check_invertible(self.params, ("lambda", "b_in", "a_out"))

    def states(self, tape: Tape, p: Dict[str, Node], x: np.ndarray) -> Node:
        u = tape.matmul(tape.constant(x), tape.transpose(p["b_in"]))
        lam_t = tape.transpose(p["lambda"])
        estados = []
        h = None
        for t in range(x.shape[1]):
            ut = tape.take(u, t, axis=1)
            pre = ut if h is None else tape.add(tape.matmul(h, lam_t), ut)
            h = tape.sigmoid(pre)
            estados.append(h)
        return tape.stack(estados, axis=1)

    def forward(self, tape, tokens, frozen=()):
        x, _ = _as_tokens(tokens, self.n)
        p = bind_params(tape, self.params, frozen)
        h = self.states(tape, p, x)
        if self.spec.structured:
            y = tape.sigmoid(tape.matmul(h, tape.transpose(p["a_out"])))
        else:
            y = mlp_forward(tape, p, "omega", self.spec.omega, h)
        return ForwardOutput(y, h)


MODEL_CLASSES = {
    "deepset": DeepSetModel,
    "transformer": TransformerModel,
    "ssm": SsmModel,
    "rnn": RnnModel,
}


def build_model(spec: ModelSpec, params: Dict[str, np.ndarray]) -> SequenceModel:
    return MODEL_CLASSES[spec.family](spec, params)


@dataclass
class DegenerateTeacher:
    """
    Maestro degenerado: igual a `base` para t ≤ t0 y base + c para t > t0.

    No es un modelo entrenable; expone la misma interfaz de predicción.
    """

    base: SequenceModel
    offset: np.ndarray
    t0: int
    family: ClassVar[str] = "degenerate"

    def __post_init__(self):
        c = np.asarray(self.offset, dtype=DTYPE)
        if not np.all(np.isfinite(c)):
            raise InvalidModelError("❌ El desplazamiento c debe ser finito")
        self.offset = np.broadcast_to(c, (self.base.m,)).copy()

    spec = property(lambda self: self.base.spec)
    params = property(lambda self: self.base.params)
    hidden_dim = property(lambda self: self.base.hidden_dim)
    n = property(lambda self: self.base.n)
    m = property(lambda self: self.base.m)

    def _offsets(self, T: int) -> np.ndarray:
        desde = (np.arange(1, T + 1) > self.t0).astype(DTYPE)[:, None]
        return desde * self.offset[None, :]

    def forward(self, tape: Tape, tokens, frozen=()) -> ForwardOutput:
        x, _ = _as_tokens(tokens, self.n)
        out = self.base.forward(tape, x, frozen)
        return ForwardOutput(tape.add(out.labels, tape.constant(self._offsets(x.shape[1]))), out.hidden)

    def predict(self, tokens) -> ForwardResult:
        x, single = _as_tokens(tokens, self.n)
        out = self.forward(Tape(record=False), x)
        if single:
            return ForwardResult(out.labels.value[0], out.hidden.value[0])
        return ForwardResult(out.labels.value, out.hidden.value)


AnyModel = Union[SequenceModel, DegenerateTeacher]


#  Operaciones por familia

def _family_forward(model: AnyModel, family: str, tokens) -> ForwardResult:
    base = model.base if isinstance(model, DegenerateTeacher) else model
    if base.spec.family != family:
        raise InvalidModelError(f"❌ Se esperaba un modelo '{family}', se recibió '{base.spec.family}'")
    return model.predict(tokens)


def deepset_forward(model: AnyModel, tokens) -> ForwardResult:
    """Etiquetas y sumas prefijo s_i = Σ_{j≤i} ψ(x_j) de un deep set."""
    return _family_forward(model, "deepset", tokens)


def transformer_forward(model: AnyModel, tokens) -> ForwardResult:
    """Etiquetas y agregados de atención z_i de un transformer."""
    return _family_forward(model, "transformer", tokens)


def ssm_forward(model: AnyModel, tokens) -> ForwardResult:
    """Etiquetas y estados h_t de un SSM lineal."""
    return _family_forward(model, "ssm", tokens)


def rnn_forward(model: AnyModel, tokens) -> ForwardResult:
    """Etiquetas y estados h_t de una RNN."""
    return _family_forward(model, "rnn", tokens)


#  Construcción y muestreo

def build_spec(
    family: str,
    dims: Sequence[int],
    capacity: str = "structured-perceptron",
    psi_hidden: Optional[Sequence[int]] = None,
    omega_hidden: Optional[Sequence[int]] = None,
    omega_output: str = "sigmoid",
    psi_output: str = "sigmoid",
    attention: str = "sigmoid",
    normalization: str = "mean-over-i",
    heads: int = 1,
    t_max: Optional[int] = None,
) -> ModelSpec:
    """
    Arma la especificación por defecto de una familia.

    Por defecto ψ es un MLP de dos capas ocultas (deep sets) y ω es un perceptrón
    de una capa con sigmoide (clase estructurada) o un MLP de dos capas ocultas
    (alta capacidad), como en la configuración experimental de referencia.
    """
    n, m, k = (int(d) for d in dims)
    psi = None
    if family == "deepset":
        psi = MlpSpec(n, k, tuple(psi_hidden if psi_hidden is not None else (k, k)),
                      output_activation=psi_output)
    omega = None
    if capacity == "structured-perceptron":
        if not (family == "rnn"):
            omega = MlpSpec(k, m, (), output_activation="sigmoid")
    elif capacity == "structured-diffeo":
        omega = MlpSpec(k, m, tuple(omega_hidden if omega_hidden is not None else (m,)),
                        output_activation=omega_output)
    else:
        omega = MlpSpec(k, m, tuple(omega_hidden if omega_hidden is not None else (m, m)),
                        output_activation=omega_output)
    return ModelSpec(
        family=family, n=n, m=m, k=k, capacity=capacity, psi=psi, omega=omega,
        attention=attention, normalization=normalization, heads=heads, t_max=t_max,
    )


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Matriz ortogonal con distribución de Haar (QR de una gaussiana con signos corregidos)."""
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))[None, :]


def init_model(spec: ModelSpec, stream: RngStream, std: float = INIT_STD) -> SequenceModel:
    """
    Inicializa un modelo: pesos de MLP y atención ~ N(0, std²); Λ, B, A ortogonales
    cuando son cuadradas.
    """
    rng = stream.generator()
    params = {}
    for nombre, forma in spec.param_shapes().items():
        if nombre in ("lambda", "b_in", "a_out") and forma[0] == forma[1]:
            params[nombre] = random_orthogonal(forma[0], rng)
        else:
            params[nombre] = rng.normal(0.0, std, size=forma)
    return build_model(spec, params)


def sample_teacher(
    family: str,
    dims: Sequence[int],
    capacity: str = "structured-perceptron",
    seed: int = 0,
    role: str = "teacher",
    **options,
) -> SequenceModel:
    """
    Muestrea un modelo de la familia (maestro por defecto; role='student' para el aprendiz).

    Args:
        family: Familia de arquitectura
        dims: (n, m, k)
        capacity: Clase de capacidad
        seed: Semilla; el flujo aleatorio se deriva de (seed, role, family)
        role: 'teacher' o 'student' (flujos independientes)
        **options: Opciones de build_spec (psi_hidden, attention, t_max, ...)

    Returns:
        SequenceModel: Determinista por semilla

    Ejemplo de uso:
        >>> maestro = sample_teacher("ssm", (8, 8, 8), seed=3)
        >>> np.allclose(maestro.params["lambda"].T @ maestro.params["lambda"], np.eye(8))
        True
    """
    spec = build_spec(family, dims, capacity, **options)
    return init_model(spec, RngStream(seed, f"modelo/{role}/{family}"))


def make_degenerate(base: SequenceModel, c, t0: int) -> DegenerateTeacher:
    """Maestro que coincide con `base` hasta t0 (inclusive) y suma c después."""
    if int(t0) < 0:
        raise InvalidModelError("❌ T0 debe ser ≥ 0")
    return DegenerateTeacher(base, np.asarray(c, dtype=DTYPE), int(t0))


def failure_teacher(family: str, dims: Sequence[int], c: float, t0: int, seed: int = 0) -> DegenerateTeacher:
    """
    Maestro degenerado de los casos de falla: MLPs de una capa oculta para ρ (y φ en
    deep sets) sin activación en la salida de ρ.
    """
    n, m, k = dims
    if family not in ("deepset", "transformer"):
        raise InvalidModelError("❌ Los casos de falla se definen para deep sets y transformers")
    base = sample_teacher(
        family, dims, "high-capacity", seed=seed,
        psi_hidden=(k,), omega_hidden=(m,), omega_output="none",
    )
    return make_degenerate(base, c, t0)


#  Transformaciones que preservan la función

def _permutation_matrix(perm) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.ndim == 2:
        return perm.astype(DTYPE)
    pi = np.zeros((len(perm), len(perm)), dtype=DTYPE)
    pi[perm, np.arange(len(perm))] = 1.0
    return pi


def conjugate_rnn(model: RnnModel, perm) -> RnnModel:
    """
    RNN conjugada (ΠᵀΛΠ, ΠᵀB, AΠ): estados h̃ = Πᵀh y mismas salidas.

    Args:
        perm: Vector de permutación (columna j de Π tiene un 1 en la fila perm[j]) o matriz Π
    """
    pi = _permutation_matrix(perm)
    p = {k: v.copy() for k, v in model.params.items()}
    p["lambda"] = pi.T @ model.params["lambda"] @ pi
    p["b_in"] = pi.T @ model.params["b_in"]
    if "a_out" in p:
        p["a_out"] = model.params["a_out"] @ pi
    else:
        p["omega.w0"] = model.params["omega.w0"] @ pi
    return model.with_params(p)


def similarity_transform_ssm(model: SsmModel, b_new: np.ndarray) -> SsmModel:
    """
    SSM equivalente con B̃ arbitraria invertible: C = B̃B⁻¹, Λ̃ = CΛC⁻¹, ω̃(z) = ω(C⁻¹z).
    """
    b_old = model.params["b_in"]
    c = np.asarray(b_new, dtype=DTYPE) @ np.linalg.inv(b_old)
    c_inv = np.linalg.inv(c)
    p = {k: v.copy() for k, v in model.params.items()}
    p["b_in"] = np.asarray(b_new, dtype=DTYPE).copy()
    p["lambda"] = c @ model.params["lambda"] @ c_inv
    p["omega.w0"] = model.params["omega.w0"] @ c_inv
    return model.with_params(p)


#  Serialización

def model_to_dict(model: AnyModel) -> dict:
    base = model.base if isinstance(model, DegenerateTeacher) else model
    datos = {
        'format': "lab-model",
        'version': MODEL_FORMAT_VERSION,
        'spec': base.spec.to_dict(),
        'params': {
            nombre: {'shape': list(valor.shape), 'data': valor.ravel().tolist()}
            for nombre, valor in base.params.items()
        },
    }
    if isinstance(model, DegenerateTeacher):
        datos['degenerate'] = {'offset': model.offset.tolist(), 't0': model.t0}
    return datos


def model_from_dict(data: dict) -> AnyModel:
    if data.get('format') != "lab-model" or data.get('version') != MODEL_FORMAT_VERSION:
        raise InvalidModelError(
            f"❌ Formato de modelo no reconocido: {data.get('format')} v{data.get('version')}"
        )
    spec = ModelSpec.from_dict(data['spec'])
    params = {
        nombre: np.asarray(v['data'], dtype=DTYPE).reshape(v['shape'])
        for nombre, v in data['params'].items()
    }
    model = build_model(spec, params)
    if 'degenerate' in data:
        return make_degenerate(model, data['degenerate']['offset'], data['degenerate']['t0'])
    return model


def save_model(model: AnyModel, path: Union[str, Path]) -> Path:
    ruta = Path(path)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    ruta.write_text(json.dumps(model_to_dict(model), sort_keys=True), encoding='utf-8')
    return ruta


def load_model(path: Union[str, Path]) -> AnyModel:
    ruta = Path(path)
    if not ruta.exists():
        raise FileNotFoundError(f"❌ No se encontró el archivo de modelo: {ruta}")
    return model_from_dict(json.loads(ruta.read_text(encoding='utf-8')))
