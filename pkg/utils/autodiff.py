"""
autodiff.py: Núcleo numérico con diferenciación automática en modo reverso

PROPÓSITO:
    Kernel denso mínimo (float64) con un tape de operaciones primitivas y un
    pase hacia atrás que calcula el gradiente de cada parámetro. Alcanza para
    entrenar todas las familias de modelos del laboratorio.

DEPENDENCIAS:
    - numpy: arreglos densos en float64
    - scipy.special: sigmoide y softmax numéricamente estables

TRAZABILIDAD:
    - Usado por: utils/architectures.py, utils/training.py
    - Importado desde: utils/__init__.py

CONVENCIONES:
    - Las activaciones son arreglos (..., d); los pesos son matrices 2-D.
    - El segundo operando de add/sub/mul puede tener la forma de un sufijo del
      primero (sesgo por fila, máscara (T, T) sobre lotes). No hay otra difusión.
    - Un tape vive lo que dura un paso de entrenamiento y se descarta.
"""

import zlib
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .errors import (
    BackwardBeforeForwardError,
    NonFiniteError,
    ShapeMismatchError,
)

DTYPE = np.float64


def as_matrix(values, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """
    Convierte valores a una matriz densa float64 (filas × columnas, orden por filas).

    Args:
        values: Lista anidada, arreglo o secuencia plana de longitud rows*cols
        rows (int, optional): Número de filas (obligatorio si values es plano)
        cols (int, optional): Número de columnas

    Returns:
        np.ndarray: Matriz 2-D en float64 con todas sus entradas finitas

    Raises:
        ShapeMismatchError: Si la longitud no coincide con rows×cols
        ValueError: Si hay entradas no finitas
    """
    datos = np.asarray(values, dtype=DTYPE)
    if rows is not None and cols is not None:
        if datos.size != rows * cols:
            raise ShapeMismatchError("as_matrix", datos.shape, (rows, cols))
        datos = datos.reshape(rows, cols)
    if datos.ndim == 1:
        datos = datos.reshape(1, -1)
    if datos.ndim != 2:
        raise ShapeMismatchError("as_matrix", datos.shape)
    if not np.all(np.isfinite(datos)):
        raise ValueError("❌ La matriz contiene valores no finitos")
    return datos


@dataclass(eq=False)
class Node:
    """Valor primario registrado en un tape."""

    value: np.ndarray
    index: int
    requires_grad: bool = False
    name: Optional[str] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape


@dataclass
class _Op:
    name: str
    output: int
    inputs: Tuple[int, ...]
    needs: Tuple[bool, ...]
    vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    # Suma los ejes iniciales añadidos por la difusión de sufijo
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


class Tape:
    """
    Tape de operaciones primitivas en orden topológico.

    Con record=False sólo se calculan valores primarios (evaluación rápida);
    backward sobre ese tape es un error.
    """

    def __init__(self, record: bool = True, check_finite: bool = True):
        self.record = record
        self.check_finite = check_finite
        self.ops: List[_Op] = []
        self.params: Dict[str, Node] = {}
        self.gradients: Dict[str, np.ndarray] = {}
        self.forward_done = False
        self._count = 0

    # Nodos hoja

    def _node(self, value, requires_grad: bool, name: Optional[str] = None) -> Node:
        node = Node(np.asarray(value, dtype=DTYPE), self._count, requires_grad, name)
        self._count += 1
        return node

    def leaf(self, value, name: str) -> Node:
        """Registra un parámetro (hoja con gradiente)."""
        node = self._node(np.array(value, dtype=DTYPE, copy=True), self.record, name)
        self.params[name] = node
        return node

    def constant(self, value) -> Node:
        return self._node(value, False)

    def _push(self, op: str, value: np.ndarray, inputs: Sequence[Node], vjp) -> Node:
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NonFiniteError(op, self._count)
        needs = tuple(n.requires_grad for n in inputs)
        node = self._node(value, any(needs))
        if self.record and node.requires_grad:
            self.ops.append(_Op(op, node.index, tuple(n.index for n in inputs), needs, vjp))
        self.forward_done = True
        return node

    # Operaciones primitivas

    def matmul(self, a: Node, b: Node) -> Node:
        """a (..., q) @ b (q, r) con b matriz 2-D."""
        if b.value.ndim != 2 or a.value.ndim < 1 or a.shape[-1] != b.shape[0]:
            raise ShapeMismatchError("matmul", a.shape, b.shape)
        av, bv = a.value, b.value

        def vjp(g):
            ga = g @ bv.T
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb

        return self._push("matmul", av @ bv, (a, b), vjp)

    def bmm(self, a: Node, b: Node) -> Node:
        """Producto por lotes a (..., p, q) @ b (..., q, r) con los mismos ejes de lote."""
        if (a.value.ndim < 2 or a.value.ndim != b.value.ndim
                or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]):
            raise ShapeMismatchError("bmm", a.shape, b.shape)
        av, bv = a.value, b.value

        def vjp(g):
            return g @ _swap(bv), _swap(av) @ g

        return self._push("bmm", av @ bv, (a, b), vjp)

    def transpose(self, a: Node) -> Node:
        """Intercambia los dos últimos ejes."""
        if a.value.ndim < 2:
            raise ShapeMismatchError("transpose", a.shape)
        return self._push("transpose", _swap(a.value), (a,), lambda g: (_swap(g),))

    def _check_suffix(self, op: str, a: Node, b: Node) -> None:
        if b.shape == a.shape:
            return
        if 0 < b.value.ndim < a.value.ndim and a.shape[-b.value.ndim:] == b.shape:
            return
        raise ShapeMismatchError(op, a.shape, b.shape)

    def add(self, a: Node, b: Node) -> Node:
        self._check_suffix("add", a, b)
        sa, sb = a.shape, b.shape
        return self._push(
            "add", a.value + b.value, (a, b),
            lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)),
        )

    def sub(self, a: Node, b: Node) -> Node:
        self._check_suffix("sub", a, b)
        sa, sb = a.shape, b.shape
        return self._push(
            "sub", a.value - b.value, (a, b),
            lambda g: (_reduce_to(g, sa), -_reduce_to(g, sb)),
        )

    def mul(self, a: Node, b: Node) -> Node:
        """Producto elemento a elemento."""
        self._check_suffix("mul", a, b)
        av, bv = a.value, b.value
        return self._push(
            "mul", av * bv, (a, b),
            lambda g: (g * bv, _reduce_to(g * av, bv.shape)),
        )

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)
        return self._push("scale", a.value * c, (a,), lambda g: (g * c,))

    def sigmoid(self, a: Node) -> Node:
        out = special.expit(a.value)
        return self._push("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))

    def tanh(self, a: Node) -> Node:
        out = np.tanh(a.value)
        return self._push("tanh", out, (a,), lambda g: (g * (1.0 - out ** 2),))

    def exp(self, a: Node) -> Node:
        out = np.exp(a.value)
        return self._push("exp", out, (a,), lambda g: (g * out,))

    def log(self, a: Node) -> Node:
        av = a.value
        with np.errstate(divide='ignore', invalid='ignore'):
            out = np.log(av)
        return self._push("log", out, (a,), lambda g: (g / av,))

    def relu(self, a: Node) -> Node:
        mask = (a.value > 0).astype(DTYPE)
        return self._push("relu", a.value * mask, (a,), lambda g: (g * mask,))

    def softmax(self, a: Node, axis: int = -1) -> Node:
        out = special.softmax(a.value, axis=axis)

        def vjp(g):
            return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

        return self._push("softmax", out, (a,), vjp)

    def reduce_sum(self, a: Node, axis: Optional[int] = None) -> Node:
        shape = a.shape

        def vjp(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return self._push("reduce_sum", np.asarray(a.value.sum(axis=axis)), (a,), vjp)

    def reduce_mean(self, a: Node, axis: Optional[int] = None) -> Node:
        shape = a.shape
        n = a.value.size if axis is None else shape[axis]

        def vjp(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / n, shape).copy(),)

        return self._push("reduce_mean", np.asarray(a.value.mean(axis=axis)), (a,), vjp)

    def cumsum(self, a: Node, axis: int) -> Node:
        """Sumas prefijo a lo largo de un eje."""

        def vjp(g):
            return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

        return self._push("cumsum", np.cumsum(a.value, axis=axis), (a,), vjp)

    def take(self, a: Node, index: Union[int, Sequence[int]], axis: int) -> Node:
        """Selecciona posiciones a lo largo de un eje (entero o lista de índices)."""
        shape = a.shape
        idx = np.asarray(index)

        def vjp(g):
            full = np.zeros(shape, dtype=DTYPE)
            dest = [slice(None)] * len(shape)
            dest[axis] = idx
            np.add.at(full, tuple(dest), g)
            return (full,)

        return self._push("take", np.take(a.value, idx, axis=axis), (a,), vjp)

    def stack(self, nodes: Sequence[Node], axis: int) -> Node:
        shapes = {n.shape for n in nodes}
        if len(shapes) != 1:
            raise ShapeMismatchError("stack", *[n.shape for n in nodes])
        out = np.stack([n.value for n in nodes], axis=axis)

        def vjp(g):
            return tuple(np.take(g, i, axis=axis) for i in range(len(nodes)))

        return self._push("stack", out, tuple(nodes), vjp)

    def concat(self, nodes: Sequence[Node], axis: int = -1) -> Node:
        out = np.concatenate([n.value for n in nodes], axis=axis)
        cortes = np.cumsum([n.shape[axis] for n in nodes])[:-1]

        def vjp(g):
            return tuple(np.split(g, cortes, axis=axis))

        return self._push("concat", out, tuple(nodes), vjp)

    def squared_error(self, pred: Node, target: Node) -> Node:
        """‖pred − target‖² sobre el último eje, promediado sobre los demás (escalar)."""
        if pred.shape != target.shape:
            raise ShapeMismatchError("squared_error", pred.shape, target.shape)
        diff = pred.value - target.value
        n = diff.size // diff.shape[-1] if diff.ndim and diff.shape[-1] else 1

        def vjp(g):
            grad = 2.0 * g * diff / n
            return grad, -grad

        return self._push("squared_error", np.asarray(np.sum(diff ** 2) / n), (pred, target), vjp)


def forward(
    tape: Tape,
    program: Callable[..., Union[Node, Tuple[Node, ...]]],
    inputs: Dict[str, np.ndarray],
    params: Optional[Dict[str, np.ndarray]] = None,
    shapes: Optional[Dict[str, Tuple[int, ...]]] = None,
):
    """
    Ejecuta un programa sobre el tape y devuelve sus salidas primarias.

    Args:
        tape: Tape nuevo (uno por paso)
        program: Función program(tape, **nodos) que usa las primitivas del tape
        inputs: Entradas constantes por nombre
        params: Parámetros (hojas con gradiente) por nombre
        shapes: Formas declaradas de las entradas (opcional)

    Returns:
        Salida(s) del programa como nodos del tape

    Raises:
        ShapeMismatchError: Si una entrada no coincide con su forma declarada
    """
    shapes = shapes or {}
    nodos = {}
    for nombre, valor in inputs.items():
        valor = np.asarray(valor, dtype=DTYPE)
        if nombre in shapes and tuple(shapes[nombre]) != valor.shape:
            raise ShapeMismatchError(f"entrada '{nombre}'", shapes[nombre], valor.shape)
        nodos[nombre] = tape.constant(valor)
    for nombre, valor in (params or {}).items():
        nodos[nombre] = tape.leaf(valor, nombre)
    salida = program(tape, **nodos)
    tape.forward_done = True
    return salida


def backward(tape: Tape, output: Node, adjoint: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
    """
    Pase hacia atrás: gradiente de `output` respecto de cada parámetro del tape.

    Cada operación del tape se visita exactamente una vez, en orden inverso.

    Raises:
        BackwardBeforeForwardError: Si el tape no tiene un pase hacia adelante grabado
    """
    if not tape.forward_done:
        raise BackwardBeforeForwardError("❌ backward llamado antes de forward sobre este tape")
    if not tape.record:
        raise BackwardBeforeForwardError("❌ El tape no grabó operaciones (record=False)")
    if adjoint is None:
        adjoint = np.ones_like(output.value)
    adjoint = np.asarray(adjoint, dtype=DTYPE)
    if adjoint.shape != output.shape:
        raise ShapeMismatchError("backward", output.shape, adjoint.shape)

    adjuntos: Dict[int, np.ndarray] = {output.index: adjoint}
    for op in reversed(tape.ops):
        g = adjuntos.pop(op.output, None)
        if g is None:
            continue
        for idx, needs, gi in zip(op.inputs, op.needs, op.vjp(g)):
            if not needs or gi is None:
                continue
            previo = adjuntos.get(idx)
            adjuntos[idx] = gi if previo is None else previo + gi

    tape.gradients = {
        nombre: adjuntos.get(nodo.index, np.zeros_like(nodo.value))
        for nombre, nodo in tape.params.items()
    }
    return tape.gradients


def finite_difference_check(
    program: Callable[[Tape, Dict[str, Node]], Node],
    params: Dict[str, np.ndarray],
    h: float = 1e-5,
) -> Dict[str, float]:
    """
    Compara el gradiente analítico con diferencias centrales.

    ALGORITMO:
        1. Gradiente analítico con un tape grabado
        2. Para cada entrada θ_i: (f(θ+h e_i) − f(θ−h e_i)) / 2h con tapes sin grabar
        3. Error relativo |a − n| / max(|a|, |n|, 1e-3), máximo por parámetro

    Args:
        program: Función program(tape, nodos) que devuelve un escalar
        params: Valores de los parámetros por nombre
        h: Paso de las diferencias centrales

    Returns:
        dict: Error relativo máximo por parámetro
    """
    tape = Tape()
    nodos = {k: tape.leaf(v, k) for k, v in params.items()}
    salida = program(tape, nodos)
    analitico = backward(tape, salida)

    def evaluar(valores):
        t = Tape(record=False)
        return float(program(t, {k: t.constant(v) for k, v in valores.items()}).value)

    errores = {}
    for nombre, valor in params.items():
        valor = np.asarray(valor, dtype=DTYPE)
        numerico = np.zeros_like(valor)
        for i in np.ndindex(valor.shape):
            mas, menos = valor.copy(), valor.copy()
            mas[i] += h
            menos[i] -= h
            f_mas = evaluar({**params, nombre: mas})
            f_menos = evaluar({**params, nombre: menos})
            numerico[i] = (f_mas - f_menos) / (2 * h)
        a = analitico[nombre]
        escala = np.maximum(np.maximum(np.abs(a), np.abs(numerico)), 1e-3)
        errores[nombre] = float(np.max(np.abs(a - numerico) / escala)) if valor.size else 0.0
    return errores


#  Generador aleatorio por contador

@dataclass(frozen=True)
class RngStream:
    """
    Flujo aleatorio reproducible basado en Philox (generador por contador).

    (seed, stream_id, draw-index) determina el valor en cualquier plataforma;
    flujos con distinto stream_id son independientes.
    """

    seed: int
    stream_id: str = "root"

    def key(self) -> np.ndarray:
        sq = np.random.SeedSequence([int(self.seed) & 0xFFFFFFFFFFFFFFFF,
                                     zlib.crc32(self.stream_id.encode("utf-8"))])
        return sq.generate_state(2, dtype=np.uint64)

    def generator(self, offset: int = 0) -> np.random.Generator:
        """Generador numpy posicionado en el bloque de contador `offset`."""
        return np.random.Generator(np.random.Philox(key=self.key(), counter=int(offset)))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.stream_id}/{label}")

    def draw(self, index: int) -> float:
        """Valor uniforme en [0, 1) asociado al índice de sorteo `index`."""
        return float(self.generator(offset=index).random())
