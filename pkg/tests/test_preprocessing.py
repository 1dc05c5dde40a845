"""Tests del etiquetado y del flujo de datos en línea."""

import numpy as np
import pytest

from utils.architectures import make_degenerate, sample_teacher
from utils.data_loader import DistributionSpec, sample_uniform
from utils.errors import HiddenDimMismatchError, ShapeMismatchError
from utils.preprocessing import (
    check_cot_compatible,
    label_batch,
    position_weights,
    streaming_batch,
)
from utils.theory import scalar_ssm


def test_maestro_suma_identidad():
    lote = label_batch(scalar_ssm(1.0, 1.0), np.array([[[0.1], [0.2]]]))
    np.testing.assert_allclose(lote.labels[0, :, 0], [0.1, 0.3], atol=1e-15)
    assert lote.cot is None


def test_etiquetado_con_trazas():
    maestro = sample_teacher("deepset", (3, 2, 5), seed=0)
    lote = label_batch(maestro, sample_uniform(3, 4, 16, seed=0), with_cot=True, teacher_id="ds")
    assert lote.labels.shape == (16, 4, 2)
    assert lote.cot.shape == (16, 4, 5)
    assert lote.meta['teacher'] == "ds"


def test_etiquetado_maestro_degenerado_registra_desplazamiento():
    maestro = make_degenerate(sample_teacher("deepset", (2, 2, 3), seed=0), 0.2, 3)
    lote = label_batch(maestro, sample_uniform(2, 5, 4, seed=0))
    assert lote.meta['degenerate']['t0'] == 3


def test_etiquetado_dimension_equivocada():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    with pytest.raises(ShapeMismatchError):
        label_batch(maestro, np.ones((4, 3, 5)))


def test_trazas_incompatibles():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    estudiante = sample_teacher("ssm", (2, 2, 3), "high-capacity", seed=0, role="student")
    with pytest.raises(HiddenDimMismatchError):
        check_cot_compatible(estudiante, maestro)


def test_flujo_en_linea_determinista_por_epoca_y_lote():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    dist = DistributionSpec.create(n=2, T=3)
    a = streaming_batch(maestro, dist, 8, seed=1, split="train", epoch=0, index=2)
    b = streaming_batch(maestro, dist, 8, seed=1, split="train", epoch=0, index=2)
    c = streaming_batch(maestro, dist, 8, seed=1, split="train", epoch=1, index=2)
    d = streaming_batch(maestro, dist, 8, seed=1, split="val", epoch=0, index=2)
    np.testing.assert_array_equal(a.tokens, b.tokens)
    assert not np.array_equal(a.tokens, c.tokens)
    assert not np.array_equal(a.tokens, d.tokens)
    assert a.meta['epoch'] == 0 and a.meta['batch'] == 2


def test_pesos_por_posicion():
    np.testing.assert_array_equal(position_weights(4), np.ones(4))
    np.testing.assert_array_equal(position_weights(4, final_label_only=True), [0, 0, 0, 4])
    np.testing.assert_allclose(position_weights(4, skip_first_position=True), [0, 4 / 3, 4 / 3, 4 / 3])
    np.testing.assert_array_equal(position_weights(1, skip_first_position=True), [1.0])
