"""Tests de riesgos, identificación lineal y recuperación de permutaciones."""

import numpy as np
import pandas as pd
import pytest

from utils.architectures import conjugate_rnn, make_degenerate, sample_teacher
from utils.autodiff import RngStream
from utils.calculations import (
    EvalReport,
    identification_r2,
    length_gen_curve,
    linear_identification_r2,
    parameter_distance,
    permutation_recovery,
    positionwise_risk,
    risk_at_length,
    trajectory_frame,
)
from utils.data_loader import DistributionSpec, load_report_csv, sample_uniform
from utils.errors import ConfigError, HiddenDimMismatchError, ShapeMismatchError
from utils.theory import scalar_ssm


@pytest.fixture
def dist():
    return DistributionSpec.create(n=3, T=4)


def test_riesgo_del_maestro_contra_si_mismo(dist):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    riesgo = risk_at_length(maestro, maestro, 20, dist, 500, seed=0)
    assert riesgo.mean < 1e-12
    assert riesgo.t == 20


def test_predictor_cero_contra_suma_identidad():
    riesgo = risk_at_length(scalar_ssm(0.0, 0.0), scalar_ssm(1.0, 1.0), 1,
                            DistributionSpec.create(n=1, T=1), 20_000, seed=0)
    assert abs(riesgo.mean - 1 / 3) < 0.01
    assert riesgo.std_err > 0


def test_riesgo_argumentos_invalidos(dist):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    with pytest.raises(ConfigError):
        risk_at_length(maestro, maestro, 0, dist, 10, seed=0)


def test_maestro_degenerado_salta_en_t0_mas_1():
    base = sample_teacher("deepset", (3, 2, 4), seed=0)
    maestro = make_degenerate(base, 0.2, 5)
    riesgos = positionwise_risk(base, maestro, sample_uniform(3, 8, 50, seed=0).tokens)
    np.testing.assert_allclose(riesgos[:5], 0.0, atol=1e-20)
    # ‖c‖² con c = 0.2 en las m = 2 salidas
    np.testing.assert_allclose(riesgos[5:], 0.08, rtol=1e-10)


@pytest.mark.parametrize("t, esperado", [(5, 0.0), (6, 0.08), (12, 0.08)])
def test_riesgo_del_maestro_degenerado_es_norma_de_c(t, esperado):
    base = sample_teacher("deepset", (3, 2, 4), seed=0)
    maestro = make_degenerate(base, 0.2, 5)
    riesgo = risk_at_length(base, maestro, t, DistributionSpec.create(n=3, T=t), 100, seed=0)
    assert riesgo.mean == pytest.approx(esperado, abs=1e-12)


#  Identificación

def test_r2_relacion_afin_exacta():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(200, 3))
    res = linear_identification_r2(psi, 2 * psi + 1)
    np.testing.assert_allclose(res.r2_per_dim, 1.0, atol=1e-10)
    assert not res.degenerate


def test_r2_representaciones_independientes():
    rng = np.random.default_rng(1)
    res = linear_identification_r2(rng.normal(size=(1000, 20)), rng.normal(size=(1000, 20)))
    assert res.r2_mean <= 0.05


def test_r2_diseno_de_rango_deficiente():
    rng = np.random.default_rng(2)
    base = rng.normal(size=(100, 1))
    res = linear_identification_r2(np.hstack([base, base]), 3 * base)
    assert res.degenerate
    np.testing.assert_allclose(res.r2_mean, 1.0, atol=1e-10)


def test_r2_pocas_muestras():
    with pytest.raises(ShapeMismatchError):
        linear_identification_r2(np.ones((3, 4)), np.ones((3, 2)))


def test_identificacion_estudiante_igual_al_maestro():
    maestro = sample_teacher("ssm", (3, 3, 3), seed=0)
    res = identification_r2(maestro, maestro, sample_uniform(3, 5, 200, seed=0).tokens)
    assert res['r2_mean'] == pytest.approx(1.0, abs=1e-9)
    assert len(res['r2_by_position']) == 5


#  Permutaciones

def test_permutacion_conocida_recuperada():
    maestro = sample_teacher("rnn", (4, 4, 4), seed=1)
    perm = np.array([1, 3, 0, 2])
    estudiante = conjugate_rnn(maestro, perm)
    res = permutation_recovery(estudiante, maestro, sample_uniform(4, 6, 300, seed=0).tokens)
    assert res.score == 1.0
    assert res.is_permutation
    # h_maestro = Π h_estudiante: la fila perm[j] tiene su máximo en la columna j
    esperado = np.empty(4, dtype=int)
    esperado[perm] = np.arange(4)
    np.testing.assert_array_equal(res.assignment, esperado)


def test_permutacion_identidad():
    maestro = sample_teacher("rnn", (3, 3, 3), seed=2)
    res = permutation_recovery(maestro, maestro, sample_uniform(3, 6, 200, seed=1).tokens)
    np.testing.assert_array_equal(res.assignment, [0, 1, 2])
    np.testing.assert_allclose(res.matrix, np.eye(3), atol=1e-8)


def test_permutacion_dimensiones_distintas():
    maestro = sample_teacher("rnn", (3, 3, 3), seed=2)
    estudiante = sample_teacher("rnn", (3, 3, 4), "high-capacity", seed=2)
    with pytest.raises(HiddenDimMismatchError):
        permutation_recovery(estudiante, maestro, sample_uniform(3, 4, 50, seed=0).tokens)


def test_distancia_de_parametros():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    assert parameter_distance(maestro, maestro, ("lambda", "b_in")) == {'lambda': 0.0, 'b_in': 0.0}


#  Curvas

def test_curva_del_maestro_como_estudiante_es_plana(dist):
    maestro = sample_teacher("rnn", (3, 3, 3), seed=0)
    reporte = length_gen_curve(maestro, maestro, [4, 8, 16], dist, seeds=[0, 1], num_samples=100,
                               model_name="maestro", id_sequences=50)
    df = reporte.frame
    assert list(df['t']) == [4, 8, 16]
    assert df['risk_mean'].max() < 1e-20
    assert df['perm_score'].iloc[0] == 1.0
    assert reporte.meta['seeds'] == [0, 1]


def test_curva_con_una_sola_longitud(dist):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    reporte = length_gen_curve(maestro, maestro, [4], dist, seeds=[0], num_samples=10)
    assert len(reporte.frame) == 1
    assert np.isnan(reporte.frame['r2_mean'].iloc[0])


@pytest.mark.parametrize("longitudes", [[], [8, 4], [4, 4]])
def test_curva_longitudes_invalidas(dist, longitudes):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    with pytest.raises(ConfigError):
        length_gen_curve(maestro, maestro, longitudes, dist, seeds=[0], num_samples=10)


def test_curva_un_estudiante_por_semilla(dist):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    with pytest.raises(ConfigError):
        length_gen_curve([maestro], maestro, [4], dist, seeds=[0, 1], num_samples=10)


def test_reporte_csv_reproducible(tmp_path, dist):
    maestro = sample_teacher("deepset", (3, 2, 4), seed=0)
    estudiante = sample_teacher("deepset", (3, 2, 4), seed=0, role="student")
    rutas = []
    for nombre in ("a.csv", "b.csv"):
        reporte = length_gen_curve(estudiante, maestro, [4, 8], dist, seeds=[0], num_samples=200,
                                   id_sequences=20)
        rutas.append(reporte.to_csv(tmp_path / nombre))
    assert rutas[0].read_bytes() == rutas[1].read_bytes()
    df = load_report_csv(rutas[0])
    assert (df['risk_mean'] > 0).all()


def test_reporte_extend_y_riesgo():
    a = EvalReport(rows=[{'model': 'a', 'family': 'ssm', 't': 4, 'risk_mean': 0.1, 'risk_std': 0.0,
                          'r2_mean': np.nan, 'r2_std': np.nan, 'perm_score': np.nan}])
    b = EvalReport(rows=[{**a.rows[0], 'model': 'b', 'risk_mean': 0.2}])
    juntos = a.extend(b)
    assert juntos.risk(4, model='b') == 0.2
    assert isinstance(juntos.frame, pd.DataFrame)


def test_trayectoria():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    x = RngStream(0, "trayectoria").generator().random((6, 2))
    df = trajectory_frame(maestro, maestro, x)
    assert list(df.columns) == ['t', 'y_true0', 'y_true1', 'y_pred0', 'y_pred1']
    np.testing.assert_array_equal(df['y_true0'], df['y_pred0'])
