"""Tests de las herramientas teóricas: clases finitas, coberturas y cotas."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.architectures import sample_teacher
from utils.calculations import risk_at_length
from utils.data_loader import DistributionSpec
from utils.errors import (
    ConfigError,
    ContractionViolatedError,
    CoverPreconditionError,
    EmptySurvivorSetError,
    GridPreconditionError,
)
from utils.theory import (
    LIPSCHITZ_FAMILIES,
    HypothesisGrid,
    LipschitzConstants,
    build_cover,
    constrained_survivors,
    cumulative_risk,
    empirical_lipschitz,
    finite_class_t0,
    lipschitz_bound_rnn,
    lipschitz_bound_transformer_block,
    rademacher_bound,
    risk_curve,
    rnn_model_constants,
    scalar_ssm,
    scalar_ssm_coefficients,
    scalar_ssm_cover,
    scalar_ssm_exact_risk,
    survivor_path,
    transformer_model_constants,
)


#  Riesgo exacto de SSM escalares

def test_riesgo_exacto_predictor_cero():
    riesgos = scalar_ssm_exact_risk((0.0, 0.0, 0.0, 0.0), (1.0, 1.0, 1.0, 0.0), 1)
    assert riesgos[0] == pytest.approx(1 / 3)


def test_riesgo_exacto_contra_monte_carlo():
    estudiante, maestro = scalar_ssm(0.3, 1.0), scalar_ssm(0.5, 1.0)
    exacto, error = risk_curve(estudiante, maestro, 4)
    assert np.all(error == 0)
    assert exacto[0] == 0.0
    uniforme = DistributionSpec.create(n=1, T=4)
    for t in (2, 4):
        mc = risk_at_length(estudiante, maestro, t, uniforme, 50_000, seed=t).mean
        assert mc == pytest.approx(exacto[t - 1], rel=0.05)


def test_monte_carlo_requiere_distribucion():
    maestro = sample_teacher("ssm", (2, 2, 2), seed=0)
    with pytest.raises(GridPreconditionError):
        risk_curve(maestro, maestro, 3)
    riesgos, errores = risk_curve(maestro, maestro, 3, DistributionSpec.create(n=2, T=3), num_samples=50)
    np.testing.assert_array_equal(riesgos, 0.0)
    assert errores.shape == (3,)


def test_coeficientes_solo_para_ssm_escalar():
    assert scalar_ssm_coefficients(scalar_ssm(0.5, 2.0, 0.5, 0.1)) == (0.5, 2.0, 0.5, 0.1)


@settings(max_examples=30, deadline=None)
@given(
    riesgos=st.lists(st.floats(min_value=0, max_value=10, allow_nan=False), min_size=1, max_size=20),
)
def test_riesgo_acumulado_no_decrece(riesgos):
    acumulados = [cumulative_risk(riesgos, T) for T in range(len(riesgos) + 1)]
    assert all(b >= a for a, b in zip(acumulados, acumulados[1:]))


#  Clase finita

def test_clase_finita_dos_entradas():
    grid = HypothesisGrid.scalar_ssm([0.0, 0.5])
    resultado = finite_class_t0(grid, scalar_ssm(0.5, 1.0))
    assert resultado.t0 == 2
    assert resultado.t_h == [2, None]
    assert resultado.survivors(1) == [0, 1]
    assert resultado.survivors(2) == [1]
    assert resultado.certified
    assert list(grid.risk_table.columns[:2]) == ['t1', 't2']


def test_clase_finita_solo_el_maestro():
    grid = HypothesisGrid.scalar_ssm([0.5])
    assert finite_class_t0(grid, scalar_ssm(0.5, 1.0)).t0 == 0


def test_entrada_equivalente_por_similitud_nunca_falla():
    grid = HypothesisGrid.scalar_ssm([0.5], bs=[1.0, 2.0], ws=[0.5, 1.0])
    resultado = finite_class_t0(grid, scalar_ssm(0.5, 1.0))
    indice = grid.entries.index((0.5, 2.0, 0.5))
    assert resultado.t_h[indice] is None
    assert resultado.t0 == 1


def test_rejilla_sin_el_maestro():
    with pytest.raises(GridPreconditionError):
        finite_class_t0(HypothesisGrid.scalar_ssm([0.0, 0.25]), scalar_ssm(0.5, 1.0))


def test_tabla_de_sobrevivientes():
    grid = HypothesisGrid.scalar_ssm([0.0, 0.5])
    df = finite_class_t0(grid, scalar_ssm(0.5, 1.0), horizon=10).frame(grid, 2)
    assert list(df.columns) == ['entry_id', 'lambda', 'b', 'w', 'T_h', 'survives_at_T']
    assert list(df['T_h']) == [2, -1]
    assert list(df['survives_at_T']) == [0, 1]


#  Cobertura

def test_cobertura_respeta_eta():
    cobertura = scalar_ssm_cover((0.3, 0.5), (0.9, 1.1), epsilon=0.05)
    assert cobertura.eta == pytest.approx(0.05 / cobertura.lipschitz)
    rng = np.random.default_rng(0)
    for theta in rng.uniform([0.3, 0.9], [0.5, 1.1], size=(200, 2)):
        distancia = np.min(np.linalg.norm(cobertura.grid - theta, axis=1))
        assert distancia <= cobertura.eta + 1e-12


def test_cobertura_eta_demasiado_grande():
    with pytest.raises(CoverPreconditionError):
        build_cover(("a",), [(0.0, 1.0)], epsilon=0.1, lipschitz=1.0, eta=0.2)


def test_cobertura_demasiados_puntos():
    with pytest.raises(CoverPreconditionError) as info:
        build_cover(("a", "b"), [(0.0, 1.0), (0.0, 1.0)], epsilon=1e-3, lipschitz=1.0, max_points=100)
    assert info.value.details['points'] > 100


def test_cobertura_en_T0_sobrevive_completa():
    cobertura = scalar_ssm_cover((0.3, 0.5), (0.9, 1.1), epsilon=0.05)
    maestro = scalar_ssm(0.4, 1.0)
    assert constrained_survivors(cobertura, maestro, None, 0) == list(range(cobertura.size))


def test_camino_de_sobrevivientes_anidado():
    cobertura = scalar_ssm_cover((0.3, 0.5), (0.9, 1.1), epsilon=0.05)
    maestro = scalar_ssm(0.4, 1.0)
    camino = survivor_path(cobertura, maestro, horizon=30)
    assert camino.nested
    assert cobertura.nearest((0.4, 1.0)) in camino.final
    assert 0 <= camino.stabilized_at <= 30
    df = camino.frame(cobertura, 30)
    assert df['survives_at_T'].sum() == len(camino.final)


def test_cobertura_sin_sobrevivientes():
    cobertura = build_cover(("lambda", "b"), [(0.0, 0.1), (3.0, 3.2)], epsilon=0.05, lipschitz=5.0)
    with pytest.raises(EmptySurvivorSetError) as info:
        survivor_path(cobertura, scalar_ssm(0.4, 1.0), horizon=5)
    assert 'nearest_miss' in info.value.details


#  Cotas de Lipschitz

def test_cota_bloque_transformer():
    assert lipschitz_bound_transformer_block(3, 2, 4) == pytest.approx(math.sqrt(73))
    assert lipschitz_bound_transformer_block(1.5, 0, 7) == pytest.approx(1.5)
    assert lipschitz_bound_transformer_block(0, 0, 0) == 0.0
    with pytest.raises(ConfigError):
        lipschitz_bound_transformer_block(-1, 0, 0)


def test_cota_rnn_valores_conocidos():
    constantes = LipschitzConstants(l_sigma=0.25, lambda_sup=2, b_sup=1, x_sup=1, m_omega=1, l_omega=1)
    cota = lipschitz_bound_rnn(constantes)
    assert cota.h_sup == pytest.approx(0.5)
    assert cota.gamma1 == pytest.approx(0.25)
    assert cota.gamma2 == pytest.approx(0.5)
    assert cota.bound == pytest.approx(math.sqrt(1.3125))
    assert cota.printed_bound == pytest.approx(math.sqrt(0.0625 + 0.0625 + 0.25))


def test_cota_rnn_sin_entradas():
    constantes = LipschitzConstants(l_sigma=0.25, lambda_sup=2, b_sup=1, x_sup=0, m_omega=1, l_omega=0.7)
    assert lipschitz_bound_rnn(constantes).bound == pytest.approx(0.7)


def test_cota_rnn_sin_contraccion():
    with pytest.raises(ContractionViolatedError):
        lipschitz_bound_rnn(LipschitzConstants(l_sigma=0.25, lambda_sup=4, b_sup=1, x_sup=1))


@pytest.mark.parametrize("familia", LIPSCHITZ_FAMILIES)
def test_cota_empirica_no_se_viola(familia):
    resultado = empirical_lipschitz(familia, trials=40, seed=0, max_t=20)
    assert resultado.violations == 0
    assert 0 < resultado.max_ratio <= resultado.bound
    assert len(resultado.envelope) == 20


def test_cota_de_la_rnn_del_laboratorio():
    constantes = rnn_model_constants(lambda_sup=2.0, b_sup=1.0, w_sup=1.0, x_sup=1.0, k=4)
    cota = lipschitz_bound_rnn(constantes)
    assert cota.h_sup == pytest.approx(2.0)
    assert cota.gamma1 == pytest.approx(0.25)
    assert cota.gamma2 == pytest.approx(0.125)
    assert cota.bound == pytest.approx(math.sqrt(0.328125))
    assert empirical_lipschitz("rnn-model", trials=2, max_t=3).bound == pytest.approx(cota.bound)


def test_cota_del_transformer_del_laboratorio():
    c = transformer_model_constants(w_sup=1.0, x_sup=1.0, k=4)
    assert c.l_psi == pytest.approx(math.sqrt(1.03125))
    assert c.l_omega == pytest.approx(0.25 * math.sqrt(2))
    assert c.m_omega == pytest.approx(0.25)
    resultado = empirical_lipschitz("transformer-model", trials=2, max_t=3)
    assert resultado.bound == pytest.approx(math.sqrt(0.125 + 0.0625 * 1.03125))


@pytest.mark.parametrize("familia", ["rnn-model", "transformer-model"])
def test_cota_de_modelos_con_cajas_mas_amplias(familia):
    constantes = LipschitzConstants(lambda_sup=3.5, b_sup=2.0, w_sup=2.0, x_sup=1.5)
    resultado = empirical_lipschitz(familia, constantes, trials=30, seed=3, max_t=15)
    assert resultado.violations == 0
    assert resultado.max_ratio > 0


def test_rnn_del_laboratorio_sin_contraccion():
    with pytest.raises(ContractionViolatedError):
        empirical_lipschitz("rnn-model", LipschitzConstants(lambda_sup=4.0, b_sup=1.0, w_sup=1.0, x_sup=1.0),
                            trials=1)


def test_sonda_de_familia_desconocida():
    with pytest.raises(ConfigError):
        empirical_lipschitz("ssm", trials=1)


#  Rademacher

def test_cota_de_rademacher():
    assert rademacher_bound(1.0, math.e, 100, 10, 0.0) == pytest.approx(0.0632, abs=1e-4)
    assert rademacher_bound(5.0, 1, 100, 10, 0.03) == pytest.approx(0.03)
    with pytest.raises(ConfigError):
        rademacher_bound(1.0, 0, 100, 10, 0.0)
