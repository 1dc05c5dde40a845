"""Tests de los muestreadores y de la carga de reportes."""

import numpy as np
import pandas as pd
import pytest

from utils.data_loader import (
    DistributionSpec,
    band_satisfied,
    dump_batch_csv,
    estimate_band_acceptance,
    load_report_csv,
    sample_compositional_train,
    sample_corner_test,
    sample_discrete,
    sample_tokens,
    sample_uniform,
)
from utils.errors import DistributionError, ReportFormatError, SamplerAcceptanceError


def test_uniforme_media_por_componente():
    lote = sample_uniform(4, 5, 5000, seed=0)
    assert lote.tokens.shape == (5000, 5, 4)
    np.testing.assert_allclose(lote.tokens.reshape(-1, 4).mean(axis=0), 0.5, atol=0.01)


def test_misma_semilla_mismo_lote():
    a = sample_uniform(3, 4, 10, seed=42).tokens
    b = sample_uniform(3, 4, 10, seed=42).tokens
    np.testing.assert_array_equal(a, b)


def test_tamanos_invalidos():
    with pytest.raises(DistributionError):
        sample_uniform(0, 4, 10, seed=0)
    with pytest.raises(DistributionError):
        DistributionSpec.create(kind="discrete-grid", n=2, T=3)


def test_aceptacion_de_la_banda_T2():
    assert abs(estimate_band_acceptance(2, 100_000, seed=0) - 0.75) < 0.01


def test_aceptacion_de_la_banda_T3_contra_volumen():
    rng = np.random.default_rng(123)
    x = rng.random((200_000, 3))
    volumen = np.mean(np.abs(x.sum(axis=1) - 1.5) <= 0.5)
    assert abs(estimate_band_acceptance(3, 100_000, seed=1) - volumen) < 0.01


def test_banda_composicional_cumple_la_restriccion():
    lote = sample_compositional_train(3, 4, 500, seed=0)
    assert lote.tokens.shape == (500, 4, 3)
    assert np.all(band_satisfied(lote.tokens))
    assert 0 < lote.meta['component_acceptance'] <= 1


def test_banda_con_aceptacion_bajo_el_piso():
    with pytest.raises(SamplerAcceptanceError) as info:
        sample_compositional_train(1, 200, 10, seed=0, halfwidth=0.01, acceptance_floor=0.5)
    assert "T" in info.value.details


def test_complemento_de_esquinas():
    lote = sample_corner_test(1, 2, 2000, seed=0)
    assert not np.any(band_satisfied(lote.tokens))
    assert abs(lote.meta['acceptance'] - 0.25) < 0.02


def test_tokens_discretos_dos_niveles():
    lote = sample_discrete(3, 5, 200, levels=2, seed=0)
    assert set(np.unique(lote.tokens)) <= {0.0, 1.0}
    lote = sample_discrete(2, 3, 200, levels=3, seed=0)
    assert set(np.unique(lote.tokens)) <= {0.0, 0.5, 1.0}


def test_despacho_por_distribucion():
    dist = DistributionSpec.create(kind="corner-complement", n=2, T=3)
    lote = sample_tokens(dist, 20, seed=1)
    assert lote.meta['distribution'] == dist.tag
    assert dist.with_length(7).T == 7


def test_volcado_de_lote(tmp_path):
    lote = sample_uniform(2, 3, 4, seed=0)
    ruta = dump_batch_csv(lote, tmp_path / "lote.csv")
    df = pd.read_csv(ruta)
    assert list(df.columns) == ['seq_id', 't', 'x0', 'x1']
    assert len(df) == 12
    assert df['t'].min() == 1


#  Reportes

def _reporte(**cambios):
    fila = {'model': 'ssm', 'family': 'ssm', 't': 4, 'risk_mean': 1e-5, 'risk_std': 1e-6,
            'r2_mean': 0.99, 'r2_std': 0.01, 'perm_score': np.nan}
    fila.update(cambios)
    return pd.DataFrame([fila, {**fila, 't': 8}])


def test_carga_de_reporte_valido(tmp_path):
    ruta = tmp_path / "results.csv"
    _reporte().to_csv(ruta, index=False)
    df = load_report_csv(ruta)
    assert list(df['t']) == [4, 8]


def test_reporte_inexistente(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_report_csv(tmp_path / "no.csv")


@pytest.mark.parametrize("cambios, razon", [
    ({'risk_mean': -1.0}, "negativo"),
    ({'r2_mean': 1.5}, "R²"),
    ({'t': 0}, "t debe"),
    ({'risk_std': 'abc'}, "no numérico"),
])
def test_reporte_mal_formado_nombra_fila(tmp_path, cambios, razon):
    ruta = tmp_path / "results.csv"
    _reporte(**cambios).to_csv(ruta, index=False)
    with pytest.raises(ReportFormatError) as info:
        load_report_csv(ruta)
    assert info.value.details['row'] == 1
    assert info.value.details['file'] == str(ruta)
    assert razon in info.value.details['reason']


def test_reporte_sin_columnas(tmp_path):
    ruta = tmp_path / "results.csv"
    pd.DataFrame({'t': [1]}).to_csv(ruta, index=False)
    with pytest.raises(ReportFormatError):
        load_report_csv(ruta)
