"""Tests de los gráficos SVG."""

import numpy as np
import pandas as pd
import pytest

from utils.errors import ReportFormatError
from utils.visualizations import (
    crear_curva_longitud,
    crear_grafico_lipschitz,
    crear_grafico_sobrevivientes,
    crear_trayectoria,
    emit_plots,
    guardar_svg,
)


@pytest.fixture
def reporte():
    return pd.DataFrame({
        'model': ['ssm', 'ssm', 'rnn', 'rnn'],
        'family': ['ssm', 'ssm', 'rnn', 'rnn'],
        't': [4, 8, 4, 8],
        'risk_mean': [1e-6, 2e-6, 1e-4, 3e-3],
        'risk_std': [1e-7, 1e-7, 1e-5, 1e-4],
        'r2_mean': [0.99, 0.98, np.nan, np.nan],
        'r2_std': [0.0, 0.0, np.nan, np.nan],
        'perm_score': [np.nan, np.nan, 1.0, 1.0],
    })


def test_curva_escribe_svg(tmp_path, reporte):
    ruta = guardar_svg(crear_curva_longitud(reporte, meta={'scale': 'smoke'}, longitud_entrenamiento=4),
                       tmp_path / "curva.svg")
    contenido = ruta.read_text(encoding='utf-8')
    assert contenido.lstrip().startswith('<?xml')
    assert '<svg' in contenido


def test_svg_reproducible(tmp_path, reporte):
    a = guardar_svg(crear_curva_longitud(reporte), tmp_path / "a.svg")
    b = guardar_svg(crear_curva_longitud(reporte), tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()


def test_curva_sin_filas():
    with pytest.raises(ReportFormatError):
        crear_curva_longitud(pd.DataFrame(columns=['model', 't', 'risk_mean', 'risk_std']))


def test_trayectoria_sin_columnas():
    with pytest.raises(ReportFormatError):
        crear_trayectoria(pd.DataFrame({'t': [1, 2]}))


def test_graficos_teoricos(tmp_path):
    envolvente = pd.DataFrame({'t': [1, 2, 3], 'max_ratio': [0.1, 0.2, 0.25]})
    rutas = [
        guardar_svg(crear_grafico_sobrevivientes([9, 5, 3, 3]), tmp_path / "sobrevivientes.svg"),
        guardar_svg(crear_grafico_lipschitz({'rnn': envolvente}, {'rnn': 1.1}), tmp_path / "lipschitz.svg"),
    ]
    assert all(r.stat().st_size > 0 for r in rutas)


def test_emit_plots_por_tipo_de_reporte(tmp_path, reporte):
    evaluacion = tmp_path / "results.csv"
    reporte.to_csv(evaluacion, index=False)
    trayectoria = tmp_path / "trajectory.csv"
    pd.DataFrame({'t': [1, 2, 3], 'y_true0': [0.1, 0.2, 0.3], 'y_pred0': [0.1, 0.2, 0.31]}).to_csv(
        trayectoria, index=False)
    entrenamiento = tmp_path / "train.csv"
    pd.DataFrame({'epoch': [1, 2], 'train_loss': [0.5, 0.1], 'val_loss': [0.6, 0.2], 'lr': [1e-3, 1e-3]}).to_csv(
        entrenamiento, index=False)

    rutas = emit_plots([evaluacion, trayectoria, entrenamiento], tmp_path / "figuras")
    assert [r.name for r in rutas] == ['results.svg', 'trajectory.svg', 'train.svg']


def test_emit_plots_sin_reportes(tmp_path):
    with pytest.raises(ReportFormatError):
        emit_plots([], tmp_path)


def test_emit_plots_reporte_inexistente(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plots([tmp_path / "no.csv"], tmp_path)


def test_emit_plots_reporte_mal_formado(tmp_path, reporte):
    ruta = tmp_path / "results.csv"
    reporte.assign(risk_mean=-1.0).to_csv(ruta, index=False)
    with pytest.raises(ReportFormatError) as info:
        emit_plots([ruta], tmp_path)
    assert info.value.details['row'] == 1
