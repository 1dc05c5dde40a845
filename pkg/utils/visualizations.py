"""
visualizations.py: Gráficos de los experimentos en SVG
======================================================
Descripción: Funciones para crear las figuras del laboratorio con matplotlib
            (backend Agg). Cada función retorna una Figure; guardar_svg la
            escribe como SVG autónomo y reproducible.

PALETA DE COLORES:
- Primario: #1e3a8a (azul oscuro) - Curva principal
- Secundario: #fb923c (naranja) - Predicciones / cotas
- Terciario: #10b981 (verde) - Segunda serie
- Fondo: #f1f5f9 (gris claro)
- Texto: #1f2937 (gris oscuro)
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .data_loader import load_report_csv
from .errors import ReportFormatError

logger = logging.getLogger(__name__)

#  Constantes para paletas de colores
COLORES = {
    'primario': '#1e3a8a',
    'secundario': '#fb923c',
    'terciario': '#10b981',
    'fondo': '#f1f5f9',
    'texto': '#1f2937'
}

#  Paleta para series (modelos, componentes)
COLORES_SERIES = [
    '#1e3a8a',
    '#fb923c',
    '#10b981',
    '#3b82f6',
    '#f59e0b',
    '#ef4444',
    '#8b5cf6',
    '#ec4899',
    '#60a5fa',
]

# SVG reproducible: identificadores deterministas y sin fecha
matplotlib.rcParams.update({
    'svg.hashsalt': 'laboratorio',
    'svg.fonttype': 'none',
    'axes.facecolor': COLORES['fondo'],
    'axes.edgecolor': COLORES['texto'],
    'axes.labelcolor': COLORES['texto'],
    'text.color': COLORES['texto'],
    'axes.grid': True,
    'grid.color': 'white',
})


def _subtitulo(meta: Optional[Dict[str, object]]) -> str:
    if not meta:
        return ""
    return " · ".join(f"{k}={v}" for k, v in sorted(meta.items()))


def guardar_svg(fig: plt.Figure, ruta: Union[str, Path]) -> Path:
    """Guarda la figura como SVG (sin metadatos de fecha) y la cierra."""
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(ruta, format='svg', bbox_inches='tight', metadata={'Date': None})
    plt.close(fig)
    return ruta


#  Función 1: Curva de riesgo por longitud
def crear_curva_longitud(
    df: pd.DataFrame,
    titulo: str = 'Riesgo por longitud de secuencia',
    meta: Optional[Dict[str, object]] = None,
    longitud_entrenamiento: Optional[int] = None,
) -> plt.Figure:
    """
    Riesgo medio (± desviación sobre semillas) contra la longitud t, una línea por modelo.

    Args:
        df: Reporte de evaluación (columnas model, t, risk_mean, risk_std)
        titulo: Título del gráfico
        meta: Metadatos de la configuración para el subtítulo
        longitud_entrenamiento: Si se indica, línea vertical en T de entrenamiento

    Raises:
        ReportFormatError: Si el reporte no tiene filas
    """
    if df.empty:
        raise ReportFormatError("<reporte>", None, "lista de longitudes vacía")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, (modelo, grupo) in enumerate(df.groupby('model', sort=True)):
        grupo = grupo.sort_values('t')
        color = COLORES_SERIES[i % len(COLORES_SERIES)]
        riesgo = np.maximum(grupo['risk_mean'].to_numpy(), 1e-16)
        ax.plot(grupo['t'], riesgo, marker='o', color=color, linewidth=2, label=str(modelo))
        banda = grupo['risk_std'].to_numpy()
        ax.fill_between(grupo['t'], np.maximum(riesgo - banda, 1e-16), riesgo + banda,
                        color=color, alpha=0.2)
    if longitud_entrenamiento is not None:
        ax.axvline(longitud_entrenamiento, color=COLORES['secundario'], linestyle='--',
                   label=f'T entrenamiento = {longitud_entrenamiento}')
    ax.set_yscale('log')
    ax.set_xlabel('Longitud t')
    ax.set_ylabel('Riesgo ‖ŷ − y‖²')
    ax.set_title(f"{titulo}\n{_subtitulo(meta)}", fontsize=11)
    ax.legend(loc='best', fontsize=8)
    return fig


#  Función 2: Trayectoria verdadera vs. predicha
def crear_trayectoria(
    df: pd.DataFrame,
    titulo: str = 'Seguimiento de una secuencia de prueba',
    meta: Optional[Dict[str, object]] = None,
    max_componentes: int = 4,
) -> plt.Figure:
    """Superpone componentes verdaderas (línea) y predichas (marcadores) de una secuencia."""
    verdaderas = [c for c in df.columns if c.startswith('y_true')][:max_componentes]
    if not verdaderas:
        raise ReportFormatError("<trayectoria>", None, "sin columnas y_true*")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, col in enumerate(verdaderas):
        color = COLORES_SERIES[i % len(COLORES_SERIES)]
        sufijo = col[len('y_true'):]
        ax.plot(df['t'], df[col], color=color, linewidth=2, label=f'verdadera {sufijo}')
        pred = f'y_pred{sufijo}'
        if pred in df.columns:
            ax.plot(df['t'], df[pred], color=color, linestyle='none', marker='x', label=f'predicha {sufijo}')
    ax.set_xlabel('Posición t')
    ax.set_ylabel('Etiqueta')
    ax.set_title(f"{titulo}\n{_subtitulo(meta)}", fontsize=11)
    ax.legend(loc='best', fontsize=7, ncol=2)
    return fig


#  Función 3: Sobrevivientes del aprendiz restringido
def crear_grafico_sobrevivientes(
    tamanos: Sequence[int],
    titulo: str = 'Sobrevivientes por longitud de entrenamiento',
    meta: Optional[Dict[str, object]] = None,
) -> plt.Figure:
    """Tamaño del conjunto sobreviviente |A_T| contra T (escalera no creciente)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(np.arange(len(tamanos)), tamanos, where='post', color=COLORES['primario'], linewidth=2)
    ax.set_xlabel('Longitud de entrenamiento T')
    ax.set_ylabel('Puntos sobrevivientes')
    ax.set_title(f"{titulo}\n{_subtitulo(meta)}", fontsize=11)
    return fig


#  Función 4: Cocientes de Lipschitz empíricos
def crear_grafico_lipschitz(
    envolventes: Dict[str, pd.DataFrame],
    cotas: Dict[str, float],
    titulo: str = 'Cociente empírico vs. cota analítica',
    meta: Optional[Dict[str, object]] = None,
) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, (familia, df) in enumerate(sorted(envolventes.items())):
        color = COLORES_SERIES[i % len(COLORES_SERIES)]
        ax.plot(df['t'], df['max_ratio'], color=color, linewidth=2, label=f'{familia}: máximo observado')
        ax.axhline(cotas[familia], color=color, linestyle='--', label=f'{familia}: cota')
    ax.set_xlabel('Longitud t')
    ax.set_ylabel('‖Δy‖ / ‖Δθ‖')
    ax.set_title(f"{titulo}\n{_subtitulo(meta)}", fontsize=11)
    ax.legend(loc='best', fontsize=8)
    return fig


#  Función 5: Trayectoria de entrenamiento
def crear_grafico_entrenamiento(df: pd.DataFrame, titulo: str = 'Pérdida por época') -> plt.Figure:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(df['epoch'], df['train_loss'], color=COLORES['primario'], linewidth=2, label='entrenamiento')
    ax.plot(df['epoch'], df['val_loss'], color=COLORES['secundario'], linewidth=2, label='validación')
    ax.set_yscale('log')
    ax.set_xlabel('Época')
    ax.set_ylabel('Pérdida')
    ax.set_title(titulo, fontsize=11)
    ax.legend(loc='best', fontsize=8)
    return fig


def emit_plots(
    reports: Sequence[Union[str, Path]],
    out_dir: Union[str, Path],
    meta: Optional[Dict[str, object]] = None,
) -> List[Path]:
    """
    Genera los SVG de una lista de reportes CSV.

    Los reportes de evaluación producen una curva de riesgo por longitud y los
    de trayectoria una superposición de componentes.

    Raises:
        ReportFormatError: Si un reporte está mal formado (nombra archivo y fila)
            o no hay reportes
    """
    if not reports:
        raise ReportFormatError("<ninguno>", None, "no se indicaron reportes")
    salida = Path(out_dir)
    generados = []
    for ruta in map(Path, reports):
        encabezado = pd.read_csv(ruta, nrows=0).columns if ruta.exists() else []
        if 'risk_mean' in encabezado or not ruta.exists():
            df = load_report_csv(ruta, 'eval')
            fig = crear_curva_longitud(df, meta=meta)
        elif 'train_loss' in encabezado:
            fig = crear_grafico_entrenamiento(load_report_csv(ruta, 'train'))
        else:
            fig = crear_trayectoria(load_report_csv(ruta, 'trajectory'), meta=meta)
        generados.append(guardar_svg(fig, salida / f"{ruta.stem}.svg"))
    logger.info(f"✅ {len(generados)} gráficos SVG en {salida}")
    return generados
