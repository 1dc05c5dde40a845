"""
cli.py: Interfaz de línea de comandos del laboratorio

PROPÓSITO:
    Un subcomando por experimento más `plot`. Las banderas sobrescriben la
    configuración (preset < archivo TOML < banderas).

CÓDIGOS DE SALIDA:
    0  éxito
    1  error inesperado  ({"error": "unexpected", ...} en stdout)
    2  LabError          (to_dict() en stdout)

Ejemplo de uso:
    $ python laboratorio.py lengthgen --scale smoke --family ssm --out resultados
    $ python laboratorio.py plot resultados/lengthgen/results.csv --out figuras
"""

import functools
import json
import logging
import sys
from typing import Any, Dict

import click

from .config import load_config
from .errors import LabError
from .experiments import EXPERIMENTS, run_experiment, verify_manifest
from .visualizations import emit_plots

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

FAMILIAS = click.Choice(["deepset", "transformer", "ssm", "rnn"])
CAPACIDADES = click.Choice(["structured-perceptron", "structured-diffeo", "high-capacity"])


def configurar_logging(nivel: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, nivel.upper()), format=LOG_FORMAT, force=True)


def _emitir_error(payload: Dict[str, Any], codigo: int) -> None:
    click.echo(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    sys.exit(codigo)


def manejar_errores(funcion):
    """LabError → JSON y salida 2; cualquier otra excepción → JSON y salida 1."""
    @functools.wraps(funcion)
    def envoltura(*args, **kwargs):
        try:
            return funcion(*args, **kwargs)
        except LabError as e:
            logger.error(e.message)
            _emitir_error(e.to_dict(), 2)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            logger.exception("❌ Error inesperado")
            _emitir_error({'error': 'unexpected', 'message': str(e), 'details': {'type': type(e).__name__}}, 1)
    return envoltura


def opciones_experimento(funcion):
    """Banderas comunes a todos los experimentos."""
    opciones = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                     help='Archivo TOML del experimento'),
        click.option('--scale', type=click.Choice(["smoke", "desk", "paper"]), default=None,
                     help='Preset de escala (por defecto smoke)'),
        click.option('--seed', type=int, default=None, help='Semilla base'),
        click.option('--seeds', type=int, default=None, help='Número de semillas'),
        click.option('--out', 'output_dir', type=click.Path(file_okay=False), default=None,
                     help='Directorio de resultados'),
        click.option('--workers', type=int, default=None, help='Procesos para entrenar semillas en paralelo'),
        click.option('--family', type=FAMILIAS, default=None, help='Familia del maestro'),
        click.option('--capacity', type=CAPACIDADES, default=None, help='Capacidad del maestro'),
        click.option('--student-family', type=FAMILIAS, default=None),
        click.option('--student-capacity', type=CAPACIDADES, default=None),
        click.option('--train-t', 'train_T', type=int, default=None, help='Longitud de entrenamiento'),
        click.option('--epochs', type=int, default=None),
        click.option('--verify', 'verify_path', type=click.Path(dir_okay=False), default=None,
                     help='Manifiesto previo: exige el mismo hash de configuración'),
    ]
    for opcion in reversed(opciones):
        funcion = opcion(funcion)
    return funcion


def _overrides(experimento: str, opciones: Dict[str, Any]) -> Dict[str, Any]:
    datos = {k: v for k, v in opciones.items() if k not in ('config_path', 'scale', 'epochs', 'verify_path')}
    datos['experiment'] = experimento
    if opciones.get('epochs') is not None:
        datos['train'] = {'epochs': opciones['epochs']}
    return datos


def _ejecutar(experimento: str, opciones: Dict[str, Any]) -> None:
    config = load_config(opciones.get('config_path'), opciones.get('scale'), _overrides(experimento, opciones))
    if opciones.get('verify_path'):
        verify_manifest(opciones['verify_path'], config)
    resultado = run_experiment(config)
    click.echo(json.dumps({
        'experiment': experimento,
        'run_dir': str(resultado.run_dir),
        'config_hash': resultado.manifest.config_hash,
        'seeds': resultado.manifest.seeds,
    }, sort_keys=True))


@click.group()
@click.option('--log-level', default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
              help='Nivel de logging')
def main(log_level: str) -> None:
    """Laboratorio de generalización en longitud y composición."""
    configurar_logging(log_level)


def _registrar(nombre: str) -> None:
    @opciones_experimento
    @manejar_errores
    def comando(**opciones):
        _ejecutar(nombre, opciones)

    comando.__doc__ = EXPERIMENTS[nombre].__doc__.strip().splitlines()[0]
    main.command(name=nombre)(comando)


for _nombre in EXPERIMENTS:
    _registrar(_nombre)


@main.command(name='plot')
@click.argument('reports', nargs=-1, type=click.Path(dir_okay=False))
@click.option('--out', 'output_dir', type=click.Path(file_okay=False), default="figuras")
@manejar_errores
def plot(reports, output_dir: str) -> None:
    """Genera SVG a partir de reportes CSV existentes."""
    rutas = emit_plots(list(reports), output_dir)
    click.echo(json.dumps({'plots': [str(r) for r in rutas]}, sort_keys=True))
