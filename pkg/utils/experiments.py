"""
experiments.py: Orquestación de los experimentos del laboratorio

PROPÓSITO:
    Cada experimento entrena (o enumera) modelos según su configuración, evalúa
    y escribe en su directorio de corrida:
        - results.csv   tabla principal (esquema estable)
        - report.json   reporte completo
        - manifest.json hash de la configuración, artefactos, procedencia, estado por semilla
        - config.toml   configuración resuelta (reproduce la corrida con --config)
        - *.svg         figuras

DEPENDENCIAS:
    - pydantic: RunManifest
    - GitPython: cadena de procedencia (git describe)
    - concurrent.futures: semillas en paralelo (--workers)

TRAZABILIDAD:
    - Usado por: utils/cli.py
    - Importado desde: utils/__init__.py
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .architectures import (
    AnyModel,
    SequenceModel,
    failure_teacher,
    model_from_dict,
    model_to_dict,
    sample_teacher,
    save_model,
)
from .calculations import (
    EvalReport,
    json_default,
    length_gen_curve,
    parameter_distance,
    positionwise_risk,
    risk_at_length,
    trajectory_frame,
)
from .autodiff import RngStream
from .config import ExperimentConfig, config_hash, dump_config
from .data_loader import DistributionSpec, sample_tokens, write_csv
from .errors import ConfigError, ManifestMismatchError, TrainingDivergedError
from .theory import (
    HypothesisGrid,
    LIPSCHITZ_FAMILIES,
    empirical_lipschitz,
    finite_class_t0,
    lipschitz_bound_rnn,
    rademacher_bound,
    rnn_probe_constants,
    scalar_ssm,
    scalar_ssm_cover,
    survivor_path,
)
from .training import TrainConfig, TrainReport, cot_train, erm_train
from .visualizations import (
    crear_curva_longitud,
    crear_grafico_lipschitz,
    crear_grafico_sobrevivientes,
    crear_trayectoria,
    guardar_svg,
)

logger = logging.getLogger(__name__)

# Maestros degenerados por familia: (c, T0)
FAILURE_DEFAULTS = {'deepset': (0.2, 5), 'transformer': (0.1, 10)}
MISMATCHED_STUDENT = {'ssm': 'rnn', 'rnn': 'ssm', 'deepset': 'transformer', 'transformer': 'deepset'}


class RunManifest(BaseModel):
    """Manifiesto de una corrida."""

    experiment: str
    config_hash: str
    artifacts: Dict[str, str] = {}
    provenance: str = "sin-repositorio"
    wall_time: float = 0.0
    seeds: Dict[str, str] = {}


@dataclass
class RunResult:
    """Directorio de la corrida, reporte y manifiesto."""

    run_dir: Path
    report: dict
    manifest: RunManifest
    students: List[AnyModel] = field(default_factory=list)


def provenance() -> str:
    """`git describe --always --dirty` del repositorio que contiene al laboratorio."""
    try:
        import git

        repo = git.Repo(Path(__file__).resolve().parent, search_parent_directories=True)
        return repo.git.describe('--always', '--dirty')
    except Exception:
        return "sin-repositorio"


def verify_manifest(manifest_path: Union[str, Path], config: ExperimentConfig) -> RunManifest:
    """
    Comprueba que la configuración reproduce la corrida del manifiesto.

    Raises:
        ManifestMismatchError: Si el hash de la configuración no coincide
    """
    ruta = Path(manifest_path)
    if not ruta.exists():
        raise FileNotFoundError(f"❌ No se encontró el manifiesto: {ruta}")
    manifiesto = RunManifest.model_validate_json(ruta.read_text(encoding='utf-8'))
    actual = config_hash(config)
    if manifiesto.config_hash != actual:
        raise ManifestMismatchError(
            "❌ La configuración no coincide con el manifiesto",
            {'manifest': manifiesto.config_hash, 'config': actual},
        )
    return manifiesto


#  Entrenamiento por semilla

def _train_task(task: dict) -> dict:
    """Entrena un estudiante (ejecutable en un proceso aparte)."""
    student = model_from_dict(task['student'])
    teacher = model_from_dict(task['teacher'])
    dist = DistributionSpec(**task['dist'])
    config = TrainConfig(**task['train'])
    entrenar = cot_train if task['mode'] == "cot" else erm_train
    try:
        entrenado, reporte = entrenar(student, teacher, dist, config)
    except TrainingDivergedError as e:
        logger.warning(f"⚠️ Semilla {task['seed']}: {e.message}")
        return {'seed': task['seed'], 'status': "diverged", 'error': e.to_dict()}
    return {
        'seed': task['seed'],
        'status': "ok",
        'model': model_to_dict(entrenado),
        'report': reporte.model_dump(),
    }


@dataclass
class SeedRuns:
    """Estudiantes entrenados por semilla (sólo los que no divergieron)."""

    seeds: List[int]
    students: List[SequenceModel]
    reports: List[TrainReport]
    status: Dict[str, str]


def train_students(
    config: ExperimentConfig,
    teacher: AnyModel,
    make_student: Callable[[int], SequenceModel],
    dist: DistributionSpec,
    mode: str = "erm",
    label: str = "",
) -> SeedRuns:
    """Entrena un estudiante por semilla, en paralelo si config.workers > 1."""
    tareas = []
    for semilla in config.seed_list:
        entrenamiento = config.train.model_copy(update={
            'seed': semilla,
            'progress': config.train.progress and config.workers == 1,
        })
        tareas.append({
            'seed': semilla,
            'student': model_to_dict(make_student(semilla)),
            'teacher': model_to_dict(teacher),
            'dist': dist.model_dump(),
            'train': entrenamiento.model_dump(),
            'mode': mode,
        })
    if config.workers > 1 and len(tareas) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            resultados = list(pool.map(_train_task, tareas))
    else:
        resultados = [_train_task(t) for t in tareas]

    runs = SeedRuns([], [], [], {})
    for res in resultados:
        clave = f"{label}{res['seed']}" if label else str(res['seed'])
        runs.status[clave] = res['status']
        if res['status'] == "ok":
            runs.seeds.append(res['seed'])
            runs.students.append(model_from_dict(res['model']))
            runs.reports.append(TrainReport(**res['report']))
    if not runs.students:
        raise TrainingDivergedError(config.train.lr, config.train.epochs, -1, float('nan'))
    return runs


def _student_factory(config: ExperimentConfig, family: str, capacity: str, **options) -> Callable[[int], SequenceModel]:
    def crear(semilla: int) -> SequenceModel:
        return sample_teacher(family, config.dims, capacity, seed=semilla, role="student", **options)
    return crear


def _architecture_options(config: ExperimentConfig, family: str) -> dict:
    if family != "transformer":
        return {}
    return {'attention': config.attention, 'normalization': config.normalization,
            'heads': config.heads, 't_max': config.t_max}


def _default_teacher(config: ExperimentConfig) -> SequenceModel:
    return sample_teacher(config.family, config.dims, config.capacity, seed=config.seed, role="teacher",
                          **_architecture_options(config, config.family))


def _trajectory(config: ExperimentConfig, student: AnyModel, teacher: AnyModel, dist: DistributionSpec,
                run_dir: Path, artifacts: Dict[str, str]) -> None:
    largo = max(config.eval_lengths)
    secuencia = sample_tokens(dist.with_length(largo), 1, RngStream(config.seed, "trayectoria")).tokens[0]
    df = trajectory_frame(student, teacher, secuencia)
    artifacts['trajectory.csv'] = str(write_csv(df, run_dir / "trajectory.csv"))
    fig = crear_trayectoria(df, meta={'familia': config.family, 'T': config.train_T})
    artifacts['trajectory.svg'] = str(guardar_svg(fig, run_dir / "trajectory.svg"))


def _finish(
    config: ExperimentConfig,
    run_dir: Path,
    report: dict,
    artifacts: Dict[str, str],
    status: Dict[str, str],
    inicio: float,
    students: Optional[List[AnyModel]] = None,
) -> RunResult:
    artifacts['config.toml'] = str(dump_config(config, run_dir / "config.toml"))
    ruta_reporte = run_dir / "report.json"
    ruta_reporte.write_text(json.dumps(report, sort_keys=True, indent=2, default=json_default),
                            encoding='utf-8')
    artifacts['report.json'] = str(ruta_reporte)
    manifiesto = RunManifest(
        experiment=config.experiment,
        config_hash=config_hash(config),
        artifacts=dict(sorted(artifacts.items())),
        provenance=provenance(),
        wall_time=time.perf_counter() - inicio,
        seeds=status,
    )
    (run_dir / "manifest.json").write_text(manifiesto.model_dump_json(indent=2), encoding='utf-8')
    logger.info(f"✅ {config.experiment}: artefactos en {run_dir} ({manifiesto.wall_time:.1f}s)")
    return RunResult(run_dir, report, manifiesto, students or [])


def _run_dir(config: ExperimentConfig) -> Path:
    ruta = Path(config.output_dir) / config.experiment
    ruta.mkdir(parents=True, exist_ok=True)
    return ruta


def _meta(config: ExperimentConfig) -> dict:
    return {'familia': config.family, 'n': config.n, 'T': config.train_T, 'escala': config.scale}


def _save_students(run_dir: Path, runs: SeedRuns, prefix: str, artifacts: Dict[str, str]) -> None:
    for semilla, est in zip(runs.seeds, runs.students):
        nombre = f"{prefix}_seed{semilla}.json"
        artifacts[nombre] = str(save_model(est, run_dir / "modelos" / nombre))


#  Experimentos

def run_lengthgen(config: ExperimentConfig) -> RunResult:
    """Entrena en T = train_T con tokens uniformes y evalúa la curva en eval_lengths."""
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = _default_teacher(config)
    dist = DistributionSpec.create(kind="uniform-hypercube", n=config.n, T=config.train_T)
    familia_est = config.student_family or config.family
    runs = train_students(
        config, teacher,
        _student_factory(config, familia_est, config.student_capacity or config.capacity,
                         **_architecture_options(config, familia_est)),
        dist,
    )
    curva = length_gen_curve(runs.students, teacher, config.eval_lengths, dist, runs.seeds,
                             config.eval_samples, model_name=familia_est, id_sequences=config.id_sequences)
    artefactos = {'results.csv': str(curva.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(curva.frame, meta=_meta(config), longitud_entrenamiento=config.train_T)
    artefactos['lengthgen.svg'] = str(guardar_svg(fig, run_dir / "lengthgen.svg"))
    _trajectory(config, runs.students[0], teacher, dist, run_dir, artefactos)
    _save_students(run_dir, runs, familia_est, artefactos)
    reporte = {
        'eval': curva.to_dict(),
        'train': {str(s): r.model_dump() for s, r in zip(runs.seeds, runs.reports)},
    }
    return _finish(config, run_dir, reporte, artefactos, runs.status, inicio, runs.students)


def run_compgen(config: ExperimentConfig) -> RunResult:
    """Entrena en la banda composicional y evalúa en el complemento (esquinas) a T fijo."""
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = _default_teacher(config)
    banda = DistributionSpec.create(kind="compositional-band", n=config.n, T=config.train_T,
                                    band_halfwidth=config.band_halfwidth)
    esquinas = DistributionSpec.create(kind="corner-complement", n=config.n, T=config.train_T,
                                       band_halfwidth=config.band_halfwidth)
    runs = train_students(
        config, teacher,
        _student_factory(config, config.family, config.capacity, **_architecture_options(config, config.family)),
        banda,
    )
    curva = length_gen_curve(runs.students, teacher, [config.train_T], esquinas, runs.seeds,
                             config.eval_samples, model_name=config.family, id_sequences=config.id_sequences)
    control = length_gen_curve(runs.students, teacher, [config.train_T], banda, runs.seeds,
                               config.eval_samples, model_name=f"{config.family}-banda")
    tabla = curva.extend(control)
    artefactos = {'results.csv': str(tabla.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(tabla.frame, titulo='Riesgo en esquinas vs. banda', meta=_meta(config))
    artefactos['compgen.svg'] = str(guardar_svg(fig, run_dir / "compgen.svg"))
    reporte = {
        'eval': tabla.to_dict(),
        'corner_loss': curva.risk(config.train_T),
        'corner_r2': float(curva.frame['r2_mean'].iloc[0]),
        'train': {str(s): r.model_dump() for s, r in zip(runs.seeds, runs.reports)},
    }
    return _finish(config, run_dir, reporte, artefactos, runs.status, inicio, runs.students)


def _split_losses(students: List[AnyModel], teacher: AnyModel, seeds: List[int], t0: int, largo: int,
                  n: int, num_samples: int) -> dict:
    antes, despues, brecha = [], [], []
    for semilla, est in zip(seeds, students):
        tokens = sample_tokens(DistributionSpec.create(n=n, T=largo), num_samples,
                               RngStream(semilla, "eval/falla")).tokens
        riesgos = positionwise_risk(est, teacher, tokens)
        antes.append(float(np.mean(riesgos[:t0 - 1])) if t0 > 1 else float(riesgos[0]))
        despues.append(float(np.mean(riesgos[t0 - 1:])))
        diferencia = teacher.predict(tokens).labels - est.predict(tokens).labels
        brecha.append(float(np.mean(diferencia[:, t0:])))
    return {
        'loss_before_t0': float(np.mean(antes)),
        'loss_after_t0': float(np.mean(despues)),
        'ratio': float(np.mean(despues) / max(np.mean(antes), 1e-300)),
        'mean_gap_after_t0': float(np.mean(brecha)),
    }


def run_failure(config: ExperimentConfig) -> RunResult:
    """
    Maestro degenerado (igual a la base hasta T0, desplazado en c después).

    Dos brazos: 'falla' entrena con longitud T0 (nunca ve el desplazamiento) y
    'exito' con longitud 2·T0. Se informan las pérdidas para t < T0 y t ≥ T0.
    """
    if config.family not in FAILURE_DEFAULTS:
        raise ConfigError(f"❌ El experimento de falla admite {sorted(FAILURE_DEFAULTS)}")
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    c_def, t0_def = FAILURE_DEFAULTS[config.family]
    c = config.offset_c if config.offset_c is not None else c_def
    t0 = config.t0 if config.t0 is not None else t0_def
    teacher = failure_teacher(config.family, config.dims, c, t0, seed=config.seed)
    capacidad = config.student_capacity or "high-capacity"
    hacer = _student_factory(config, config.family, capacidad)

    largo = 3 * t0
    longitudes = sorted(set(config.eval_lengths) | {t0, t0 + 1, 2 * t0, largo})
    evaluacion = DistributionSpec.create(n=config.n, T=largo)
    tabla, resumen, estado, estudiantes = EvalReport(), {}, {}, []
    for brazo, T in (("falla", t0), ("exito", 2 * t0)):
        dist = DistributionSpec.create(n=config.n, T=T)
        runs = train_students(config, teacher, hacer, dist, label=f"{brazo}-")
        estado.update(runs.status)
        estudiantes.extend(runs.students)
        tabla = tabla.extend(length_gen_curve(runs.students, teacher, longitudes, evaluacion, runs.seeds,
                                              config.eval_samples, model_name=brazo))
        resumen[brazo] = _split_losses(runs.students, teacher, runs.seeds, t0, largo, config.n,
                                       config.eval_samples)
        resumen[brazo]['train_T'] = T
    artefactos = {'results.csv': str(tabla.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(tabla.frame, titulo=f'Maestro degenerado (c={c}, T0={t0})',
                               meta=_meta(config), longitud_entrenamiento=t0)
    artefactos['failure.svg'] = str(guardar_svg(fig, run_dir / "failure.svg"))
    reporte = {'eval': tabla.to_dict(), 'arms': resumen, 'offset_c': c, 't0': t0}
    return _finish(config, run_dir, reporte, artefactos, estado, inicio, estudiantes)


def run_cot(config: ExperimentConfig) -> RunResult:
    """Estudiante de alta capacidad entrenado sin y con supervisión CoT."""
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = _default_teacher(config)
    dist = DistributionSpec.create(n=config.n, T=config.train_T)
    capacidad = config.student_capacity or "high-capacity"
    hacer = _student_factory(config, config.family, capacidad, **_architecture_options(config, config.family))
    longitudes = sorted(set(config.eval_lengths) | {2 * config.train_T})

    tabla, brazos, estado, estudiantes = EvalReport(), {}, {}, []
    for brazo, modo in (("sin-cot", "erm"), ("con-cot", "cot")):
        runs = train_students(config, teacher, hacer, dist, mode=modo, label=f"{brazo}-")
        estado.update(runs.status)
        estudiantes.extend(runs.students)
        curva = length_gen_curve(runs.students, teacher, longitudes, dist, runs.seeds,
                                 config.eval_samples, model_name=brazo)
        tabla = tabla.extend(curva)
        brazos[brazo] = {
            'loss_at_2T': curva.risk(2 * config.train_T),
            # Sólo la supervisión CoT garantiza generalizar con capacidad degenerada
            'guarantee': modo == "cot",
        }
        if config.family in ("ssm", "rnn"):
            distancias = [parameter_distance(e, teacher, ("lambda", "b_in")) for e in runs.students]
            brazos[brazo]['param_distance'] = {
                nombre: float(np.mean([d[nombre] for d in distancias])) for nombre in ("lambda", "b_in")
            }
    artefactos = {'results.csv': str(tabla.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(tabla.frame, titulo='Supervisión CoT', meta=_meta(config),
                               longitud_entrenamiento=config.train_T)
    artefactos['cot.svg'] = str(guardar_svg(fig, run_dir / "cot.svg"))
    return _finish(config, run_dir, {'eval': tabla.to_dict(), 'arms': brazos}, artefactos, estado, inicio,
                   estudiantes)


def _per_seed_ratios(
    config: ExperimentConfig,
    runs: SeedRuns,
    teacher: AnyModel,
    dist: DistributionSpec,
    lejos: int,
) -> Dict[str, float]:
    """Cociente riesgo(lejos) / riesgo(train_T) de cada semilla, con los mismos flujos de evaluación."""
    cocientes = {}
    for semilla, est in zip(runs.seeds, runs.students):
        en_T = risk_at_length(est, teacher, config.train_T, dist, config.eval_samples, semilla).mean
        lejano = risk_at_length(est, teacher, lejos, dist, config.eval_samples, semilla).mean
        cocientes[str(semilla)] = lejano / max(en_T, 1e-300)
    return cocientes


def run_nonrealizable(config: ExperimentConfig) -> RunResult:
    """
    Estudiante fuera de la clase del maestro frente a un control emparejado.

    Informa la pérdida en train_T y en 5·train_T de ambos brazos y el cociente
    entre ambas de cada semilla (`per_seed_ratio`, `seeds_meeting_10x`).
    """
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = _default_teacher(config)
    familia_est = config.student_family or MISMATCHED_STUDENT[config.family]
    capacidad_est = config.student_capacity or config.capacity
    if familia_est == config.family and capacidad_est == config.capacity:
        raise ConfigError("❌ El estudiante debe diferir del maestro en familia o capacidad")
    dist = DistributionSpec.create(n=config.n, T=config.train_T)
    lejos = 5 * config.train_T
    longitudes = sorted(set(config.eval_lengths) | {lejos})

    tabla, brazos, estado, estudiantes = EvalReport(), {}, {}, []
    for brazo, familia, capacidad in (("desajustado", familia_est, capacidad_est),
                                      ("control", config.family, config.capacity)):
        hacer = _student_factory(config, familia, capacidad, **_architecture_options(config, familia))
        runs = train_students(config, teacher, hacer, dist, label=f"{brazo}-")
        estado.update(runs.status)
        estudiantes.extend(runs.students)
        curva = length_gen_curve(runs.students, teacher, longitudes, dist, runs.seeds,
                                 config.eval_samples, model_name=brazo)
        tabla = tabla.extend(curva)
        en_T = curva.risk(config.train_T)
        cocientes = _per_seed_ratios(config, runs, teacher, dist, lejos)
        brazos[brazo] = {
            'student': f"{familia}/{capacidad}",
            'loss_at_T': en_T,
            'loss_at_5T': curva.risk(lejos),
            'ratio': curva.risk(lejos) / max(en_T, 1e-300),
            'per_seed_ratio': cocientes,
            'seeds_meeting_10x': sum(1 for c in cocientes.values() if c >= 10.0),
        }
        logger.info(f"📊 {brazo}: {brazos[brazo]['seeds_meeting_10x']}/{len(cocientes)} semillas con cociente ≥ 10")
    artefactos = {'results.csv': str(tabla.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(tabla.frame, titulo='Maestro fuera de la clase', meta=_meta(config),
                               longitud_entrenamiento=config.train_T)
    artefactos['nonrealizable.svg'] = str(guardar_svg(fig, run_dir / "nonrealizable.svg"))
    return _finish(config, run_dir, {'eval': tabla.to_dict(), 'arms': brazos}, artefactos, estado, inicio,
                   estudiantes)


def run_discrete(config: ExperimentConfig) -> RunResult:
    """Entrena y evalúa con tokens discretos; para RNNs informa el puntaje de permutación."""
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = _default_teacher(config)
    dist = DistributionSpec.create(kind="discrete-grid", n=config.n, T=config.train_T, levels=config.levels)
    runs = train_students(
        config, teacher,
        _student_factory(config, config.family, config.capacity, **_architecture_options(config, config.family)),
        dist,
    )
    curva = length_gen_curve(runs.students, teacher, config.eval_lengths, dist, runs.seeds,
                             config.eval_samples, model_name=config.family, id_sequences=config.id_sequences)
    artefactos = {'results.csv': str(curva.to_csv(run_dir / "results.csv"))}
    fig = crear_curva_longitud(curva.frame, titulo=f'Tokens discretos ({config.levels} niveles)',
                               meta=_meta(config), longitud_entrenamiento=config.train_T)
    artefactos['discrete.svg'] = str(guardar_svg(fig, run_dir / "discrete.svg"))
    reporte = {
        'eval': curva.to_dict(),
        'train': {str(s): r.model_dump() for s, r in zip(runs.seeds, runs.reports)},
    }
    return _finish(config, run_dir, reporte, artefactos, runs.status, inicio, runs.students)


def run_finite(config: ExperimentConfig) -> RunResult:
    """
    Clase finita de SSM escalares: rejilla λ ∈ {0, 0.5} con el maestro λ = 0.5, y una
    rejilla ampliada que incluye una transformación de similitud del maestro.
    """
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = scalar_ssm(0.5, 1.0)
    rejilla = HypothesisGrid.scalar_ssm([0.0, 0.5])
    resultado = finite_class_t0(rejilla, teacher, horizon=config.horizon)
    ampliada = HypothesisGrid.scalar_ssm([0.0, 0.25, 0.5], bs=[1.0, 2.0], ws=[0.5, 1.0])
    resultado_ampliado = finite_class_t0(ampliada, teacher, horizon=config.horizon)

    T = max(resultado.t0, 1)
    tabla = resultado.frame(rejilla, T)
    artefactos = {
        'results.csv': str(write_csv(tabla, run_dir / "results.csv")),
        'survivors_extended.csv': str(write_csv(resultado_ampliado.frame(ampliada, max(resultado_ampliado.t0, 1)),
                                                run_dir / "survivors_extended.csv")),
    }
    tamanos = [len(resultado_ampliado.survivors(t)) for t in range(0, min(config.horizon, 20) + 1)]
    fig = crear_grafico_sobrevivientes(tamanos, titulo='Clase finita: sobrevivientes por T',
                                       meta={'T0': resultado_ampliado.t0})
    artefactos['finite.svg'] = str(guardar_svg(fig, run_dir / "finite.svg"))
    reporte = {
        'grid': rejilla.to_dict(),
        't0': resultado.t0,
        't_h': resultado.t_h,
        'tolerance': resultado.tolerance,
        'certified': resultado.certified,
        'survivors_at_t0': resultado.survivors(T),
        'extended': {
            'grid': ampliada.to_dict(),
            't0': resultado_ampliado.t0,
            't_h': resultado_ampliado.t_h,
            'survivors_after_t0': resultado_ampliado.survivors(resultado_ampliado.t0),
        },
    }
    return _finish(config, run_dir, reporte, artefactos, {}, inicio)


def run_cover(config: ExperimentConfig) -> RunResult:
    """Aprendiz restringido sobre una η-cobertura de SSM escalares λ ∈ [0.3, 0.5], b ∈ [0.9, 1.1]."""
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    teacher = scalar_ssm(0.4, 1.0)
    cobertura = scalar_ssm_cover((0.3, 0.5), (0.9, 1.1), config.epsilon)
    camino = survivor_path(cobertura, teacher, horizon=config.horizon)
    cercano = cobertura.nearest((0.4, 1.0))
    sobrevive = all(cercano in s for s in camino.sets)

    tabla = camino.frame(cobertura, camino.stabilized_at)
    artefactos = {'results.csv': str(write_csv(tabla, run_dir / "results.csv"))}
    fig = crear_grafico_sobrevivientes([len(s) for s in camino.sets],
                                       meta={'ε': config.epsilon, 'η': round(cobertura.eta, 5)})
    artefactos['cover.svg'] = str(guardar_svg(fig, run_dir / "cover.svg"))
    cota_perdida = (2 * 1.1 / (1 - 0.5)) ** 2
    reporte = {
        'cover': cobertura.to_dict(),
        'size': cobertura.size,
        'nearest_point': int(cercano),
        'nearest_survives_all_T': sobrevive,
        'nested': camino.nested,
        'stabilized_at': camino.stabilized_at,
        'survivors': camino.final,
        'rademacher_bound': rademacher_bound(cota_perdida, cobertura.size, config.eval_samples,
                                             max(camino.stabilized_at, 1), config.epsilon),
    }
    return _finish(config, run_dir, reporte, artefactos, {}, inicio)


def run_lipschitz(config: ExperimentConfig) -> RunResult:
    """
    Cocientes empíricos de Lipschitz frente a sus cotas: modelos analíticos de RNN y
    transformer más RnnModel y TransformerModel del laboratorio.
    """
    inicio = time.perf_counter()
    run_dir = _run_dir(config)
    largo = max(config.eval_lengths)
    resultados = {
        familia: empirical_lipschitz(familia, trials=config.lipschitz_trials, seed=config.seed, max_t=largo)
        for familia in LIPSCHITZ_FAMILIES
    }
    filas = []
    for familia, res in sorted(resultados.items()):
        df = res.envelope.assign(family=familia, bound=res.bound)
        filas.append(df[['family', 't', 'max_ratio', 'bound']])
    artefactos = {'results.csv': str(write_csv(pd.concat(filas, ignore_index=True), run_dir / "results.csv"))}
    fig = crear_grafico_lipschitz({f: r.envelope for f, r in resultados.items()},
                                  {f: r.bound for f, r in resultados.items()},
                                  meta={'ensayos': config.lipschitz_trials})
    artefactos['lipschitz.svg'] = str(guardar_svg(fig, run_dir / "lipschitz.svg"))
    rnn = lipschitz_bound_rnn(rnn_probe_constants(lambda_sup=2.0, b_sup=1.0, x_sup=1.0, w_sup=1.0))
    reporte = {
        'probes': {f: r.to_dict() for f, r in resultados.items()},
        'rnn_terms': {'h_sup': rnn.h_sup, 'gamma1': rnn.gamma1, 'gamma2': rnn.gamma2,
                      'bound': rnn.bound, 'printed_bound': rnn.printed_bound},
    }
    return _finish(config, run_dir, reporte, artefactos, {}, inicio)


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig], RunResult]] = {
    'lengthgen': run_lengthgen,
    'compgen': run_compgen,
    'failure': run_failure,
    'cot': run_cot,
    'nonrealizable': run_nonrealizable,
    'finite': run_finite,
    'cover': run_cover,
    'lipschitz': run_lipschitz,
    'discrete': run_discrete,
}


def run_experiment(config: ExperimentConfig) -> RunResult:
    logger.info(f"🚀 Experimento {config.experiment} (escala {config.scale}, familia {config.family})")
    return EXPERIMENTS[config.experiment](config)
