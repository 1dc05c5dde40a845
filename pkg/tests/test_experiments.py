"""Tests de extremo a extremo de los experimentos (configuraciones diminutas)."""

import json

import pandas as pd
import pytest

from utils.architectures import make_degenerate, sample_teacher
from utils.config import load_config
from utils.data_loader import DistributionSpec, load_report_csv
from utils.errors import ConfigError, ManifestMismatchError, TrainingDivergedError
from utils.experiments import (
    SeedRuns,
    _per_seed_ratios,
    provenance,
    run_experiment,
    train_students,
    verify_manifest,
)
from utils.theory import LIPSCHITZ_FAMILIES, scalar_ssm


def _config(tmp_path, experimento, **cambios):
    base = {
        'experiment': experimento,
        'output_dir': str(tmp_path),
        'eval_samples': 64,
        'id_sequences': 20,
        'lipschitz_trials': 10,
        'train': {'epochs': 1, 'batches_per_epoch': 3, 'batch_size': 16, 'validation_batches': 1,
                  'progress': False},
    }
    base.update(cambios)
    return load_config(scale="smoke", overrides=base)


def _artefactos(resultado):
    return set(resultado.manifest.artifacts)


#  Experimentos teóricos

def test_clase_finita(tmp_path):
    resultado = run_experiment(_config(tmp_path, "finite"))
    assert resultado.report['t0'] == 2
    assert resultado.report['certified']
    assert resultado.report['extended']['t0'] >= 1
    df = pd.read_csv(resultado.run_dir / "results.csv")
    assert list(df['T_h']) == [2, -1]
    assert {"results.csv", "survivors_extended.csv", "finite.svg", "config.toml"} <= _artefactos(resultado)


def test_cobertura(tmp_path):
    resultado = run_experiment(_config(tmp_path, "cover"))
    assert resultado.report['nested']
    assert resultado.report['nearest_survives_all_T']
    assert resultado.report['rademacher_bound'] > resultado.report['cover']['epsilon']


def test_lipschitz(tmp_path):
    resultado = run_experiment(_config(tmp_path, "lipschitz"))
    for sonda in resultado.report['probes'].values():
        assert sonda['violations'] == 0
    df = pd.read_csv(resultado.run_dir / "results.csv")
    assert list(df.columns) == ['family', 't', 'max_ratio', 'bound']
    assert set(df['family']) == set(LIPSCHITZ_FAMILIES)


#  Manifiesto

def test_manifiesto_y_verificacion(tmp_path):
    config = _config(tmp_path, "finite")
    resultado = run_experiment(config)
    ruta = resultado.run_dir / "manifest.json"
    manifiesto = json.loads(ruta.read_text(encoding='utf-8'))
    assert manifiesto['experiment'] == "finite"
    assert manifiesto['provenance'] == provenance()
    assert verify_manifest(ruta, config).config_hash == resultado.manifest.config_hash
    with pytest.raises(ManifestMismatchError):
        verify_manifest(ruta, _config(tmp_path, "finite", horizon=30))


def test_configuracion_resuelta_reproduce_el_hash(tmp_path):
    resultado = run_experiment(_config(tmp_path, "finite"))
    recargada = load_config(resultado.run_dir / "config.toml")
    assert verify_manifest(resultado.run_dir / "manifest.json", recargada)


#  Experimentos con entrenamiento

@pytest.mark.slow
def test_lengthgen_smoke(tmp_path):
    resultado = run_experiment(_config(tmp_path, "lengthgen", family="ssm"))
    df = load_report_csv(resultado.run_dir / "results.csv")
    assert list(df['t']) == [4, 8, 16]
    assert resultado.manifest.seeds == {'0': 'ok'}
    assert {'trajectory.csv', 'lengthgen.svg', 'ssm_seed0.json'} <= _artefactos(resultado)


@pytest.mark.slow
def test_lengthgen_con_una_sola_longitud(tmp_path):
    resultado = run_experiment(_config(tmp_path, "lengthgen", eval_lengths=[4]))
    assert list(load_report_csv(resultado.run_dir / "results.csv")['t']) == [4]


@pytest.mark.slow
def test_corrida_repetida_da_csv_identico(tmp_path):
    a = run_experiment(_config(tmp_path / "a", "lengthgen", family="rnn"))
    b = run_experiment(_config(tmp_path / "b", "lengthgen", family="rnn"))
    assert (a.run_dir / "results.csv").read_bytes() == (b.run_dir / "results.csv").read_bytes()
    assert (a.run_dir / "trajectory.csv").read_bytes() == (b.run_dir / "trajectory.csv").read_bytes()


@pytest.mark.slow
def test_falla_dos_brazos(tmp_path):
    resultado = run_experiment(_config(tmp_path, "failure", family="deepset"))
    assert resultado.report['t0'] == 5
    assert resultado.report['arms']['falla']['train_T'] == 5
    assert resultado.report['arms']['exito']['train_T'] == 10
    df = load_report_csv(resultado.run_dir / "results.csv")
    assert set(df['model']) == {'falla', 'exito'}
    assert 15 in set(df['t'])


def test_falla_familia_no_admitida(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment(_config(tmp_path, "failure", family="ssm"))


@pytest.mark.slow
def test_cot_dos_brazos(tmp_path):
    resultado = run_experiment(_config(tmp_path, "cot", family="ssm"))
    brazos = resultado.report['arms']
    assert brazos['con-cot']['guarantee'] and not brazos['sin-cot']['guarantee']
    assert set(brazos['con-cot']['param_distance']) == {'lambda', 'b_in'}


@pytest.mark.slow
def test_no_realizable(tmp_path):
    resultado = run_experiment(_config(tmp_path, "nonrealizable", family="ssm"))
    brazos = resultado.report['arms']
    assert brazos['desajustado']['student'].startswith("rnn/")
    for brazo in brazos.values():
        assert set(brazo["per_seed_ratio"]) == {"0"}
        assert brazo["seeds_meeting_10x"] == sum(c >= 10 for c in brazo["per_seed_ratio"].values())
    assert 20 in set(load_report_csv(resultado.run_dir / "results.csv")['t'])


def test_no_realizable_exige_estudiante_distinto(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment(_config(tmp_path, "nonrealizable", family="ssm", student_family="ssm"))


@pytest.mark.slow
def test_composicional(tmp_path):
    resultado = run_experiment(_config(tmp_path, "compgen", n=1, m=1, k=1, train_T=2))
    df = load_report_csv(resultado.run_dir / "results.csv")
    assert set(df['model']) == {'deepset', 'deepset-banda'}
    assert resultado.report['corner_loss'] >= 0


@pytest.mark.slow
def test_tokens_discretos(tmp_path):
    resultado = run_experiment(_config(tmp_path, "discrete", family="rnn", levels=2))
    df = load_report_csv(resultado.run_dir / "results.csv")
    assert df['perm_score'].notna().all()


#  Semillas

def test_todas_las_semillas_divergen(tmp_path):
    config = _config(tmp_path, "lengthgen", n=1, m=1, k=1, seeds=2)
    with pytest.raises(TrainingDivergedError):
        train_students(config, scalar_ssm(0.5, 1.0), lambda semilla: scalar_ssm(1e300, 1.0),
                       DistributionSpec.create(n=1, T=4))


def test_cociente_por_semilla(tmp_path):
    config = _config(tmp_path, "nonrealizable", train_T=4)
    base = sample_teacher("deepset", (3, 2, 4), seed=0)
    maestro = make_degenerate(base, 0.2, 4)
    runs = SeedRuns(seeds=[0, 1], students=[base, maestro], reports=[], status={})
    cocientes = _per_seed_ratios(config, runs, maestro, DistributionSpec.create(n=3, T=4), 20)
    assert set(cocientes) == {"0", "1"}
    # La semilla 0 no ve el desplazamiento en T pero sí en 5T
    assert cocientes["0"] >= 10
    assert cocientes["1"] == 0.0
