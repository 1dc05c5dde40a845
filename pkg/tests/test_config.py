"""Tests de la resolución de la configuración."""

import pytest

from utils.config import PRESETS, config_hash, dump_config, load_config
from utils.errors import ConfigError


def test_preset_smoke_por_defecto():
    config = load_config()
    assert config.scale == "smoke"
    assert (config.n, config.train_T) == (4, 4)
    assert config.eval_lengths == [4, 8, 16]
    assert config.train.epochs == 2
    assert config.train.batches_per_epoch == 10
    assert config.seed_list == [0]


def test_preset_paper():
    config = load_config(scale="paper")
    assert (config.n, config.m, config.k, config.train_T) == (20, 20, 20, 10)
    assert config.eval_lengths == [10, 20, 50, 100]
    assert config.seeds == 5
    assert config.train.epochs == 100
    assert set(PRESETS) == {"smoke", "desk", "paper"}


@pytest.mark.parametrize("escala", sorted(PRESETS))
def test_presets_validos(escala):
    config = load_config(scale=escala)
    assert config.train_T in config.eval_lengths


def test_precedencia_preset_archivo_banderas(tmp_path):
    ruta = tmp_path / "exp.toml"
    ruta.write_text('scale = "desk"\nseeds = 2\nfamily = "rnn"\n[train]\nepochs = 3\n', encoding='utf-8')
    config = load_config(ruta, overrides={'seeds': 4, 'family': None})
    assert config.scale == "desk"
    assert config.n == 8
    assert config.train.epochs == 3
    assert config.train.batch_size == 256
    assert config.seeds == 4
    assert config.family == "rnn"


def test_escala_de_bandera_gana_al_archivo(tmp_path):
    ruta = tmp_path / "exp.toml"
    ruta.write_text('scale = "desk"\n', encoding='utf-8')
    assert load_config(ruta, scale="smoke").n == 4


def test_longitud_de_entrenamiento_se_incluye():
    config = load_config(overrides={'experiment': 'lengthgen', 'train_T': 5, 'eval_lengths': [16, 8, 8]})
    assert config.eval_lengths == [5, 8, 16]


@pytest.mark.parametrize("overrides", [
    {'seeds': 0},
    {'family': 'lstm'},
    {'eval_lengths': []},
    {'campo_desconocido': 1},
    {'train': {'lr': -1.0}},
])
def test_configuracion_invalida(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_archivo_inexistente_o_invalido(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "no.toml")
    ruta = tmp_path / "malo.toml"
    ruta.write_text("scale = = 1", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(ruta)


def test_escala_desconocida():
    with pytest.raises(ConfigError):
        load_config(scale="gigante")


def test_hash_estable_y_sensible():
    a = load_config(overrides={'seed': 3})
    assert config_hash(a) == config_hash(load_config(overrides={'seed': 3}))
    assert config_hash(a) != config_hash(load_config(overrides={'seed': 4}))


def test_volcado_y_recarga_preservan_el_hash(tmp_path):
    config = load_config(scale="desk", overrides={'family': 'transformer', 'heads': 2})
    ruta = dump_config(config, tmp_path / "config.toml")
    assert config_hash(load_config(ruta)) == config_hash(config)
