"""
Este archivo convierte la carpeta utils/ en un paquete Python,
permitiendo imports limpios como:
    from utils import sample_teacher, erm_train
    from utils import length_gen_curve, crear_curva_longitud
"""

# Versión del módulo
__version__ = "1.0.0"

#  Imports de errors.py
from .errors import LabError

#  Imports de autodiff.py
from .autodiff import (
    RngStream,
    Tape,
    backward,
    finite_difference_check,
    forward,
)

#  Imports de architectures.py
from .architectures import (
    DegenerateTeacher,
    ModelSpec,
    SequenceModel,
    build_spec,
    conjugate_rnn,
    deepset_forward,
    failure_teacher,
    init_model,
    load_model,
    make_degenerate,
    rnn_forward,
    sample_teacher,
    save_model,
    similarity_transform_ssm,
    ssm_forward,
    transformer_forward,
)

#  Imports de data_loader.py y preprocessing.py
from .data_loader import (
    DistributionSpec,
    load_report_csv,
    sample_compositional_train,
    sample_corner_test,
    sample_discrete,
    sample_tokens,
    sample_uniform,
)
from .preprocessing import label_batch, streaming_batch

#  Imports de training.py
from .training import TrainConfig, TrainReport, adamw_step, cot_train, erm_train, plateau_schedule

#  Imports de calculations.py
from .calculations import (
    EvalReport,
    identification_r2,
    length_gen_curve,
    linear_identification_r2,
    permutation_recovery,
    positionwise_risk,
    risk_at_length,
)

#  Imports de theory.py
from .theory import (
    HypothesisGrid,
    build_cover,
    constrained_survivors,
    cumulative_risk,
    empirical_lipschitz,
    finite_class_t0,
    lipschitz_bound_rnn,
    lipschitz_bound_transformer_block,
    rademacher_bound,
    rnn_model_constants,
    scalar_ssm,
    survivor_path,
    transformer_model_constants,
)

#  Imports de config.py y experiments.py
from .config import ExperimentConfig, config_hash, load_config
from .experiments import EXPERIMENTS, RunManifest, run_experiment, verify_manifest

#  Imports de visualizations.py
from .visualizations import crear_curva_longitud, emit_plots, guardar_svg

__all__ = [
    'LabError',
    'RngStream', 'Tape', 'backward', 'finite_difference_check', 'forward',
    'DegenerateTeacher', 'ModelSpec', 'SequenceModel', 'build_spec', 'conjugate_rnn',
    'deepset_forward', 'failure_teacher', 'init_model', 'load_model', 'make_degenerate',
    'rnn_forward', 'sample_teacher', 'save_model', 'similarity_transform_ssm', 'ssm_forward',
    'transformer_forward',
    'DistributionSpec', 'load_report_csv', 'sample_compositional_train', 'sample_corner_test',
    'sample_discrete', 'sample_tokens', 'sample_uniform', 'label_batch', 'streaming_batch',
    'TrainConfig', 'TrainReport', 'adamw_step', 'cot_train', 'erm_train', 'plateau_schedule',
    'EvalReport', 'identification_r2', 'length_gen_curve', 'linear_identification_r2', 'permutation_recovery',
    'positionwise_risk', 'risk_at_length',
    'HypothesisGrid', 'build_cover', 'constrained_survivors', 'cumulative_risk',
    'empirical_lipschitz', 'finite_class_t0', 'lipschitz_bound_rnn',
    'lipschitz_bound_transformer_block', 'rademacher_bound', 'rnn_model_constants', 'scalar_ssm',
    'survivor_path', 'transformer_model_constants',
    'ExperimentConfig', 'config_hash', 'load_config',
    'EXPERIMENTS', 'RunManifest', 'run_experiment', 'verify_manifest',
    'crear_curva_longitud', 'emit_plots', 'guardar_svg',
]
