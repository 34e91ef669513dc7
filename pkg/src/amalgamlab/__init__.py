"""amalgamlab: unitary matrix models for amalgam stage groups and their
spectral certificates."""

__version__ = "0.1.0"

from .amalgam import (
    AmalgamNormalForm,
    AmalgamSpec,
    build_stage_group,
    double_embed,
    exact_amalgam_spec,
    free_kernel,
    kernel_basis_word,
    reduce_stage_word,
    stage_group_presentation,
)
from .config import ExperimentConfig, load_config
from .cosets import CosetTable, FiniteQuotient, normal_core, todd_coxeter
from .errors import AmalgamLabError, ComputationError, ConfigError
from .presentations import Presentation, parse_presentation, parse_word
from .reps import (
    ModelSchedule,
    UnitaryRep,
    evaluate,
    image_group_closure,
    random_permutation_model,
    regular_rep,
    stage_model,
    tensor_rep,
)
from .runner import render_report, run
from .spectral import (
    MFReport,
    NormEstimate,
    ball_lower_bound,
    mf_report,
    op_norm,
)
from .words import GroupPolynomial, Letter, Word

__all__ = [
    "__version__",
    "AmalgamLabError",
    "AmalgamNormalForm",
    "AmalgamSpec",
    "ComputationError",
    "ConfigError",
    "CosetTable",
    "ExperimentConfig",
    "FiniteQuotient",
    "GroupPolynomial",
    "Letter",
    "MFReport",
    "ModelSchedule",
    "NormEstimate",
    "Presentation",
    "UnitaryRep",
    "Word",
    "ball_lower_bound",
    "build_stage_group",
    "double_embed",
    "evaluate",
    "exact_amalgam_spec",
    "free_kernel",
    "image_group_closure",
    "kernel_basis_word",
    "load_config",
    "mf_report",
    "normal_core",
    "op_norm",
    "parse_presentation",
    "parse_word",
    "random_permutation_model",
    "reduce_stage_word",
    "regular_rep",
    "render_report",
    "run",
    "stage_group_presentation",
    "stage_model",
    "tensor_rep",
    "todd_coxeter",
]
