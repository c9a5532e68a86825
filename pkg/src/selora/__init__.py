"""Spectral-encoding low-rank adapters on numpy.

Adapter factors are synthesized from sparse learnable coefficient matrices by
a fixed 2D inverse transform (Fourier or single-level wavelet), trained with
analytic gradients and AdamW, and merged into dense weights for inference.
"""
from .adapter import (
    Adapter,
    AdapterConfig,
    IndexSet,
    InitScheme,
    Schema,
    SparseSpectralMatrix,
    effective_weight,
    expected_parameter_count,
    forward,
    init_adapter,
    learnable_count,
    materialize,
    merge,
    sample_index_set,
    trainable_parameter_count,
)
from .analysis import SubspaceReport, amplification_factors, variance_report
from .autograd import GradientBundle, backward, finite_difference_check
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .errors import (
    AFUndefinedError,
    CheckpointFormatError,
    ConfigError,
    CorruptionError,
    DegenerateSparsityError,
    InitDegenerateError,
    InvalidDimensionError,
    InvalidRankError,
    NormalizationDegenerateError,
    NumericalError,
    SeLoRAError,
    UnsupportedVersionError,
)
from .metrics import export_metrics
from .optim import OptimizerConfig, OptimizerState, adamw_step, learning_rate
from .spectral import (
    FilterKind,
    SpectralBasis,
    adjoint_transform,
    build_wavelet_filter,
    forward_wavelet_2d,
    inverse_fourier_2d,
    inverse_wavelet_2d,
    transform,
)
from .tasks import make_teacher_student_task, make_toy_classification_task
from .trainer import RunMetrics, SweepReport, sweep, train

__version__ = "0.1.0"
