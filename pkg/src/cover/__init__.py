"""Backend-agnostic OOD detection by confidence averaging over corrupted views.

The pipeline: expand an input into its original plus corrupted views,
score each view's logits with a confidence function, average, and
threshold.  Everything here works from logits alone; models stay outside
the package and talk to it through an NDJSON interchange format (or the
built-in pixel-prototype classifier for self-contained runs).
"""

from .corruptions import (
    BENCHMARK_KINDS,
    KINDS,
    ORIGINAL,
    SEVERITIES,
    CorruptionSpec,
    DimensionSet,
    apply_corruption,
    expand_dimensions,
    list_corruptions,
    load_severity_tables,
)
from .errors import (
    CoverError,
    DuplicateKey,
    EmptyBand,
    EmptyInput,
    ImageTooSmall,
    InconsistentK,
    MalformedLine,
    MissingDimension,
    MissingNegatives,
    NegativeLengthMismatch,
    NonFinite,
    NonPositiveSigma,
    OutOfDomain,
    TooFewClasses,
    UndecodableImage,
    UnsupportedKind,
    ZeroFeature,
    ZeroNorm,
)
from .gmm import (
    GMMParams,
    LemmaResult,
    ParamDelta,
    analytic_fpr_highscore,
    analytic_fpr_paper,
    apply_cover_delta,
    assumption_violations,
    fit_gmm_moments,
    gaussian_cdf,
    gaussian_quantile,
    portable_normal,
    sample_gmm,
    verify_lemma,
)
from .image import read_image, validate_image, write_png
from .ingest import (
    LogitRecord,
    LogitTable,
    PrototypeModel,
    SelectionResult,
    fit_prototype,
    prototype_logits,
    read_logits,
    score_table,
    select_corruptions,
    write_logits,
)
from .metrics import (
    EvalResult,
    ScoredSplit,
    auroc,
    calibrate_threshold,
    detect,
    evaluate,
    fpr_at_tpr,
)
from .mutation import (
    FrequencySplit,
    GroupPartition,
    MutationRecord,
    confidence_difference,
    frequency_split,
    kl_softmax,
    mutation_gap,
    partition_groups,
    pearson_correlation,
)
from .scoring import (
    DimensionalLogits,
    LogitVector,
    ScoreConfig,
    clipn_cover_score,
    cosine_logits,
    cover_score,
    energy_score,
    max_logit_score,
    msp_score,
    neglabel_cover_score,
    softmax,
)
from .synth import ExperimentResult, gen_synthetic_benchmark, run_cover_experiment

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
