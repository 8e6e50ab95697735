"""affectkit: valence-arousal driven affective retrieval, grounding-loss
training, and evaluation."""

__version__ = "0.1.0"

from .core import (
    EmbeddingVector,
    Quadrant,
    VaPoint,
    as_embedding,
    cosine_similarity,
    quadrant,
    va_distance,
)
from .errors import (
    AffectError,
    ConfigError,
    DegenerateEmbeddingError,
    DuplicateIdError,
    EmptyDatabaseError,
    IngestError,
    MatrixError,
    NumericError,
    ShapeMismatchError,
    UndefinedCorrelationError,
)
from .ingest import (
    AffectDatabase,
    AffectRecord,
    AttributeGaussian,
    GaussianTable,
    StatsReport,
    ValidationReport,
    dataset_stats,
    fit_attribute_gaussians,
    load_gaussians,
    load_records,
    save_gaussians,
    save_records,
    validate_annotations,
)
from .retrieval import (
    DEFAULT_TAU,
    RetrievalQuery,
    RetrievalResult,
    SweepGrid,
    SweepResult,
    candidate_pool,
    retrieve,
    retrieve_top_k,
    sweep,
)
from .grounding import (
    AttributeWeightVector,
    GroundingBatch,
    attribute_probabilities,
    attribute_weights,
    grounding_gradient,
    grounding_loss,
    mahalanobis_weight,
    semantic_grounding_loss,
)
from .mapper import (
    MapperConfig,
    MapperParams,
    MapperSample,
    TrainingHistory,
    affect_loss,
    backward,
    gradient_check,
    init_params,
    load_checkpoint,
    mapper_forward,
    optimizer_step,
    save_checkpoint,
    total_loss,
    train,
)
from .metrics import (
    EvalReport,
    ImageBuffer,
    VaPredictor,
    clip_i,
    evaluate_manifest,
    predict_va,
    psnr,
    ssim,
    time_per_megapixel,
    va_error,
)
