import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

POSITIVE = 1
NEGATIVE = -1

SCHEMA_VERSION = 1

METRIC_NAMES = ("recall", "specificity", "precision", "accuracy", "f1")


class Activation(str, Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    IDENTITY = "identity"


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class TrainingPopulation(str, Enum):
    ALL = "all"
    MAJORITY = "majority"


class FilterScope(str, Enum):
    POPULATION = "population"
    ALL = "all"


class Algorithm(str, Enum):
    PRC_RF = "PRC-RF"
    AE_PRC_RF = "AE-PRC-RF"
    PRC_TREE = "PRC-Tree"
    AE_PRC_TREE = "AE-PRC-Tree"

    @property
    def uses_autoencoder(self) -> bool:
        return self in (Algorithm.AE_PRC_RF, Algorithm.AE_PRC_TREE)

    @property
    def is_forest(self) -> bool:
        return self in (Algorithm.PRC_RF, Algorithm.AE_PRC_RF)


# Data models
class SplitSpec(BaseModel):
    test_fraction: float = Field(0.3, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0)
    stratified: bool = True


class DatasetSummary(BaseModel):
    name: str
    n_observations: int
    minority_fraction: float = Field(ge=0.0, le=0.5)
    n_features: int

    def to_record(self, delimiter: str = ",") -> str:
        """Single-line machine-readable form."""
        return delimiter.join([
            self.name,
            str(self.n_observations),
            f"{self.minority_fraction:.4f}",
            str(self.n_features),
        ])


class SplitCandidate(BaseModel):
    feature_index: int = Field(ge=0)
    auprc: float = Field(ge=0.0)  # raw trapezoid sum; the pointwise flip can push it above 1
    threshold: float
    f1: float = Field(ge=0.0, le=1.0)


# Tree and forest parameters
class TreeParams(BaseModel):
    max_depth: int = Field(10, ge=1)
    min_leaf_size: int = Field(5, ge=1)
    n_features_per_split: int = Field(1, ge=1)
    rng_seed: int = Field(0, ge=0)


class ForestParams(BaseModel):
    n_trees: int = Field(100, ge=1)
    tree_params: TreeParams = Field(default_factory=TreeParams)
    master_seed: int = Field(0, ge=0)


# Autoencoder models
class AEConfig(BaseModel):
    """Autoencoder architecture, training and filtering settings.

    ``layer_widths`` lists the encoder from input to bottleneck; the decoder
    mirrors it. When left unset the widths are derived from the input width.
    """

    layer_widths: Optional[List[int]] = None
    hidden_activation: Activation = Activation.RELU
    output_activation: Activation = Activation.IDENTITY
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, ge=0.0)
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)
    seed: int = Field(0, ge=0)
    filter_quantile: float = Field(0.95, gt=0.0, le=1.0)
    training_population: TrainingPopulation = TrainingPopulation.MAJORITY
    filter_scope: FilterScope = FilterScope.POPULATION

    @field_validator("layer_widths")
    @classmethod
    def _check_widths(cls, widths: Optional[List[int]]) -> Optional[List[int]]:
        if widths is None:
            return widths
        if len(widths) < 2:
            raise ValueError("layer_widths needs an input width and at least one more layer")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        return widths

    def resolve_widths(self, input_width: int) -> List[int]:
        """Encoder widths for a given input width."""
        if self.layer_widths is not None:
            return list(self.layer_widths)
        return [input_width, math.ceil(input_width / 2), math.ceil(input_width / 4)]


class TrainReport(BaseModel):
    epoch_losses: List[float] = Field(default_factory=list)
    threshold: Optional[float] = None
    flagged_row_indices: List[int] = Field(default_factory=list)

    @field_validator("epoch_losses")
    @classmethod
    def _non_negative(cls, losses: List[float]) -> List[float]:
        if any(loss < 0 for loss in losses):
            raise ValueError("epoch losses must be non-negative")
        return losses


# Evaluation models
class MetricSet(BaseModel):
    recall: float = Field(ge=0.0, le=1.0)
    specificity: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    # metric names whose ratio was 0/0 and reported as 0
    undefined: List[str] = Field(default_factory=list)

    def values(self) -> Tuple[float, float, float, float, float]:
        return (self.recall, self.specificity, self.precision, self.accuracy, self.f1)


class RepetitionResult(BaseModel):
    algorithm: str
    repetition: int
    seed: int
    metrics: MetricSet
    n_flagged: int = 0
    test_indices_digest: str = ""


class BenchmarkReport(BaseModel):
    dataset: DatasetSummary
    algorithms: List[str]
    repetitions: int
    seeds: List[int]
    results: List[RepetitionResult] = Field(default_factory=list)
    means: Dict[str, MetricSet] = Field(default_factory=dict)
    excluded_repetitions: List[int] = Field(default_factory=list)
    paired_differences: Dict[str, Dict[str, float]] = Field(default_factory=dict)


# Serialized artifacts
class NodeRecord(BaseModel):
    depth: int
    nodescore: Tuple[float, float]
    nodelabel: int
    n_samples: int
    feature_index: Optional[int] = None
    feature_name: Optional[str] = None
    threshold: Optional[float] = None
    auprc: Optional[float] = None
    f1: Optional[float] = None

    @model_validator(mode="after")
    def _split_fields_together(self) -> "NodeRecord":
        present = [self.feature_index is not None, self.threshold is not None]
        if any(present) and not all(present):
            raise ValueError("split records need both feature_index and threshold")
        return self


class TreeArtifact(BaseModel):
    schema_version: int = SCHEMA_VERSION
    params: TreeParams
    n_features: int
    n_leaves: int
    nodes: List[NodeRecord]


class ForestArtifact(BaseModel):
    schema_version: int = SCHEMA_VERSION
    params: ForestParams
    feature_names: List[str]
    tree_seeds: List[int]
    trees: List[TreeArtifact]


class AutoencoderArtifact(BaseModel):
    schema_version: int = SCHEMA_VERSION
    config: AEConfig
    input_width: int
    weights: List[List[List[float]]]
    biases: List[List[float]]
    norm_min: Optional[List[float]] = None
    norm_max: Optional[List[float]] = None
    threshold: Optional[float] = None


class ModelArtifact(BaseModel):
    schema_version: int = SCHEMA_VERSION
    algorithm: Algorithm
    forest: ForestArtifact
    autoencoder: Optional[AutoencoderArtifact] = None
    flagged_row_indices: List[int] = Field(default_factory=list)