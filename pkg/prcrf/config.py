"""
Configuration settings for training, prediction and benchmarking.

Values come from command-line flags, then an optional YAML key-value file,
then the defaults below. Environment variables are not consulted.
"""

import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from prcrf.models import (
    Activation,
    AEConfig,
    Algorithm,
    FilterScope,
    ForestParams,
    Optimizer,
    SplitSpec,
    TrainingPopulation,
    TreeParams,
)


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class Settings(BaseSettings):
    """Run settings with file and flag overrides."""

    # Dataset
    data: Optional[str] = None
    target: Optional[str] = None
    positive_label: str = "1"
    delimiter: str = ","

    # Randomness: every seed below derives from this one
    seed: int = Field(0, ge=0)

    # Train/test split
    test_fraction: float = Field(0.3, gt=0.0, lt=1.0)
    stratified: bool = True

    # Forest
    n_trees: int = Field(100, ge=1)
    max_depth: int = Field(10, ge=1)
    min_leaf: int = Field(5, ge=1)
    n_features: Optional[int] = Field(None, ge=1)  # None: floor(sqrt(feature count))

    # Autoencoder
    ae: bool = False
    ae_widths: Optional[List[int]] = None  # None: [n, ceil(n/2), ceil(n/4)]
    ae_epochs: int = Field(100, ge=1)
    ae_lr: float = Field(1e-3, ge=0.0)
    ae_batch: int = Field(32, ge=1)
    ae_quantile: float = Field(0.95, gt=0.0, le=1.0)
    ae_population: TrainingPopulation = TrainingPopulation.MAJORITY
    ae_optimizer: Optimizer = Optimizer.ADAM
    ae_activation: Activation = Activation.RELU
    ae_filter_scope: FilterScope = FilterScope.POPULATION

    # Benchmark
    repetitions: int = Field(100, ge=1)
    algorithms: List[Algorithm] = Field(
        default_factory=lambda: [Algorithm.PRC_RF, Algorithm.AE_PRC_RF]
    )
    ae_quantiles: Optional[List[float]] = None

    # Outputs
    out: Optional[str] = None
    model: Optional[str] = None
    threads: int = Field(1, ge=1)

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    model_config = SettingsConfigDict(case_sensitive=False, extra="forbid")

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        return (init_settings,)

    @field_validator("ae_widths", "algorithms", "ae_quantiles", mode="before")
    @classmethod
    def _comma_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("ae_quantiles")
    @classmethod
    def _quantile_range(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(not 0.0 < q <= 1.0 for q in value):
            raise ValueError(f"quantiles must lie in (0, 1], got {value}")
        return value

    def split_spec(self) -> SplitSpec:
        return SplitSpec(test_fraction=self.test_fraction, seed=self.seed, stratified=self.stratified)

    def features_per_split(self, feature_count: int) -> int:
        if self.n_features is not None:
            return self.n_features
        return max(1, math.isqrt(feature_count))

    def tree_params(self, feature_count: int) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_leaf_size=self.min_leaf,
            n_features_per_split=self.features_per_split(feature_count),
            rng_seed=self.seed,
        )

    def forest_params(self, feature_count: int) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            tree_params=self.tree_params(feature_count),
            master_seed=self.seed,
        )

    def ae_config(self) -> AEConfig:
        return AEConfig(
            layer_widths=self.ae_widths,
            hidden_activation=self.ae_activation,
            epochs=self.ae_epochs,
            batch_size=self.ae_batch,
            learning_rate=self.ae_lr,
            optimizer=self.ae_optimizer,
            seed=self.seed,
            filter_quantile=self.ae_quantile,
            training_population=self.ae_population,
            filter_scope=self.ae_filter_scope,
        )


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping of setting names (dashes or underscores) to values."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        values = yaml.safe_load(f) or {}
    if not isinstance(values, dict):
        raise ValueError(f"{path}: expected a mapping of setting names to values")
    return {str(key).replace("-", "_"): value for key, value in values.items()}


def load_settings(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """Defaults, then the config file, then non-None ``overrides``."""
    values: Dict[str, Any] = load_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return Settings(**values)


# Built-in defaults, used for help text
settings = Settings()
