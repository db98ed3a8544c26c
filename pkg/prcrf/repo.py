"""
Persistence of trained models as versioned JSON files.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import ValidationError

from prcrf.autoencoder import AutoencoderModel, autoencoder_from_artifact, autoencoder_to_artifact
from prcrf.data import write_text_atomic
from prcrf.forest import PRCForest, forest_from_artifact, forest_to_artifact
from prcrf.models import SCHEMA_VERSION, Algorithm, ModelArtifact

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ModelRepository:
    """Saves and loads forest (+ autoencoder) model files as versioned JSON."""

    def __init__(self, path: PathLike):
        self.path = Path(path)

    def save(
        self,
        forest: PRCForest,
        autoencoder: Optional[AutoencoderModel] = None,
        flagged_row_indices: Optional[List[int]] = None,
    ) -> ModelArtifact:
        artifact = ModelArtifact(
            schema_version=SCHEMA_VERSION,
            algorithm=Algorithm.AE_PRC_RF if autoencoder is not None else Algorithm.PRC_RF,
            forest=forest_to_artifact(forest),
            autoencoder=autoencoder_to_artifact(autoencoder) if autoencoder is not None else None,
            flagged_row_indices=flagged_row_indices or [],
        )
        write_text_atomic(self.path, artifact.model_dump_json(indent=1) + "\n")
        logger.info(f"Saved {artifact.algorithm.value} model to {self.path}")
        return artifact

    def load(self) -> Tuple[PRCForest, Optional[AutoencoderModel]]:
        if not self.path.is_file():
            raise FileNotFoundError(f"model file not found: {self.path}")
        try:
            artifact = ModelArtifact.model_validate_json(self.path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ValueError(f"{self.path}: not a valid model file: {e}") from e
        if artifact.schema_version != SCHEMA_VERSION:
            raise ValueError(f"{self.path}: unsupported schema version {artifact.schema_version}")
        forest = forest_from_artifact(artifact.forest)
        autoencoder = None
        if artifact.autoencoder is not None:
            autoencoder = autoencoder_from_artifact(artifact.autoencoder)
        return forest, autoencoder
