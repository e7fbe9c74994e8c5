"""Hub-text identification and damage assessment for cross-modal encoders."""

from .embedding import (
    Measure,
    SimilarityConfig,
    TuningSet,
    clip_score,
    cosine,
    mean_similarity,
    normalize,
)
from .encoders import ToyTextEncoder, Vocabulary, load_image_fixtures
from .hub import (
    HubSolution,
    numeric_hub_oracle,
    optimal_hub_cosine,
    optimal_hub_inner_product,
    optimal_hub_sqeuclidean,
)
from .remote import RemoteEncoder
from .search import BeamEntry, SearchReport, beam_local_search, greedy_local_search, topk_select

__version__ = "0.1.0"

__all__ = [
    "BeamEntry",
    "HubSolution",
    "Measure",
    "RemoteEncoder",
    "SearchReport",
    "SimilarityConfig",
    "ToyTextEncoder",
    "TuningSet",
    "Vocabulary",
    "beam_local_search",
    "clip_score",
    "cosine",
    "greedy_local_search",
    "load_image_fixtures",
    "mean_similarity",
    "normalize",
    "numeric_hub_oracle",
    "optimal_hub_cosine",
    "optimal_hub_inner_product",
    "optimal_hub_sqeuclidean",
    "topk_select",
]
