"""Stream query denoising pipeline for vectorized HD-map construction."""
__version__ = "0.1.0"

from .embedding import DenseNetwork, EmbeddingConfig, NetworkBundle
from .estimators import AdaptiveTemporalMatcher, ChamferAPScorer, StreamQueryDenoiser
from .geometry import (
    BoundingRect, MapElement, PerceptionRange, SE2Transform, apply_se2, clip_to_range,
    min_bounding_rect, relative_transform, resample_polyline,
)
from .matching import MatchParams, MatchResult, adaptive_temporal_match, chamfer
from .metrics import EvalConfig, LossWeights, ScoredPrediction, evaluate
from .noising import NoiseParams, make_noisy_instance, make_rng
from .scenario import ScenarioConfig, generate_scenario, read_scenario, write_scenario
from .streaming import FrameRecord, StreamConfig, run_stream, run_stream_frame
