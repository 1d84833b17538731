"""scikit-learn style wrappers so the pipeline pieces compose with sklearn tooling.

``get_params``/``set_params``/``clone`` work as usual; fitted attributes end
with an underscore.
"""
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .embedding import EmbeddingConfig, NetworkBundle
from .geometry import PerceptionRange
from .matching import MatchParams, adaptive_temporal_match
from .metrics import EvalConfig, evaluate
from .noising import NoiseParams, make_rng
from .streaming import StreamConfig, run_stream


class AdaptiveTemporalMatcher(BaseEstimator):
    """Match current map elements against warped previous-frame elements.

    ``fit`` stores the warped previous elements, ``predict`` returns one
    :class:`~sqdmap.matching.MatchResult` per current element.
    """

    def __init__(self, alpha=0.1):
        self.alpha = alpha

    def fit(self, X, y=None):
        self.params_ = MatchParams(self.alpha)
        self.prev_elements_ = list(X)
        return self

    def predict(self, X):
        check_is_fitted(self, "prev_elements_")
        return adaptive_temporal_match(self.prev_elements_, list(X), self.params_)


class StreamQueryDenoiser(TransformerMixin, BaseEstimator):
    """Turn a sequence of frames into per-frame denoising reports.

    ``fit`` validates the configuration and draws the embedding networks
    from ``weights_seed`` (or adopts ``networks`` when given);
    ``transform`` runs the streaming pipeline with a fresh generator seeded
    by ``random_state``, so repeated calls give identical output.
    """

    def __init__(self, top_k=33, dn_query_budget=60, n_points=20, num_classes=3, dim=256,
                 alpha=0.1, gamma=0.2, noise_scale=0.6, label_flip_prob=0.5,
                 half_length=30.0, half_width=15.0, random_state=0, weights_seed=0, networks=None):
        self.top_k = top_k
        self.dn_query_budget = dn_query_budget
        self.n_points = n_points
        self.num_classes = num_classes
        self.dim = dim
        self.alpha = alpha
        self.gamma = gamma
        self.noise_scale = noise_scale
        self.label_flip_prob = label_flip_prob
        self.half_length = half_length
        self.half_width = half_width
        self.random_state = random_state
        self.weights_seed = weights_seed
        self.networks = networks

    def _config(self):
        s = self.noise_scale
        return StreamConfig(
            top_k=self.top_k, dn_query_budget=self.dn_query_budget, n_points=self.n_points,
            num_classes=self.num_classes,
            noise=NoiseParams(s, s, s, s, self.label_flip_prob, self.gamma),
            match=MatchParams(self.alpha),
            range=PerceptionRange(self.half_length, self.half_width),
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        if self.networks is not None:
            if self.networks.cfg.dim != self.dim or self.networks.cfg.n_points != self.n_points:
                raise ValueError("supplied networks do not match dim / n_points")
            self.networks_ = self.networks
        else:
            ecfg = EmbeddingConfig(self.dim, self.n_points, self.num_classes,
                                   coord_range=self.config_.range)
            self.networks_ = NetworkBundle.random(ecfg, self.weights_seed)
        return self

    def transform(self, X):
        check_is_fitted(self, "networks_")
        return run_stream(list(X), self.config_, self.networks_, make_rng(self.random_state))


class ChamferAPScorer(BaseEstimator):
    """Chamfer-threshold AP evaluator with sklearn-style parameters."""

    def __init__(self, thresholds=(0.5, 1.0, 1.5), classes=(0, 1, 2)):
        self.thresholds = thresholds
        self.classes = classes

    def evaluate(self, pred_frames, gt_frames):
        return evaluate(pred_frames, gt_frames, EvalConfig(self.thresholds, self.classes))

    def score(self, pred_frames, gt_frames):
        """Mean AP over classes."""
        return self.evaluate(pred_frames, gt_frames).mAP
