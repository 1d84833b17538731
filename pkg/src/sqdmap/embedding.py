"""Denoising-query construction from noised curves.

Each point coordinate is normalized over the perception range, sinusoidally
encoded to D/4 values, and the (x, y) pair projected to D/2 by a point
network. The n point embeddings are concatenated and reduced to a D/2
instance position embedding, which is fused with the D/2 class content
embedding into a D-dimensional query.

Networks here are plain affine stacks with explicit weights; nothing is
trained.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count, check_positive
from .geometry import DEFAULT_N_POINTS, PerceptionRange

ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
}


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 256
    n_points: int = DEFAULT_N_POINTS
    num_classes: int = 3
    pe_temperature: float = 10000.0
    coord_range: PerceptionRange = field(default_factory=PerceptionRange)

    def __post_init__(self):
        check_count(self.dim, "dim", minimum=4)
        if self.dim % 4:
            raise ValueError(f"dim must be divisible by 4, got {self.dim}")
        check_count(self.n_points, "n_points", minimum=2)
        check_count(self.num_classes, "num_classes")
        check_positive(self.pe_temperature, "pe_temperature")


class DenseNetwork:
    """Stack of affine layers; ``activation`` is applied between layers, not after the last."""

    def __init__(self, weights, biases, activation="relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} expects {w.shape[1]} inputs, "
                                 f"previous layer gives {self.weights[i - 1].shape[0]}")
        for arr in self.weights + self.biases:
            arr.setflags(write=False)
        self.activation = activation

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    @property
    def sizes(self):
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    @classmethod
    def identity(cls, dim):
        return cls([np.eye(dim)], [np.zeros(dim)], "identity")

    @classmethod
    def constant(cls, in_dim, bias):
        bias = np.asarray(bias, dtype=float)
        return cls([np.zeros((len(bias), in_dim))], [bias], "identity")

    @classmethod
    def random(cls, sizes, rng, activation="relu"):
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
            biases.append(rng.normal(0.0, 0.01, size=fan_out))
        return cls(weights, biases, activation)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"network expects input dim {self.in_dim}, got {x.shape[-1]}")
        act = ACTIVATIONS[self.activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w.T + b
            if i < last:
                x = act(x)
        return x

    def save(self, path):
        """Write the text weight format: a JSON header line, then per layer
        one line per weight row followed by one bias line."""
        lines = [json.dumps({"format": "sqdmap-dense-v1", "activation": self.activation,
                             "sizes": self.sizes})]
        for w, b in zip(self.weights, self.biases):
            lines.extend(" ".join(repr(float(v)) for v in row) for row in w)
            lines.append(" ".join(repr(float(v)) for v in b))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ValueError(f"{path}: empty weight file")
        header = json.loads(lines[0])
        if header.get("format") != "sqdmap-dense-v1":
            raise ValueError(f"{path}: unsupported weight format {header.get('format')!r}")
        sizes = header["sizes"]
        rows = iter(lines[1:])
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append([[float(v) for v in next(rows).split()] for _ in range(fan_out)])
            biases.append([float(v) for v in next(rows).split()])
        return cls(weights, biases, header["activation"])


def positional_encode(x, out_dim, temperature=10000.0):
    """Sinusoidal encoding of a scalar (or array of scalars) to ``out_dim`` values.

    Entry 2i is ``sin(x / temperature**(2i/out_dim))`` and entry 2i+1 the
    matching cosine.
    """
    if out_dim % 2:
        raise ValueError(f"out_dim must be even, got {out_dim}")
    x = np.asarray(x, dtype=float)
    freqs = temperature ** (2.0 * np.arange(out_dim // 2) / out_dim)
    arg = x[..., None] / freqs
    out = np.empty(x.shape + (out_dim,))
    out[..., 0::2] = np.sin(arg)
    out[..., 1::2] = np.cos(arg)
    return out


def normalize_coords(points, coord_range):
    """Map ego-frame coordinates in the perception rectangle onto [0, 1]."""
    pts = np.asarray(points, dtype=float)
    return np.stack([(pts[..., 0] + coord_range.half_length) / (2.0 * coord_range.half_length),
                     (pts[..., 1] + coord_range.half_width) / (2.0 * coord_range.half_width)],
                    axis=-1)


def _encode_points(points, cfg):
    norm = normalize_coords(points, cfg.coord_range)
    q = cfg.dim // 4
    return np.concatenate([positional_encode(norm[..., 0], q, cfg.pe_temperature),
                           positional_encode(norm[..., 1], q, cfg.pe_temperature)], axis=-1)


def point_embedding(p, cfg, mlp_pt):
    if mlp_pt.in_dim != cfg.dim // 2 or mlp_pt.out_dim != cfg.dim // 2:
        raise ValueError(f"point network must map {cfg.dim // 2} -> {cfg.dim // 2}")
    return mlp_pt(_encode_points(np.asarray(p, dtype=float), cfg))


def instance_pos_embedding(points, cfg, mlp_pt, mlp_pos):
    """Concatenate the per-point embeddings in order and reduce them to D/2."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-2:] != (cfg.n_points, 2):
        raise ValueError(f"expected {cfg.n_points} points, got shape {pts.shape}")
    half = cfg.dim // 2
    if mlp_pos.in_dim != cfg.n_points * half or mlp_pos.out_dim != half:
        raise ValueError(f"position network must map {cfg.n_points * half} -> {half}")
    per_point = point_embedding(pts, cfg, mlp_pt)
    return mlp_pos(per_point.reshape(pts.shape[:-2] + (cfg.n_points * half,)))


def content_embedding(cls, table):
    table = np.asarray(table)
    if not 0 <= cls < len(table):
        raise ValueError(f"class {cls} outside embedding table of {len(table)} rows")
    return table[cls]


def fuse_denoise_query(content, pos, mlp_fuse):
    content, pos = np.asarray(content, dtype=float), np.asarray(pos, dtype=float)
    if content.shape[-1] != pos.shape[-1]:
        raise ValueError("content and position embeddings differ in size")
    if mlp_fuse.in_dim != 2 * content.shape[-1] or mlp_fuse.out_dim != mlp_fuse.in_dim:
        raise ValueError(f"fuse network must map {2 * content.shape[-1]} -> {2 * content.shape[-1]}")
    return mlp_fuse(np.concatenate([content, pos], axis=-1))


@dataclass(frozen=True, eq=False)
class NetworkBundle:
    """All weights the query pipeline needs, including the propagation update net."""

    cfg: EmbeddingConfig
    mlp_pt: DenseNetwork
    mlp_pos: DenseNetwork
    mlp_fuse: DenseNetwork
    phi_t: DenseNetwork
    class_table: np.ndarray

    @classmethod
    def random(cls, cfg, seed=0):
        rng = np.random.Generator(np.random.PCG64(seed))
        half = cfg.dim // 2
        table = rng.normal(0.0, 1.0, size=(cfg.num_classes, half))
        table.setflags(write=False)
        return cls(
            cfg,
            DenseNetwork.random([half, half], rng),
            DenseNetwork.random([cfg.n_points * half, half], rng),
            DenseNetwork.random([cfg.dim, cfg.dim], rng),
            DenseNetwork.random([cfg.dim + 9, cfg.dim], rng),
            table,
        )

    def query(self, cls, points):
        """Denoising query for one curve."""
        return self.queries([cls], [points])[0]

    def queries(self, classes, point_sets):
        """Vectorized denoising queries for a batch of curves; shape (m, D)."""
        if len(classes) == 0:
            return np.zeros((0, self.cfg.dim))
        pts = np.asarray(point_sets, dtype=float)
        pos = instance_pos_embedding(pts, self.cfg, self.mlp_pt, self.mlp_pos)
        content = np.stack([content_embedding(c, self.class_table) for c in classes])
        return fuse_denoise_query(content, pos, self.mlp_fuse)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        cfg = self.cfg
        (directory / "config.json").write_text(json.dumps({
            "dim": cfg.dim, "n_points": cfg.n_points, "num_classes": cfg.num_classes,
            "pe_temperature": cfg.pe_temperature,
            "half_length": cfg.coord_range.half_length, "half_width": cfg.coord_range.half_width,
        }))
        for name in ("mlp_pt", "mlp_pos", "mlp_fuse", "phi_t"):
            getattr(self, name).save(directory / f"{name}.txt")
        np.savetxt(directory / "class_table.txt", self.class_table, fmt="%.17g")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        raw = json.loads((directory / "config.json").read_text())
        cfg = EmbeddingConfig(raw["dim"], raw["n_points"], raw["num_classes"], raw["pe_temperature"],
                              PerceptionRange(raw["half_length"], raw["half_width"]))
        nets = {name: DenseNetwork.load(directory / f"{name}.txt")
                for name in ("mlp_pt", "mlp_pos", "mlp_fuse", "phi_t")}
        table = np.loadtxt(directory / "class_table.txt", ndmin=2)
        return cls(cfg, class_table=table, **nets)
