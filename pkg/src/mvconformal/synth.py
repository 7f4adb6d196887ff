"""Seeded synthetic multi-view dataset generator.

Rows are i.i.d. (hence exchangeable): labels uniform over k classes; each
view draws features from an isotropic Gaussian around a class-specific mean.
Class means sit on mutually orthogonal directions scaled so that the pairwise
distance between any two class means is exactly separation * noise_sd, with a
fresh random basis per view, so views carry complementary information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabelSpace, MultiViewDataset, ViewMatrix
from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    n_examples: int
    k_classes: int
    n_views: int
    dims: tuple
    separation: tuple
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "separation", tuple(float(s) for s in self.separation))
        if self.n_examples < 1 or self.k_classes < 2:
            raise ConfigError("need n_examples >= 1 and k_classes >= 2")
        if self.n_views != len(self.dims) or self.n_views != len(self.separation):
            raise ConfigError("dims and separation must have one entry per view")
        if any(d < self.k_classes for d in self.dims):
            raise ConfigError("each view dimension must be >= k_classes (orthogonal class means)")
        if any(s < 0 for s in self.separation):
            raise ConfigError("separation must be nonnegative")
        if self.noise_sd <= 0:
            raise ConfigError("noise_sd must be positive")


def _orthonormal_columns(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """Gram-Schmidt on Gaussian draws; explicit loops keep it platform-stable."""
    basis = np.empty((d, k), dtype=np.float64)
    filled = 0
    while filled < k:
        v = rng.standard_normal(d)
        for j in range(filled):
            v = v - (basis[:, j] @ v) * basis[:, j]
        norm = math.sqrt(float(v @ v))
        if norm < 1e-8:
            continue
        basis[:, filled] = v / norm
        filled += 1
    return basis


def gen_multiview(cfg: SynthConfig) -> MultiViewDataset:
    """Deterministic per seed; per-view streams come from spawned seed keys."""
    width = len(str(cfg.k_classes - 1))
    label_space = LabelSpace.from_labels(f"c{c:0{width}d}" for c in range(cfg.k_classes))
    base = np.random.SeedSequence(entropy=int(cfg.seed) & (2**64 - 1))
    labels = np.random.default_rng(base).integers(0, cfg.k_classes, size=cfg.n_examples).astype(np.int64)
    views = []
    for v in range(cfg.n_views):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(cfg.seed) & (2**64 - 1), spawn_key=(v + 1,))
        )
        directions = _orthonormal_columns(rng, cfg.dims[v], cfg.k_classes)
        scale = cfg.separation[v] * cfg.noise_sd / math.sqrt(2.0)
        means = (scale * directions).T  # (k, d)
        feats = means[labels] + cfg.noise_sd * rng.standard_normal((cfg.n_examples, cfg.dims[v]))
        views.append(ViewMatrix(f"view{v}", feats))
    ids = tuple(f"ex{i:06d}" for i in range(cfg.n_examples))
    return MultiViewDataset(views=tuple(views), labels=labels, ids=ids, label_space=label_space)
