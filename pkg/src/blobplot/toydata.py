"""Built-in synthetic datasets for demos and acceptance runs.

`hourglass` is a 3D two-class set: one class shaped like an hourglass (two
dense lobes joined by a sparse neck), the other a small dense ball sitting
next to the neck. `cross` is a 3D star of seven equally long arms whose
point densities span a 10x range. `gaussians` is the usual bag of
well-separated isotropic blobs.
"""

from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError

TOY_NAMES = ("hourglass", "cross", "gaussians")


def _truncated_normal(rng, center, sigma, n, max_sigmas=2.0):
    """Gaussian ball with the tail resampled back inside `max_sigmas`.

    Unbounded tails would spawn single-point sub-clusters whose overlap
    rows are pure quantization noise, which no amount of optimization can
    match; the toys stay compact on purpose. `sigma` may be a per-axis
    vector (ellipsoidal cloud, truncation applied before scaling).
    """
    center = np.asarray(center, dtype=np.float64)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), center.shape)
    out = np.empty((n, center.size))
    got = 0
    while got < n:
        cand = rng.normal(0.0, 1.0, size=(2 * (n - got) + 8, center.size))
        keep = cand[np.linalg.norm(cand, axis=1) <= max_sigmas]
        take = min(len(keep), n - got)
        out[got:got + take] = keep[:take] * sigma
        got += take
    return out + center


def gen_hourglass(n: int = 2000, seed: int = 42,
                  small_fraction: float = 0.18) -> LabeledDataset:
    """Two 3D classes: dense lobes + sparse neck vs a small ball by the neck.

    The lobes are denser than the neck, which is the non-uniformity the
    sub-clustering stage is meant to absorb, and they are widest along an
    axis the ball is not offset on, so a variance-based 2D projection
    underplays the true class separation and leaves the optimizer real
    work to do.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(1,)))
    n_small = max(2, round(n * small_fraction))
    n_big = n - n_small
    n_neck = round(0.3 * n_big)
    n_lobe = (n_big - n_neck) // 2
    n_neck = n_big - 2 * n_lobe

    lobe_sigma = (0.5, 1.2, 0.7)
    top = _truncated_normal(rng, (0.0, 0.0, 2.0), lobe_sigma, n_lobe)
    bottom = _truncated_normal(rng, (0.0, 0.0, -2.0), lobe_sigma, n_lobe)
    neck = np.hstack([
        rng.normal(0.0, 0.25, size=(n_neck, 1)),
        rng.normal(0.0, 0.5, size=(n_neck, 1)),
        rng.uniform(-1.7, 1.7, size=(n_neck, 1)),
    ])
    big = np.vstack([top, bottom, neck])

    small = _truncated_normal(rng, (1.7, 0.4, 0.0), 0.6, n_small)
    points = np.vstack([big, small])
    labels = np.concatenate([np.zeros(n_big, np.int64),
                             np.ones(n_small, np.int64)])
    return LabeledDataset(points, labels, ("hourglass", "ball"))


def gen_cross(n: int = 3500, seed: int = 0, arms: int = 7,
              density_span: float = 10.0,
              thickness: float = 0.25) -> LabeledDataset:
    """Star of 3D arms with equal geometric size and a density gradient.

    Arms are straight segments of identical length fanned around the
    vertical axis with alternating elevation, so no arm collapses under a
    linear 2D projection. Per-arm point counts follow a geometric ladder
    whose extremes differ by `density_span`.
    """
    if arms < 2:
        raise ConfigError("cross needs at least 2 arms")
    weights = density_span ** (np.arange(arms) / (arms - 1))
    weights /= weights.sum()
    counts = np.maximum(2, np.round(n * weights).astype(int))

    chunks = []
    labels = []
    for a in range(arms):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(2, a)))
        azimuth = 2.0 * np.pi * a / arms
        elevation = np.deg2rad(10.0 if a % 2 == 0 else -10.0)
        axis = np.array([
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ])
        t = rng.uniform(1.2, 6.0, size=counts[a])
        jitter = rng.normal(0.0, thickness, size=(counts[a], 3))
        chunks.append(t[:, None] * axis[None, :] + jitter)
        labels.append(np.full(counts[a], a, np.int64))
    return LabeledDataset(np.vstack(chunks), np.concatenate(labels),
                          tuple(f"arm{a}" for a in range(arms)))


def gen_gaussians(m: int = 4, n_per_class: int = 250, dim: int = 0,
                  separation: float = 10.0, scale: float = 1.0,
                  seed: int = 0) -> LabeledDataset:
    """`m` isotropic Gaussians with axis-aligned centers `separation*scale`
    from the origin."""
    if m < 2:
        raise ConfigError("need at least 2 classes")
    d = dim if dim >= 2 else max(2, m)
    if d < m:
        raise ConfigError(f"dim {d} cannot hold {m} axis-aligned centers")
    chunks = []
    labels = []
    for c in range(m):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(3, c)))
        center = np.zeros(d)
        center[c] = separation * scale
        chunks.append(rng.normal(center, scale, size=(n_per_class, d)))
        labels.append(np.full(n_per_class, c, np.int64))
    return LabeledDataset(np.vstack(chunks), np.concatenate(labels),
                          tuple(f"g{c}" for c in range(m)))


def gen_toy(name: str, seed: int = 0, **params) -> LabeledDataset:
    """Dispatch by name; unknown names are a configuration error."""
    if name == "hourglass":
        return gen_hourglass(seed=seed, **params)
    if name == "cross":
        return gen_cross(seed=seed, **params)
    if name == "gaussians":
        return gen_gaussians(seed=seed, **params)
    raise ConfigError(f"unknown toy dataset {name!r}; "
                      f"known names: {', '.join(TOY_NAMES)}")
