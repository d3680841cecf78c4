"""Equal-weight isotropic Gaussian mixtures with random centers.

The mixture density is

    f(x | w) = (2 pi sigma^2)^(-n/2) (1/q) sum_j exp(-|x - w_j|^2 / (2 sigma^2))

and the centers ``w_j`` are i.i.d. ``N(0, s^2 1)`` with ``s^2 = mu * sigma^2``.
All entropies are in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from gme._parallel import generator
from gme.errors import InvalidArgument

# Points per random stream in sample_mixture; part of the reproducibility
# contract, changing it changes every sampled point.
CHUNK_SIZE = 1 << 16


def gaussian_entropy_1d(sigma2: float) -> float:
    """Entropy ``ln(sigma sqrt(2 pi e))`` of a 1-D Gaussian with variance ``sigma2``."""
    return 0.5 * math.log(2.0 * math.pi * math.e * sigma2)


@dataclass(frozen=True)
class MixtureConfig:
    """Parameters ``(n, q, sigma^2, mu)`` of the random mixture ensemble."""

    n: int
    q: int
    sigma2: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgument(f"n must be a positive integer, got {self.n!r}")
        if int(self.q) != self.q or self.q < 2:
            raise InvalidArgument(f"q must be an integer >= 2, got {self.q!r}")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidArgument(f"sigma2 must be > 0, got {self.sigma2!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise InvalidArgument(f"mu must be >= 0, got {self.mu!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def s2(self) -> float:
        """Variance of each center coordinate."""
        return self.mu * self.sigma2

    @property
    def h_sigma(self) -> float:
        return gaussian_entropy_1d(self.sigma2)

    def replace(self, **changes) -> "MixtureConfig":
        fields = dict(n=self.n, q=self.q, sigma2=self.sigma2, mu=self.mu)
        fields.update(changes)
        return MixtureConfig(**fields)

    def check_series_regime(self) -> None:
        """Warn when the expansion parameter n*mu is not small."""
        if self.n * self.mu > 1:
            warnings.warn(
                f"n*mu = {self.n * self.mu:g} > 1: the series is an expansion in n*mu "
                "and is not expected to converge here",
                RuntimeWarning, stacklevel=3,
            )


@dataclass(frozen=True)
class CenterSet:
    """One realization of the q component centers, shape ``(q, n)``."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim != 2:
            raise InvalidArgument(f"centers must be a (q, n) array, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def q(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    def check(self, config: MixtureConfig) -> None:
        if self.centers.shape != (config.q, config.n):
            raise InvalidArgument(
                f"centers have shape {self.centers.shape}, expected ({config.q}, {config.n})")

    def __eq__(self, other):
        if not isinstance(other, CenterSet):
            return NotImplemented
        return np.array_equal(self.centers, other.centers)

    __hash__ = None


METHODS = ("series-brute", "series-det", "monte-carlo", "bound-gaussian", "bound-component")
DETERMINISTIC_METHODS = ("series-brute", "series-det", "bound-gaussian", "bound-component")


@dataclass(frozen=True)
class EntropyEstimate:
    """An entropy value in nats together with how it was obtained."""

    value: float
    stderr: float = 0.0
    method: str = "series-brute"
    order: int | None = None
    samples_per_center: int | None = None
    center_draws: int | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown method tag {self.method!r}")
        if self.stderr < 0 or math.isnan(self.stderr):
            raise InvalidArgument("stderr must be >= 0")
        if self.method in DETERMINISTIC_METHODS and self.stderr != 0.0:
            raise InvalidArgument(f"{self.method} estimates are deterministic; stderr must be 0")

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "stderr": self.stderr,
            "method": self.method,
            "order": self.order,
            "samples_per_center": self.samples_per_center,
            "center_draws": self.center_draws,
            "seed": self.seed,
        }
        out.update(self.extra)
        return out


def _as_points(x, n: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != n:
        raise InvalidArgument(f"points must have trailing dimension {n}, got shape {np.shape(x)}")
    return pts, single


def log_density(config: MixtureConfig, centers: CenterSet, x):
    """``ln f(x | w)`` for a point of shape ``(n,)`` or a batch ``(N, n)``.

    The sum over components is done in log space, so the result is finite for
    any finite ``x``.
    """
    centers.check(config)
    pts, single = _as_points(x, config.n)
    diff = pts[:, None, :] - centers.centers[None, :, :]
    expo = -0.5 * np.einsum("ijk,ijk->ij", diff, diff) / config.sigma2
    norm = -0.5 * config.n * math.log(2.0 * math.pi * config.sigma2) - math.log(config.q)
    out = norm + logsumexp(expo, axis=1)
    return float(out[0]) if single else out


def log_density_near(config: MixtureConfig, centers: CenterSet, x: np.ndarray) -> np.ndarray:
    """Batch ``ln f`` for points within a few sigma of the centers.

    Expands ``|x - w|^2`` through a matrix product after shifting to the
    center mean. About twice as fast as :func:`log_density`; the expansion
    loses relative accuracy for points far from every center, so it is meant
    for points sampled from the mixture itself.
    """
    w = centers.centers
    wbar = w.mean(axis=0)
    wc = w - wbar
    y = x - wbar
    expo = y @ wc.T
    expo -= 0.5 * np.sum(wc * wc, axis=1)
    expo -= 0.5 * np.sum(y * y, axis=1)[:, None]
    expo /= config.sigma2
    top = expo.max(axis=1)
    expo -= top[:, None]
    norm = -0.5 * config.n * math.log(2.0 * math.pi * config.sigma2) - math.log(config.q)
    return norm + top + np.log(np.exp(expo).sum(axis=1))


def sample_centers(config: MixtureConfig, seed: int) -> CenterSet:
    """Draw q i.i.d. centers from ``N(0, s^2 1_n)``; deterministic in ``seed``."""
    z = generator(seed, 0).standard_normal((config.q, config.n))
    return CenterSet(math.sqrt(config.s2) * z)


def chunk_counts(count: int) -> list[int]:
    """Sizes of the fixed chunks that ``count`` points are drawn in."""
    full, rest = divmod(count, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def mixture_chunk(config: MixtureConfig, centers: CenterSet, size: int, seed: int,
                  index: int) -> np.ndarray:
    """Chunk ``index`` of the points drawn by :func:`sample_mixture`.

    Each chunk has its own stream ``(seed, 1, index)``, so chunks can be
    produced independently and in any order.
    """
    rng = generator(seed, 1, index)
    idx = rng.integers(0, config.q, size=size)
    noise = rng.standard_normal((size, config.n))
    noise *= math.sqrt(config.sigma2)
    noise += centers.centers[idx]
    return noise


def iter_mixture_chunks(config: MixtureConfig, centers: CenterSet, count: int,
                        seed: int) -> Iterator[np.ndarray]:
    """Yield the points of :func:`sample_mixture` chunk by chunk."""
    centers.check(config)
    for i, m in enumerate(chunk_counts(count)):
        yield mixture_chunk(config, centers, m, seed, i)


def sample_mixture(config: MixtureConfig, centers: CenterSet, count: int,
                   seed: int) -> np.ndarray:
    """Draw ``count`` points from the mixture; returns an array of shape ``(count, n)``."""
    if count < 0:
        raise InvalidArgument("count must be >= 0")
    if count == 0:
        centers.check(config)
        return np.empty((0, config.n))
    return np.concatenate(list(iter_mixture_chunks(config, centers, count, seed)))


def reduce_dimension(config: MixtureConfig) -> tuple[MixtureConfig, float]:
    """Split off the ``n - q`` dimensions orthogonal to the span of the centers.

    Returns the config with ``n' = min(n, q)`` and the entropy offset
    ``(n - q) * h_sigma`` carried by the discarded dimensions. The identity
    ``h = offset + h_reduced`` holds for every fixed realization once the
    centers are rotated with :func:`reduce_centers`; it does not turn the
    ensemble average over i.i.d. n-dimensional centers into the ensemble
    average over i.i.d. q-dimensional centers.
    """
    if config.n <= config.q:
        return config, 0.0
    return config.replace(n=config.q), (config.n - config.q) * config.h_sigma


def reduce_centers(centers: CenterSet) -> CenterSet:
    """Rotate a realization with ``n > q`` into its q-dimensional coordinates.

    Uses a thin QR factorization ``W^T = Q R``; the columns of ``R`` are the
    center coordinates in the orthonormal basis ``Q``, so all pairwise
    distances are preserved.
    """
    q, n = centers.centers.shape
    if n <= q:
        return centers
    _, r = np.linalg.qr(centers.centers.T, mode="reduced")
    return CenterSet(r.T)
