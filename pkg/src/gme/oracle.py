"""Monte Carlo ground truth for mixture entropies, plus the two closed-form upper bounds.

Two estimators of the ensemble average are available:

``plugin``
    ``-mean ln f(X)`` over points drawn from each sampled mixture, averaged
    over center draws.
``gaussian-cv``
    Writes ``h(f) = h(f_gauss) - D(f || f_gauss)`` with ``f_gauss`` the
    moment-matched Gaussian. ``D`` is estimated per center from the same
    points; the ensemble mean of ``h(f_gauss)`` is estimated separately from
    many cheap center draws with ``tr Sigma`` as a control variate. Both
    parts are unbiased. The between-center spread of ``h(f_gauss)`` drops
    out, which is what dominates the plug-in error at small mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from gme._parallel import derive_seeds, generator, ordered_map
from gme.errors import InvalidArgument
from gme.mixture import (
    CenterSet,
    EntropyEstimate,
    MixtureConfig,
    chunk_counts,
    log_density_near,
    mixture_chunk,
    reduce_centers,
    reduce_dimension,
    sample_centers,
)

ESTIMATORS = ("plugin", "gaussian-cv")
_LN_2PI_E = math.log(2.0 * math.pi * math.e)
_REF_BLOCK = 1 << 16


@dataclass(frozen=True)
class McSettings:
    """Sample sizes, seed and estimator for the Monte Carlo oracle.

    ``budget`` caps ``samples_per_center * center_draws``.
    ``reference_draws`` is the number of auxiliary center sets used by the
    ``gaussian-cv`` estimator for the mean Gaussian bound.
    """

    samples_per_center: int = 100_000
    center_draws: int = 100
    seed: int = 0
    estimator: str = "plugin"
    reference_draws: int = 1_000_000
    budget: int = 10 ** 10
    threads: int | None = None

    def __post_init__(self):
        if int(self.samples_per_center) != self.samples_per_center or self.samples_per_center < 1000:
            raise InvalidArgument("samples_per_center must be an integer >= 1000")
        if int(self.center_draws) != self.center_draws or self.center_draws < 1:
            raise InvalidArgument("center_draws must be a positive integer")
        if self.estimator not in ESTIMATORS:
            raise InvalidArgument(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.reference_draws < 2:
            raise InvalidArgument("reference_draws must be >= 2")
        if self.samples_per_center * self.center_draws > self.budget:
            raise InvalidArgument(
                f"{self.samples_per_center} x {self.center_draws} points exceed the budget "
                f"of {self.budget}")


def _center_moments(centers: np.ndarray, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    wbar = centers.mean(axis=0)
    wc = centers - wbar
    cov = sigma2 * np.eye(centers.shape[1]) + wc.T @ wc / centers.shape[0]
    return wbar, cov


def gaussian_bound(config: MixtureConfig, centers: CenterSet) -> float:
    """Entropy of the Gaussian with the mixture's mean and covariance (an upper bound)."""
    centers.check(config)
    _, cov = _center_moments(centers.centers, config.sigma2)
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0, "mixture covariance is positive definite for sigma2 > 0"
    return 0.5 * config.n * _LN_2PI_E + 0.5 * logdet


def component_bound(config: MixtureConfig) -> float:
    """``n h_sigma + ln q``: entropy of the components plus that of the label."""
    return config.n * config.h_sigma + math.log(config.q)


@dataclass(frozen=True)
class CenterResult:
    """Per-realization MC output.

    ``entropy`` is the plug-in estimate for this realization (including any
    dimensional offset) and ``kl`` the estimate of ``D(f || f_gauss)``, if
    requested.
    """

    entropy: float
    entropy_stderr: float
    gauss_bound: float
    kl: float | None = None
    kl_stderr: float | None = None


def _mean_se(s1: float, s2: float, count: int) -> tuple[float, float]:
    mean = s1 / count
    var = max(s2 / count - mean * mean, 0.0) * count / max(count - 1, 1)
    return mean, math.sqrt(var / count)


def _center_stats(config: MixtureConfig, centers: CenterSet, samples: int, seed: int,
                  want_kl: bool, threads: int | None = 1, reduce: bool = True) -> CenterResult:
    centers.check(config)
    bound = gaussian_bound(config, centers)
    if reduce:
        work_cfg, offset = reduce_dimension(config)
        work = reduce_centers(centers)
    else:
        work_cfg, offset, work = config, 0.0, centers
    if want_kl:
        wbar, cov = _center_moments(work.centers, config.sigma2)
        chol = np.linalg.cholesky(cov)
        whiten = scipy.linalg.solve_triangular(chol, np.eye(work_cfg.n), lower=True).T
        g_norm = -0.5 * work_cfg.n * math.log(2.0 * math.pi) - float(np.sum(np.log(np.diag(chol))))
    sizes = chunk_counts(samples)

    def chunk(i):
        x = mixture_chunk(work_cfg, work, sizes[i], seed, i)
        neg = -log_density_near(work_cfg, work, x)
        out = [float(neg.sum()), float(neg @ neg)]
        if want_kl:
            z = (x - wbar) @ whiten
            d = -neg - (g_norm - 0.5 * np.sum(z * z, axis=1))  # ln f - ln f_gauss
            out += [float(d.sum()), float(d @ d)]
        return out

    parts = ordered_map(chunk, range(len(sizes)), threads)
    sums = [math.fsum(p[k] for p in parts) for k in range(len(parts[0]))]
    h, h_se = _mean_se(sums[0], sums[1], samples)
    if not want_kl:
        return CenterResult(h + offset, h_se, bound)
    kl, kl_se = _mean_se(sums[2], sums[3], samples)
    return CenterResult(h + offset, h_se, bound, kl, kl_se)


def entropy_given_centers(config: MixtureConfig, centers: CenterSet,
                          settings: McSettings, reduce: bool = True) -> EntropyEstimate:
    """MC entropy of one fixed mixture.

    With the ``gaussian-cv`` estimator the value is ``gaussian_bound - D``
    with ``D`` estimated from the same points. When ``n > q`` the centers are
    rotated into q dimensions first unless ``reduce`` is false, in which case
    points are sampled in all n dimensions.
    """
    res = _center_stats(config, centers, settings.samples_per_center, settings.seed,
                        settings.estimator == "gaussian-cv", settings.threads, reduce)
    if settings.estimator == "gaussian-cv":
        value, se = res.gauss_bound - res.kl, res.kl_stderr
    else:
        value, se = res.entropy, res.entropy_stderr
    return EntropyEstimate(value, se, "monte-carlo", samples_per_center=settings.samples_per_center,
                           center_draws=1, seed=settings.seed,
                           extra={"estimator": settings.estimator, "gaussian_bound": res.gauss_bound})


@dataclass(frozen=True)
class ReferenceMean:
    """Control-variate estimate of the ensemble mean of the Gaussian bound."""

    value: float
    stderr: float
    draws: int
    beta: float


def expected_gaussian_bound(config: MixtureConfig, draws: int, seed: int,
                            threads: int | None = None) -> ReferenceMean:
    """Estimate ``E_w[gaussian_bound]`` from ``draws`` independent center sets.

    The control is ``c = tr(Sigma - sigma^2 I) / (2 sigma^2)``, whose mean is
    ``n mu (q-1) / (2q)`` exactly.
    """
    n, q = config.n, config.q
    if config.mu == 0:
        return ReferenceMean(n * config.h_sigma, 0.0, draws, 0.0)
    full, rest = divmod(draws, _REF_BLOCK)
    sizes = [_REF_BLOCK] * full + ([rest] if rest else [])
    scale = math.sqrt(config.s2)

    def block(i):
        w = generator(seed, 4, i).standard_normal((sizes[i], q, n)) * scale
        w -= w.mean(axis=1, keepdims=True)
        cov = np.einsum("kqi,kqj->kij", w, w) / q
        c = 0.5 * np.einsum("kii->k", cov) / config.sigma2
        cov += config.sigma2 * np.eye(n)
        g = 0.5 * n * _LN_2PI_E + 0.5 * np.linalg.slogdet(cov)[1]
        return [float(g.sum()), float(c.sum()), float(g @ g), float(c @ c), float(g @ c)]

    parts = ordered_map(block, range(len(sizes)), threads)
    sg, sc, sgg, scc, sgc = (math.fsum(p[k] for p in parts) for k in range(5))
    k = draws
    gm, cm = sg / k, sc / k
    vg = (sgg - k * gm * gm) / (k - 1)
    vc = (scc - k * cm * cm) / (k - 1)
    cgc = (sgc - k * gm * cm) / (k - 1)
    beta = cgc / vc if vc > 0 else 0.0
    exact_c = 0.5 * n * config.mu * (q - 1) / q
    value = gm - beta * (cm - exact_c)
    resid = max(vg - beta * cgc, 0.0)
    return ReferenceMean(value, math.sqrt(resid / k), k, beta)


@dataclass(frozen=True)
class McRun:
    """Everything an ensemble MC run produced."""

    config: MixtureConfig
    settings: McSettings
    per_center: tuple[CenterResult, ...]
    value: float
    stderr: float
    gauss_bound_mean: float
    reference: ReferenceMean | None = None
    extra: dict = field(default_factory=dict)

    def estimate(self) -> EntropyEstimate:
        extra = {"estimator": self.settings.estimator,
                 "gaussian_bound_mean": self.gauss_bound_mean}
        extra.update(self.extra)
        return EntropyEstimate(self.value, self.stderr, "monte-carlo",
                               samples_per_center=self.settings.samples_per_center,
                               center_draws=self.settings.center_draws,
                               seed=self.settings.seed, extra=extra)


def center_seeds(settings: McSettings) -> list[int]:
    """Seed of each center draw; the first M are the same for any larger M."""
    return derive_seeds(settings.seed, settings.center_draws, 3)


def run_average(config: MixtureConfig, settings: McSettings) -> McRun:
    """Ensemble MC run over ``settings.center_draws`` independent realizations.

    Realizations with ``n > q`` are rotated into q dimensions and the
    ``(n - q) h_sigma`` offset added, which is exact for each realization.
    """
    cv = settings.estimator == "gaussian-cv"
    seeds = center_seeds(settings)

    def one(seed):
        centers = sample_centers(config, seed)
        return _center_stats(config, centers, settings.samples_per_center, seed, cv, 1)

    per = tuple(ordered_map(one, seeds, settings.threads))
    m = len(per)
    bounds = np.array([r.gauss_bound for r in per])
    bound_mean = math.fsum(bounds) / m
    if not cv:
        h = np.array([r.entropy for r in per])
        value = math.fsum(h) / m
        if m > 1:
            stderr = float(np.std(h, ddof=1)) / math.sqrt(m)
        else:
            stderr = per[0].entropy_stderr
        return McRun(config, settings, per, value, stderr, bound_mean)
    ref = expected_gaussian_bound(config, settings.reference_draws, settings.seed, settings.threads)
    d = np.array([r.kl for r in per])
    d_mean = math.fsum(d) / m
    d_var = float(np.var(d, ddof=1)) / m if m > 1 else per[0].kl_stderr ** 2
    value = ref.value - d_mean
    stderr = math.sqrt(d_var + ref.stderr ** 2)
    return McRun(config, settings, per, value, stderr, bound_mean, ref,
                 extra={"kl_mean": d_mean, "reference_stderr": ref.stderr})


def average_entropy(config: MixtureConfig, settings: McSettings) -> EntropyEstimate:
    """MC estimate of the ensemble-average entropy with its standard error."""
    return run_average(config, settings).estimate()


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    exponent_stderr: float


def fit_power_law(mu, residual, stderr) -> PowerLawFit:
    """Weighted least-squares fit of ``|residual| = C mu^p`` in log-log space.

    Each point is weighted by ``(|residual| / stderr)^2``, the inverse
    variance of ``ln |residual|`` to first order.
    """
    mu = np.asarray(mu, dtype=float)
    r = np.abs(np.asarray(residual, dtype=float))
    se = np.asarray(stderr, dtype=float)
    if mu.size < 2 or not (mu.shape == r.shape == se.shape):
        raise InvalidArgument("need at least two points with matching shapes")
    if np.any(r == 0) or np.any(mu <= 0) or np.any(se <= 0):
        raise InvalidArgument("residuals, mu and stderr must be nonzero")
    weight = (r / se) ** 2
    x = np.log(mu)
    y = np.log(r)
    a = np.column_stack([np.ones_like(x), x])
    aw = a * weight[:, None]
    normal = a.T @ aw
    coef = np.linalg.solve(normal, aw.T @ y)
    cov = np.linalg.inv(normal)
    return PowerLawFit(float(coef[1]), float(math.exp(coef[0])), float(math.sqrt(cov[1, 1])))
