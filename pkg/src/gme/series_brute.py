"""Brute-force small-mu series: Gaussian moment table, c1/c2 assembly and h to O(mu^2).

The moments are expectations over i.i.d. standard normal vectors
``u_1..u_{q-2}, r~, s~`` in R^n, with ``w_l = sum_m alpha_{m,l} u_m``:

====== =========================================
aa     r~.r~
bb     s~.s~
ab     r~.s~
A      sum_l w_l.w_l
B      sum_l (w_l.r~)^2
D      sum_l (w_l.w_l)(w_l.r~)
F      sum_l (w_l.w_l)^2
H      sum_l (w_l.w_l)(w_l.r~)^2
M      sum_l (w_l.r~)^3
J      sum_l (w_l.r~)^4
====== =========================================

with ``l`` running over ``1..q-1``. Names such as ``ab2aa`` denote products
(``ab^2 * aa``).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from gme._parallel import generator, ordered_map
from gme.errors import AssemblyMismatch, InvalidArgument, PreconditionError
from gme.mixture import EntropyEstimate, MixtureConfig
from gme.spectral import alpha_vectors


class MomentName(str, enum.Enum):
    aa = "aa"
    bb = "bb"
    aa2 = "aa2"
    bb2 = "bb2"
    aabb = "aabb"
    ab2 = "ab2"
    ab2aa = "ab2aa"
    ab2bb = "ab2bb"
    ab4 = "ab4"
    A = "A"
    B = "B"
    A2 = "A2"
    B2 = "B2"
    AB = "AB"
    aaA = "aaA"
    bbA = "bbA"
    aaB = "aaB"
    bbB = "bbB"
    ab2A = "ab2A"
    ab2B = "ab2B"
    F = "F"
    H = "H"
    J = "J"
    D = "D"
    M = "M"


# Moments that involve the w_l vectors; they vanish identically when q = 2.
_ALPHA_FAMILY = frozenset("A B A2 B2 AB aaA bbA aaB bbB ab2A ab2B F H J D M".split())


def _check_nq(n: int, q: int) -> None:
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    if int(q) != q or q < 2:
        raise InvalidArgument(f"q must be an integer >= 2, got {q!r}")


def alpha_quartic_sum(q: int) -> float:
    """``sum_l (sum_m alpha_{m,l}^2)^2`` over ``l = 1..q-1``, from the explicit vectors."""
    a = alpha_vectors(q)
    col = np.sum(a[:, : q - 1] ** 2, axis=0)
    return float(np.sum(col * col))


def moment_closed_form(name: MomentName | str, n: int, q: int) -> float:
    """Exact expectation of the named moment."""
    _check_nq(n, q)
    name = MomentName(name).value
    k = q - 2
    nn2 = n * (n + 2)
    table = {
        "aa": n, "bb": n, "aa2": nn2, "bb2": nn2, "aabb": n * n, "ab2": n,
        "ab2aa": nn2, "ab2bb": nn2, "ab4": 3 * nn2,
        "A": n * k, "B": n * k,
        "A2": n * n * k * k + 2 * n * k, "B2": q * k * nn2, "AB": n * n * k * k + 2 * n * k,
        "aaA": n * n * k, "bbA": n * n * k, "aaB": k * nn2, "bbB": k * n * n,
        "ab2A": k * n * n, "ab2B": k * nn2,
        "D": 0, "M": 0,
    }
    if name in table:
        return float(table[name])
    s_alpha = alpha_quartic_sum(q)
    return {"F": (n * n + 2 * n) * s_alpha, "H": nn2 * s_alpha, "J": 3 * nn2 * s_alpha}[name]


def _moment_samples(n: int, q: int, count: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Evaluate every moment on ``count`` independent draws."""
    u = rng.standard_normal((q - 2, n, count))
    r = rng.standard_normal((n, count))
    s = rng.standard_normal((n, count))
    w = np.tensordot(alpha_vectors(q)[:, : q - 1].T, u, axes=(1, 0))  # (q-1, n, count)
    aa = np.sum(r * r, axis=0)
    bb = np.sum(s * s, axis=0)
    ab = np.sum(r * s, axis=0)
    ww = np.sum(w * w, axis=1)
    wr = np.sum(w * r[None], axis=1)
    A = ww.sum(axis=0)
    B = (wr ** 2).sum(axis=0)
    ab2 = ab * ab
    return {
        "aa": aa, "bb": bb, "aa2": aa * aa, "bb2": bb * bb, "aabb": aa * bb, "ab2": ab2,
        "ab2aa": ab2 * aa, "ab2bb": ab2 * bb, "ab4": ab2 * ab2,
        "A": A, "B": B, "A2": A * A, "B2": B * B, "AB": A * B,
        "aaA": aa * A, "bbA": bb * A, "aaB": aa * B, "bbB": bb * B,
        "ab2A": ab2 * A, "ab2B": ab2 * B,
        "D": (ww * wr).sum(axis=0), "F": (ww * ww).sum(axis=0),
        "H": (ww * wr ** 2).sum(axis=0),
        # Plain products: the vectorized power is not exactly odd, and for q = 3
        # (w_2 = -w_1) M must cancel to exactly zero rather than to rounding.
        "M": (wr * wr * wr).sum(axis=0),
        "J": (wr ** 4).sum(axis=0),
    }


_MC_BLOCK = 1 << 15


def moment_mc_table(n: int, q: int, samples: int, seed: int,
                    threads: int | None = None) -> dict[MomentName, tuple[float, float]]:
    """Monte Carlo ``(mean, stderr)`` for every moment from one shared set of draws.

    Draws are split into fixed blocks with independent streams, so the result
    does not depend on ``threads``.
    """
    _check_nq(n, q)
    if n > q:
        raise PreconditionError(f"moment_mc requires n <= q, got n={n}, q={q}")
    if samples < 1000:
        raise InvalidArgument("samples must be >= 1000")
    full, rest = divmod(samples, _MC_BLOCK)
    sizes = [_MC_BLOCK] * full + ([rest] if rest else [])

    def block(i):
        vals = _moment_samples(n, q, sizes[i], generator(seed, 2, i))
        return {k: (float(v.sum()), float(np.sum(v * v))) for k, v in vals.items()}

    parts = ordered_map(block, range(len(sizes)), threads)
    out = {}
    for name in MomentName:
        if q == 2 and name.value in _ALPHA_FAMILY:
            # empty sums over the alpha vectors
            out[name] = (0.0, 0.0)
            continue
        s1 = math.fsum(p[name.value][0] for p in parts)
        s2 = math.fsum(p[name.value][1] for p in parts)
        mean = s1 / samples
        var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
        out[name] = (mean, math.sqrt(var / samples))
    return out


def moment_mc(name: MomentName | str, n: int, q: int, samples: int, seed: int,
              threads: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate ``(mean, stderr)`` of a single moment."""
    name = MomentName(name)
    return moment_mc_table(n, q, samples, seed, threads)[name]


# c1 and c2 as polynomials in the moments. Expectation is linear, so the
# expected coefficients follow by substituting expected moments.


def c1_polynomial(m, q: int) -> float:
    """``c1`` given moment values ``m[name]``."""
    lhs = (-(q - 1) * m["A"] + (q - 1) * m["B"] + 2 * q * m["aa"] - q * m["bb"]
           + (q - 1) * m["ab2"])
    return lhs / (2 * q * (q - 1))


def c2_polynomial(m, q: int) -> float:
    """``c2`` given moment values ``m[name]``."""
    q2, q3 = q * q, q ** 3
    lhs = (
        -3 * (q - 1) ** 2 * m["A2"] - 3 * m["B2"] + 12 * q * m["aaB"] + 6 * q * m["B2"]
        - 6 * q * m["bbB"] + 3 * q * m["F"] - 6 * q * m["H"] + q * m["J"] - 12 * q2 * m["aa2"]
        - 12 * q2 * m["B"] - 12 * q2 * m["aaB"] - 3 * q2 * m["B2"] + 12 * q2 * m["aabb"]
        + 6 * q2 * m["bbB"] - 3 * q2 * m["bb2"] - 6 * q2 * m["F"] + 12 * q2 * m["H"]
        - 2 * q2 * m["J"] - 12 * q3 * m["aa"]
        + 12 * q3 * m["aa2"] + 12 * q3 * m["B"] + 12 * q3 * m["bb"] - 12 * q3 * m["aabb"]
        + 3 * q3 * m["bb2"] + 3 * q3 * m["F"] - 6 * q3 * m["H"] + q3 * m["J"]
        + 6 * (q - 1) * ((q - 2) * m["ab2A"] + (q - 1) * m["AB"] + 2 * q * m["aaA"]
                         - q * m["bbA"])
        + (q3 - 7 * q2 + 12 * q - 6) * m["ab4"]
        - 6 * (q - 1) * ((q - 2) * m["ab2B"] - 2 * q * (q - 2) * m["ab2aa"]
                         + q * (q - 2) * m["ab2bb"] + 4 * q2 * m["ab2"])
    )
    return lhs / (24 * q2 * (q - 1) ** 2)


def c1_expected(n: int, q: int) -> float:
    return n * (2 * q - 1) / (2 * q * (q - 1))


def c2_expected(n: int, q: int) -> float:
    return n * (n + q) * (q - 1) / (4 * q * q)


@dataclass(frozen=True)
class SeriesCoefficients:
    """Expected series coefficients ``E[c1]`` and ``E[c2]`` for ``(n, q)``."""

    c1_expect: float
    c2_expect: float
    n: int
    q: int


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def series_coefficients(n: int, q: int, rtol: float = 1e-9) -> SeriesCoefficients:
    """Assemble ``E[c1]``, ``E[c2]`` term by term and check them against the closed forms.

    Raises
    ------
    AssemblyMismatch
        If either assembly is off by more than ``rtol`` relative.
    """
    _check_nq(n, q)
    moments = {m.value: moment_closed_form(m, n, q) for m in MomentName}
    c1 = c1_polynomial(moments, q)
    c2 = c2_polynomial(moments, q)
    for label, got, want in (("c1", c1, c1_expected(n, q)), ("c2", c2, c2_expected(n, q))):
        if _rel_err(got, want) > rtol:
            raise AssemblyMismatch(
                f"E[{label}] assembled as {got!r} but closed form gives {want!r} (n={n}, q={q})")
    return SeriesCoefficients(c1, c2, int(n), int(q))


def _warn_if_unreduced(config: MixtureConfig) -> None:
    if config.n > config.q:
        warnings.warn(
            f"n={config.n} > q={config.q}: evaluating the series at full n; "
            "see reduce_dimension for the per-realization split",
            RuntimeWarning, stacklevel=3,
        )


def series_polynomial(config: MixtureConfig, order: int) -> float:
    """``n h_sigma + (n/2)(1-1/q) mu - n(n+q)(q-1)/(4q^2) mu^2``, truncated at ``order``."""
    n, q, mu = config.n, config.q, config.mu
    value = n * config.h_sigma
    if order >= 1:
        value += 0.5 * n * (1.0 - 1.0 / q) * mu
    if order >= 2:
        value -= c2_expected(n, q) * mu * mu
    return value


def series_from_s(config: MixtureConfig, order: int) -> float:
    """Same truncation written as the Gaussian term plus ``S = -E[c1] mu - E[c2] mu^2``."""
    n, q, mu = config.n, config.q, config.mu
    coeffs = series_coefficients(n, q)
    value = n * config.h_sigma
    if order >= 1:
        value += 0.5 * n * q / (q - 1) * mu - coeffs.c1_expect * mu
    if order >= 2:
        value -= coeffs.c2_expect * mu * mu
    return value


def entropy_series(config: MixtureConfig, order: int = 2) -> EntropyEstimate:
    """Average mixture entropy from the small-mu series truncated at ``order`` (0, 1 or 2).

    Examples
    --------
    >>> from gme.mixture import MixtureConfig
    >>> round(entropy_series(MixtureConfig(3, 3, 1.0, 0.1), order=1).value, 7)
    4.3568156
    """
    if order not in (0, 1, 2):
        raise InvalidArgument(f"order must be 0, 1 or 2, got {order!r}")
    _warn_if_unreduced(config)
    config.check_series_regime()
    direct = series_polynomial(config, order)
    via_s = series_from_s(config, order)
    if abs(direct - via_s) > 1e-12 * max(1.0, abs(direct)):
        raise AssemblyMismatch(f"series assemblies disagree: {direct!r} vs {via_s!r}")
    return EntropyEstimate(direct, 0.0, "series-brute", order=order)
