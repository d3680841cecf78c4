"""Determinant route to the O(mu) entropy: the P and Q_l matrices, their determinants, Z1 and Z2.

In the standardized variables ``a = (u_1, ..., u_{q-2}, r~, s~)`` the
exponents become quadratic forms, ``mu G_l = a^T Q_l a`` and
``2 mu T = a^T P a``. Every Gaussian expectation of an exponential of these
forms reduces to ``det(I + sum)^(-n/2)``, so ``E Z`` and ``E Z^2`` are finite
sums of such determinants.

Going beyond O(mu) would need ``E Z^k`` for k up to 4. Those expand the same
way into determinants ``det(I + r P + sum_i t_i Q_{l_i})``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
import scipy.linalg

from gme.errors import InvalidArgument, ValidityRegionError
from gme.mixture import EntropyEstimate, MixtureConfig
from gme.spectral import alpha_vectors

# Determinants at or below this are refused: det^(-n/2) blows up and the
# small-mu premise no longer holds.
VALIDITY_FLOOR = 0.5


def _check_q_mu(q: int, mu: float, min_q: int = 2) -> None:
    if int(q) != q or q < min_q:
        raise InvalidArgument(f"q must be an integer >= {min_q}, got {q!r}")
    if not math.isfinite(mu) or mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu!r}")


@dataclass(frozen=True)
class QuadraticFormMatrix:
    """A symmetric q x q matrix ``P`` or ``Q_ell`` acting on the standardized variables."""

    kind: str
    q: int
    mu: float
    entries: np.ndarray
    ell: int | None = None

    def __post_init__(self):
        if self.kind not in ("P", "Q"):
            raise InvalidArgument(f"kind must be 'P' or 'Q', got {self.kind!r}")
        e = np.array(self.entries, dtype=float)
        if e.shape != (self.q, self.q):
            raise InvalidArgument(f"entries must be {self.q}x{self.q}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def build_P(q: int, mu: float) -> QuadraticFormMatrix:
    """The matrix with ``2 mu T = a^T P a``; nonzero only in the trailing 2x2 block."""
    _check_q_mu(q, mu)
    k = q / (q - 1)
    pref = 1.0 / (1.0 + mu * k)
    p = np.zeros((q, q))
    p[q - 1, q - 1] = pref * mu * k
    p[q - 2, q - 2] = -pref * mu * k * (2.0 + mu * k)
    p[q - 1, q - 2] = p[q - 2, q - 1] = pref * math.sqrt(mu) * math.sqrt(k)
    return QuadraticFormMatrix("P", q, mu, p)


def omega(q: int, ell: int) -> np.ndarray:
    """Column ``ell`` of the alpha vectors padded with zeros to length q."""
    w = np.zeros(q)
    w[: q - 2] = alpha_vectors(q)[:, ell - 1]
    return w


def build_Q(q: int, mu: float, ell: int) -> QuadraticFormMatrix:
    """The matrix with ``mu G_ell = a^T Q_ell a``, for ``ell`` in ``1..q-1``.

    For q = 2 there are no alpha vectors and the result is the zero matrix.
    """
    _check_q_mu(q, mu)
    if int(ell) != ell or not 1 <= ell <= q - 1:
        raise InvalidArgument(f"ell must be in 1..{q - 1}, got {ell!r}")
    w = omega(q, int(ell))
    e = np.zeros(q)
    e[q - 2] = 1.0
    coupling = math.sqrt(mu) * math.sqrt(1.0 + mu * q / (q - 1))
    m = mu * np.outer(w, w) + coupling * (np.outer(w, e) + np.outer(e, w))
    return QuadraticFormMatrix("Q", q, mu, m, ell=int(ell))


def det_closed_form(which: str, q: int, mu: float, t: int = 1,
                    ell: int | None = None, ell2: int | None = None) -> float:
    """Closed-form determinants.

    ``which`` selects the form:

    * ``"IP"``: ``det(I + t P)``
    * ``"IQ"``: ``det(I + t Q_ell)``
    * ``"IPQ"``: ``det(I + P + Q_ell)``
    * ``"IQQ"``: ``det(I + Q_ell + Q_ell2)`` with ``ell != ell2``

    None of them depend on the particular ``ell``; the indices are only
    checked for validity.
    """
    _check_q_mu(q, mu)
    if int(t) != t or t < 1:
        raise InvalidArgument(f"t must be a positive integer, got {t!r}")
    for lab in (ell, ell2):
        if lab is not None and not 1 <= lab <= q - 1:
            raise InvalidArgument(f"ell must be in 1..{q - 1}, got {lab!r}")
    r = q / (q - 1)
    d = (q - 2) / (q - 1)
    if which == "IP":
        return 1.0 - mu * t * (t + 1) * r
    if which == "IQ":
        return 1.0 - mu * t * (t - 1) * d - t * t * mu * mu * q * (q - 2) / (q - 1) ** 2
    if which == "IPQ":
        return 1.0 - 2.0 * mu * r - 4.0 * mu * mu * q * (q - 2) / (q - 1) ** 2
    if which == "IQQ":
        if q < 3:
            raise InvalidArgument("IQQ needs two distinct ell, i.e. q >= 3")
        if ell is not None and ell == ell2:
            raise InvalidArgument("IQQ requires ell != ell2; use IQ with t=2")
        c = (q - 1) ** 2
        return (1.0 + 2.0 * mu / (q - 1) - mu * mu * (3 * q - 1) * (q - 3) / c
                - 2.0 * mu ** 3 * q * (q - 3) / c)
    raise InvalidArgument(f"unknown determinant form {which!r}")


Term = Union[QuadraticFormMatrix, np.ndarray, tuple]


def _as_matrix(term: Term) -> np.ndarray:
    if isinstance(term, tuple):
        coef, mat = term
        return float(coef) * np.asarray(mat, dtype=float)
    return np.asarray(term, dtype=float)


def det_numeric(*terms: Term, q: int | None = None, check_pd: bool = True) -> float:
    """``det(I + sum(terms))`` by LU with partial pivoting.

    A term is a matrix or a ``(coefficient, matrix)`` pair. With no terms the
    dimension must be given through ``q`` and the result is 1. Pass
    ``check_pd=False`` to get the determinant of an indefinite sum as well.

    Raises
    ------
    ValidityRegionError
        If ``check_pd`` and ``I + sum(terms)`` is not positive definite.
    """
    mats = [_as_matrix(t) for t in terms]
    if not mats:
        if q is None:
            raise InvalidArgument("give q when no matrices are passed")
        return 1.0
    a = np.eye(mats[0].shape[0]) + sum(mats)
    if check_pd:
        try:
            scipy.linalg.cholesky(a, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValidityRegionError("I + sum is not positive definite; mu is too large") from exc
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    sign = -1.0 if np.count_nonzero(piv != np.arange(len(piv))) % 2 else 1.0
    return sign * float(np.prod(np.diag(lu)))


@dataclass(frozen=True)
class _Dets:
    """The distinct determinant values entering Z1 and Z2."""

    ip: float
    i2p: float
    iq: float
    i2q: float
    ipq: float
    iqq: float | None  # None when q = 2 (no ell != ell2 pairs)

    def check(self) -> None:
        vals = [v for v in (self.ip, self.i2p, self.iq, self.i2q, self.ipq, self.iqq)
                if v is not None]
        low = min(vals)
        if low <= VALIDITY_FLOOR:
            raise ValidityRegionError(
                f"a determinant equals {low:.4g} <= {VALIDITY_FLOOR}; mu is outside the "
                "region where the O(mu) determinant expansion is usable")


def _dets_closed(q: int, mu: float) -> _Dets:
    return _Dets(
        ip=det_closed_form("IP", q, mu, 1),
        i2p=det_closed_form("IP", q, mu, 2),
        iq=det_closed_form("IQ", q, mu, 1),
        i2q=det_closed_form("IQ", q, mu, 2),
        ipq=det_closed_form("IPQ", q, mu),
        iqq=det_closed_form("IQQ", q, mu) if q >= 3 else None,
    )


def _sum_over_ell(q: int, mu: float, n: int, numeric: bool) -> tuple[float, float, float, float, float, float]:
    """Sums of ``det^(-n/2)`` over the ell indices for each family of terms."""
    half = -0.5 * n
    if not numeric:
        d = _dets_closed(q, mu)
        d.check()
        L = q - 1
        pairs = L * (L - 1)
        return (d.ip ** half, d.i2p ** half, L * d.iq ** half, L * d.i2q ** half,
                L * d.ipq ** half, pairs * d.iqq ** half if pairs else 0.0)
    p = build_P(q, mu)
    qs = [build_Q(q, mu, ell) for ell in range(1, q)]
    vals = []

    def det(*terms):
        v = det_numeric(*terms)
        vals.append(v)
        return v

    ip = det(p) ** half
    i2p = det((2, p)) ** half
    iq = sum(det(m) ** half for m in qs)
    i2q = sum(det((2, m)) ** half for m in qs)
    ipq = sum(det(p, m) ** half for m in qs)
    iqq = sum(det(a, b) ** half for i, a in enumerate(qs) for j, b in enumerate(qs) if i != j)
    if min(vals) <= VALIDITY_FLOOR:
        raise ValidityRegionError(
            f"a determinant equals {min(vals):.4g} <= {VALIDITY_FLOOR}; mu is outside the "
            "usable region")
    return ip, i2p, iq, i2q, ipq, iqq


def _check_args(n: int, q: int, mu: float, method: str) -> bool:
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    _check_q_mu(q, mu)
    if method not in ("closed", "numeric"):
        raise InvalidArgument(f"method must be 'closed' or 'numeric', got {method!r}")
    if n > q:
        warnings.warn(f"n={n} > q={q}: evaluating at full n", RuntimeWarning, stacklevel=3)
    return method == "numeric"


def z1(n: int, q: int, mu: float, method: str = "closed") -> float:
    """``E Z``: ``1 - (1/q) sum_ell det(I+Q_ell)^(-n/2) - (1/q) det(I+P)^(-n/2)``."""
    numeric = _check_args(n, q, mu, method)
    ip, _, iq, _, _, _ = _sum_over_ell(q, mu, n, numeric)
    return 1.0 - (iq + ip) / q


def z2(n: int, q: int, mu: float, method: str = "closed") -> float:
    """``E Z^2 / 2`` expanded into determinants.

    The ``ell = ell'`` diagonal of the double sum is ``det(I + 2 Q_ell)``.
    """
    numeric = _check_args(n, q, mu, method)
    ip, i2p, iq, i2q, ipq, iqq = _sum_over_ell(q, mu, n, numeric)
    qq = q * q
    return 0.5 - (iq + ip) / q + ipq / qq + 0.5 * (i2q + iqq) / qq + 0.5 * i2p / qq


def entropy_det(config: MixtureConfig, method: str = "closed") -> EntropyEstimate:
    """Average mixture entropy accurate through O(mu), from ``Z1 + Z2``.

    Raises
    ------
    ValidityRegionError
        When any determinant involved is at or below 0.5.
    """
    n, q, mu = config.n, config.q, config.mu
    base = n * config.h_sigma
    if mu == 0:
        return EntropyEstimate(base, 0.0, "series-det", order=1)
    config.check_series_regime()
    value = base + 0.5 * n * q / (q - 1) * mu + z1(n, q, mu, method) + z2(n, q, mu, method)
    return EntropyEstimate(value, 0.0, "series-det", order=1)


def leading_z1(n: int, q: int) -> float:
    """Coefficient of mu in Z1."""
    return -n / (q - 1)


def leading_z2(n: int, q: int) -> float:
    """Coefficient of mu in Z2."""
    return 0.5 * n / (q * (q - 1))


def all_det_pairs(q: int) -> Iterable[tuple[int, int]]:
    return ((a, b) for a in range(1, q) for b in range(1, q) if a != b)
