"""Closed-form eigenstructure of the coupling matrices and the 2x2 mixing matrix.

The q x q matrix ``C = -(1/q) J + mu e_q e_q^T`` (``J`` all-ones) has a
(q-2)-fold zero eigenvalue spanned by Helmert-type vectors ``alpha_i`` and
two further eigenpairs ``(lambda_j, beta_j)`` with
``beta_j ∝ (1, ..., 1, x_j)``, ``x_j = 1 - q m_j``, ``m_j = lambda_j + 1``.
``M = I + C`` shares the eigenvectors with eigenvalues ``1`` and ``m_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from gme.errors import DegenerateParameter, InvalidArgument


def _check(q: int, mu: float, positive: bool = False) -> None:
    if int(q) != q or q < 2:
        raise InvalidArgument(f"q must be an integer >= 2, got {q!r}")
    if not math.isfinite(mu) or mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu!r}")
    if positive and mu == 0:
        raise DegenerateParameter("mu = 0 makes m2 = 0; the normalized basis is singular")


def c_matrix(q: int, mu: float) -> np.ndarray:
    """Explicit ``C^(q)``."""
    _check(q, mu)
    c = np.full((q, q), -1.0 / q)
    c[q - 1, q - 1] += mu
    return c


def m_matrix(q: int, mu: float) -> np.ndarray:
    """Explicit ``M^(q) = I + C^(q)``."""
    return np.eye(q) + c_matrix(q, mu)


class Eigenvalues(NamedTuple):
    lambda1: float
    lambda2: float
    m1: float
    m2: float
    x1: float
    x2: float


def eigenvalues(q: int, mu: float) -> Eigenvalues:
    """Nonzero eigenvalues of ``C^(q)`` and the derived ``m_j``, ``x_j``.

    ``lambda1`` takes the + branch of the quadratic formula, so
    ``lambda1 >= lambda2``. The small roots are recovered through Vieta's
    relations (``lambda1 lambda2 = mu (1/q - 1)``, ``m1 m2 = mu/q``) instead
    of by subtraction, which keeps full relative precision as mu -> 0.
    """
    _check(q, mu)
    disc = mu * mu + (2.0 - 4.0 / q) * mu + 1.0
    assert disc > 0, "discriminant is positive for mu >= 0, q >= 2"
    root = math.sqrt(disc)
    lambda2 = 0.5 * ((mu - 1.0) - root)
    lambda1 = mu * (1.0 - 1.0 / q) / -lambda2
    m1 = 0.5 * ((mu + 1.0) + root)
    m2 = (mu / q) / m1
    return Eigenvalues(lambda1, lambda2, m1, m2, 1.0 - q * m1, 1.0 - q * m2)


def alpha_vectors(q: int) -> np.ndarray:
    """The ``q-2`` zero-eigenvalue vectors as rows, shape ``(q-2, q)``.

    Row ``i-1`` is ``(1, ..., 1, -i, 0, ..., 0) / sqrt(i (i+1))`` with ``i``
    leading ones.
    """
    if int(q) != q or q < 2:
        raise InvalidArgument(f"q must be an integer >= 2, got {q!r}")
    a = np.zeros((q - 2, q))
    for i in range(1, q - 1):
        a[i - 1, :i] = 1.0
        a[i - 1, i] = -float(i)
        a[i - 1] /= math.sqrt(i * (i + 1))
    return a


@dataclass(frozen=True)
class SpectralDecomposition:
    q: int
    mu: float
    lambda1: float
    lambda2: float
    m1: float
    m2: float
    x1: float
    x2: float
    basis: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        """Alpha vectors as rows, shape ``(q-2, q)``."""
        return self.basis[:, : self.q - 2].T

    @property
    def norm1(self) -> float:
        """``|x_hat_1| = sqrt(q - 1 + x1^2)``."""
        return math.sqrt(self.q - 1 + self.x1 ** 2)

    @property
    def norm2(self) -> float:
        return math.sqrt(self.q - 1 + self.x2 ** 2)

    def diagonal(self) -> np.ndarray:
        """Diagonal of ``Lambda^T C Lambda``: ``(0, ..., 0, lambda1, lambda2)``."""
        return np.concatenate([np.zeros(self.q - 2), [self.lambda1, self.lambda2]])


def eigenbasis(q: int, mu: float) -> SpectralDecomposition:
    """Orthogonal eigenbasis ``(alpha_1, ..., alpha_{q-2}, beta_1, beta_2)`` as columns."""
    _check(q, mu, positive=True)
    ev = eigenvalues(q, mu)
    basis = np.empty((q, q))
    basis[:, : q - 2] = alpha_vectors(q).T
    for col, x in ((q - 2, ev.x1), (q - 1, ev.x2)):
        v = np.ones(q)
        v[-1] = x
        basis[:, col] = v / math.sqrt(q - 1 + x * x)
    basis.setflags(write=False)
    return SpectralDecomposition(q, mu, *ev, basis)


def identity_residuals(q: int, mu: float) -> dict[str, float]:
    """Residual ``lhs - rhs`` of each algebraic identity between m_j and x_j.

    The ``1/mu`` identity is multiplied by mu so every residual is O(1)-scaled.
    The fourth-from-last entry uses the form
    ``((x1^2-1)(x2^2-1) - q^2) / (N1 N2) = 1/(1-q)``.
    """
    _check(q, mu, positive=True)
    _, _, m1, m2, x1, x2 = eigenvalues(q, mu)
    n1 = q - 1 + x1 * x1
    n2 = q - 1 + x2 * x2
    return {
        "m1*m2": m1 * m2 - mu / q,
        "m1+m2": (m1 + m2) - (mu + 1.0),
        "x1+x2": (x1 + x2) - (-q * (mu + 1.0) + 2.0),
        "x1*x2": x1 * x2 - (1.0 - q),
        "mu/m": (mu / m1) / n1 + (mu / m2) / n2 - (1.0 + mu * q / (q - 1)),
        "(x^2-1)/m": ((x1 * x1 - 1) / m1) / n1 + ((x2 * x2 - 1) / m2) / n2 - q / (1.0 - q),
        "cross": ((x1 * x1 - 1) * (x2 * x2 - 1) - q * q) / (n1 * n2) - 1.0 / (1.0 - q),
        "x/m": mu * ((x1 / m1) / n1 + (x2 / m2) / n2) - 1.0,
    }


def identity_suite(q: int, mu: float) -> float:
    """Largest absolute residual over :func:`identity_residuals`."""
    return max(abs(r) for r in identity_residuals(q, mu).values())


@dataclass(frozen=True)
class MixingMatrix:
    w: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.w))


def mixing_matrix(q: int, mu: float) -> MixingMatrix:
    """2x2 matrix taking independent standard normals ``(r~, s~)`` to ``(r, s)``.

    ``r = sqrt(m2) u_q`` and ``s = sqrt(m1) u_{q-1}``; the matrix is symmetric,
    orthogonal and has determinant -1.
    """
    _check(q, mu, positive=True)
    _, _, m1, m2, x1, x2 = eigenvalues(q, mu)
    a = (1.0 / math.sqrt(m2)) / math.sqrt(q - 1 + x2 * x2)
    b = (1.0 / math.sqrt(m1)) / math.sqrt(q - 1 + x1 * x1)
    scale = 1.0 / math.sqrt(1.0 / mu + q / (q - 1))
    w = scale * np.array([[a, b], [b, -a]])
    w.setflags(write=False)
    return MixingMatrix(w)


# Quadratic forms after the change of variables z = Lambda u.
#
# Families of n-vectors are stored as arrays of shape (k, n, ...): axis 0
# indexes the vector, axis 1 the R^n coordinate, trailing axes are samples.


def _dot(a, b):
    return np.sum(a * b, axis=1)


def g_t_from_u(spec: SpectralDecomposition, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``G_l`` (l = 1..q) and ``T`` in terms of the eigen-coordinates ``u``.

    ``u`` has shape ``(q, n, ...)``. Returns ``G`` of shape ``(q, ...)`` and
    ``T`` of shape ``(...)``.
    """
    q = spec.q
    ua, us, ur = u[: q - 2], u[q - 2: q - 1], u[q - 1: q]
    w = np.tensordot(spec.alpha.T, ua, axes=(1, 0))  # w_l = sum_m alpha_{m,l} u_m
    g = _dot(w, w) + 2.0 / spec.norm1 * _dot(w, us) + 2.0 / spec.norm2 * _dot(w, ur)
    x1, x2 = spec.x1, spec.x2
    t = ((x2 * x2 - 1) / (2 * spec.norm2 ** 2) * _dot(ur, ur)
         + (x1 * x1 - 1) / (2 * spec.norm1 ** 2) * _dot(us, us)
         + (x1 * x2 - 1) / (spec.norm1 * spec.norm2) * _dot(ur, us))
    return g, t[0]


def g_t_from_tilde(q: int, mu: float, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``G_l`` (l = 1..q) and ``T`` in the decorrelated variables.

    ``a = (u_1, ..., u_{q-2}, r~, s~)`` has shape ``(q, n, ...)``.
    """
    _check(q, mu, positive=True)
    ua, r_t, s_t = a[: q - 2], a[q - 2: q - 1], a[q - 1: q]
    w = np.tensordot(alpha_vectors(q).T, ua, axes=(1, 0))
    k = q / (q - 1)
    g = _dot(w, w) + 2.0 * math.sqrt(1.0 / mu + k) * _dot(w, r_t)
    t = 0.5 / (1.0 + mu * k) * (-k * (2.0 + mu * k) * _dot(r_t, r_t) + k * _dot(s_t, s_t)
                                 + 2.0 / math.sqrt(mu) * math.sqrt(k) * _dot(r_t, s_t))
    return g, t[0]


def tilde_from_u(spec: SpectralDecomposition, u: np.ndarray) -> np.ndarray:
    """Map eigen-coordinates ``u`` to ``(u_1..u_{q-2}, r~, s~)``.

    ``r = sqrt(m2) u_q``, ``s = sqrt(m1) u_{q-1}`` and ``(r, s) = W (r~, s~)``;
    ``W`` is its own inverse.
    """
    q = spec.q
    w = mixing_matrix(q, spec.mu).w
    r = math.sqrt(spec.m2) * u[q - 1]
    s = math.sqrt(spec.m1) * u[q - 2]
    out = np.array(u, dtype=float, copy=True)
    out[q - 2] = w[0, 0] * r + w[0, 1] * s
    out[q - 1] = w[1, 0] * r + w[1, 1] * s
    return out
