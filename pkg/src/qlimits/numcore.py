"""Sphere quadrature, the exponential integral and small symmetric matrices.

Everything here is a pure function of its inputs. The matrix and quadrature
containers are frozen and their arrays are marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError, SingularMatrixError

EULER_GAMMA = 0.57721566490153286061
MAX_DIM = 6

DEFAULT_N_THETA = 64
DEFAULT_N_PHI = 128


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes and solid-angle weights on the unit sphere.

    ``theta`` is the polar angle in [0, pi] and ``phi`` the azimuth in
    [0, 2 pi). The weights integrate the constant 1 to 4 pi.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    shape: tuple = field(default=(0, 0))

    def __post_init__(self):
        theta = _frozen(self.theta)
        phi = _frozen(self.phi)
        weights = _frozen(self.weights)
        if not (theta.shape == phi.shape == weights.shape) or theta.ndim != 1:
            raise ValueError("theta, phi and weights must be 1-D arrays of equal length")
        if theta.size < 8:
            raise ValueError(f"need at least 8 nodes, got {theta.size}")
        if np.any(weights <= 0.0):
            raise ValueError("quadrature weights must be strictly positive")
        total = math.fsum(weights)
        if abs(total - 4.0 * math.pi) > 1e-12 * 4.0 * math.pi:
            raise ValueError(f"weights sum to {total!r}, expected 4*pi")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.size

    @property
    def n_theta(self) -> int:
        return self.shape[0]

    @property
    def n_phi(self) -> int:
        return self.shape[1]

    @cached_property
    def unit_vectors(self) -> np.ndarray:
        """Direction cosines (k_x, k_y, k_z) of every node, shape (n, 3)."""
        st = np.sin(self.theta)
        k = np.stack(
            [st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=-1
        )
        k.setflags(write=False)
        return k

    @cached_property
    def polarization_basis(self) -> np.ndarray:
        """Two real unit vectors transverse to each node direction, shape (n, 2, 3).

        The pair is (e_theta, e_phi); with the node direction they form a
        right-handed orthonormal triad.
        """
        ct, st = np.cos(self.theta), np.sin(self.theta)
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        basis = np.stack([e_theta, e_phi], axis=1)
        basis.setflags(write=False)
        return basis


def make_gauss_sphere(n_theta: int = DEFAULT_N_THETA, n_phi: int = DEFAULT_N_PHI) -> SphereQuadrature:
    """Product rule: Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

    With ``n_theta`` Legendre nodes and ``n_phi`` azimuthal points the rule
    integrates exactly every spherical harmonic of degree below
    ``min(2 * n_theta, n_phi)``.
    """
    if int(n_theta) != n_theta or int(n_phi) != n_phi:
        raise ValueError(f"quadrature sizes must be integers, got ({n_theta}, {n_phi})")
    n_theta, n_phi = int(n_theta), int(n_phi)
    if n_theta < 4:
        raise ValueError(f"n_theta must be >= 4, got {n_theta}")
    if n_phi < 8:
        raise ValueError(f"n_phi must be >= 8, got {n_phi}")
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(t)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * math.pi / n_phi)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    w = np.outer(wt, wphi)
    return SphereQuadrature(th.ravel(), ph.ravel(), w.ravel(), shape=(n_theta, n_phi))


_DEFAULT_QUAD = None


def default_quadrature() -> SphereQuadrature:
    """The shared (64, 128) rule."""
    global _DEFAULT_QUAD
    if _DEFAULT_QUAD is None:
        _DEFAULT_QUAD = make_gauss_sphere(DEFAULT_N_THETA, DEFAULT_N_PHI)
    return _DEFAULT_QUAD


def sphere_integrate(q: SphereQuadrature, f: Callable) -> float:
    """Weighted node sum of ``f(theta, phi)``.

    ``f`` is called once with the full node arrays and must broadcast. Complex
    integrands are allowed and return a complex result.
    """
    values = np.asarray(f(q.theta, q.phi))
    if values.shape != q.weights.shape:
        values = np.broadcast_to(values, q.weights.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureError(
            f"integrand is not finite at node {i} "
            f"(theta={q.theta[i]!r}, phi={q.phi[i]!r}): {values[i]!r}"
        )
    if np.iscomplexobj(values):
        return complex(
            math.fsum(q.weights * values.real), math.fsum(q.weights * values.imag)
        )
    return math.fsum(q.weights * values)


def exp_integral_e1(x: float, scaled: bool = False) -> float:
    """Exponential integral E1(x) for x > 0.

    Power series for x <= 1, Lentz continued fraction above. With
    ``scaled=True`` the value ``exp(x) * E1(x)`` is returned, which stays
    finite for large x.
    """
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"E1 is only defined here for finite x > 0, got {x!r}")
    if x <= 1.0:
        # E1 = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        terms = []
        term = 1.0
        for k in range(1, 200):
            term *= -x / k
            contrib = term / k
            terms.append(contrib)
            if abs(contrib) < 1e-18:
                break
        value = -EULER_GAMMA - math.log(x) - math.fsum(terms)
        return value * math.exp(x) if scaled else value

    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover - the fraction converges in a few dozen steps for x > 1
        raise RuntimeError(f"E1 continued fraction did not converge at x={x!r}")
    return h if scaled else h * math.exp(-x)


@dataclass(frozen=True)
class SymMatrix:
    """Small labeled symmetric real matrix (Fisher information, covariances)."""

    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {v.shape}")
        n = v.shape[0]
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"matrix dimension must be in 1..{MAX_DIM}, got {n}")
        labels = tuple(self.labels) if self.labels else tuple(f"p{i}" for i in range(n))
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for a {n}x{n} matrix")
        if len(set(labels)) != n:
            raise ValueError(f"duplicate labels: {labels}")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(v - v.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __getitem__(self, key):
        a, b = key
        i = self.index(a) if isinstance(a, str) else a
        j = self.index(b) if isinstance(b, str) else b
        return float(self.values[i, j])

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values)

    def scaled(self, factor: float) -> "SymMatrix":
        return SymMatrix(self.values * float(factor), self.labels)

    def __add__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return SymMatrix(self.values + other.values, self.labels)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "values": self.values.tolist()}


def sym_invert(m: SymMatrix, rtol: float = 1e-12) -> SymMatrix:
    """Inverse of a symmetric positive-definite matrix, labels preserved.

    Raises :class:`SingularMatrixError` carrying the smallest eigenvalue when
    the matrix is singular or indefinite relative to ``rtol``.
    """
    w, v = np.linalg.eigh(m.values)
    wmin, wmax = float(w[0]), float(w[-1])
    if wmax <= 0.0 or wmin <= rtol * wmax:
        raise SingularMatrixError(
            f"matrix over {m.labels} is not positive definite "
            f"(smallest eigenvalue {wmin!r}, largest {wmax!r})",
            smallest_eigenvalue=wmin,
        )
    inv = (v / w) @ v.T
    return SymMatrix(0.5 * (inv + inv.T), m.labels)


def congruence_transform(
    m: SymMatrix, jac, labels: Sequence[str] | None = None
) -> SymMatrix:
    """Return ``jac.T @ m @ jac``.

    ``jac[mu, a]`` is the derivative of old parameter ``mu`` with respect to
    new parameter ``a``, so this is the Fisher-information reparameterization
    rule.
    """
    jac = np.asarray(jac, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != m.dim:
        raise ValueError(
            f"Jacobian shape {jac.shape} does not match a {m.dim}x{m.dim} matrix"
        )
    out = jac.T @ m.values @ jac
    return SymMatrix(0.5 * (out + out.T), labels if labels is not None else ())
