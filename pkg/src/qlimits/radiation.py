"""Dipole sources and their far-field angular photon densities.

Conventions used throughout the package:

* Lengths (positions, separations) are in units of the wavelength, so the
  far-field wavenumber is ``2 * pi`` and a displacement ``dr`` multiplies the
  radiated amplitude by ``exp(-2j * pi * khat . dr)``.
* A dipole's global phase ``psi`` multiplies its radiated amplitude by
  ``exp(1j * psi)``. Overlaps are taken as ``conj(a) * b``, so advancing the
  phase of ``b`` by ``psi`` multiplies ``overlap_integral(a, b, w)`` by
  ``exp(+1j * psi)``.
* Emission strength is given directly as the mean radiated photon number N.
  :func:`photon_number_from_dipole` converts laboratory dipole amplitudes.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import constants

from .errors import QuadratureResolutionWarning
from .numcore import SphereQuadrature, default_quadrature

PATTERN_NORM = 3.0 / (8.0 * math.pi)


def required_n_phi(separation: float) -> int:
    """Azimuthal resolution needed for a phase factor exp(2j pi d khat)."""
    return int(math.ceil(32.0 * (1.0 + abs(float(separation)))))


@dataclass(frozen=True)
class UnitSystem:
    """Wavelength in the medium; ``lambda0=1.0`` is natural units."""

    lambda0: float = 1.0
    note: str = "positions in units of lambda0"

    def __post_init__(self):
        if not self.lambda0 > 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0!r}")

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.lambda0


def photon_number_from_dipole(p0: float, omega0: float, duration: float) -> float:
    """Mean number of photons radiated by a classical dipole.

    ``p0`` is the amplitude |p0| in C*m of p(t) = p0 exp(-i omega0 t) + c.c.,
    ``omega0`` the angular frequency in rad/s and ``duration`` the emission
    time in s. Valid in the far-field limit omega0 * duration >> 1.
    """
    hbar, eps0, c = constants.hbar, constants.epsilon_0, constants.c
    return p0**2 * omega0**3 * duration / (3.0 * math.pi * hbar * eps0 * c**3)


class DipoleKind(enum.Enum):
    LINEAR_Z = "linear-z"
    CIRCULAR_XY = "circular-xy"
    GENERAL = "general"


_NAMED_VECTORS = {
    DipoleKind.LINEAR_Z: np.array([0.0, 0.0, 1.0], dtype=complex),
    DipoleKind.CIRCULAR_XY: np.array([1.0, 1.0j, 0.0], dtype=complex) / math.sqrt(2.0),
}


@dataclass(frozen=True, eq=False)
class DipoleSpec:
    """Polarization, photon number and phase of a point dipole."""

    kind: DipoleKind
    N: float = 1.0
    phase: float = 0.0
    vector: np.ndarray | None = None

    def __post_init__(self):
        kind = DipoleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.N >= 0.0 and math.isfinite(self.N)):
            raise ValueError(f"photon number must be finite and >= 0, got {self.N!r}")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        if kind is DipoleKind.GENERAL:
            if self.vector is None:
                raise ValueError("a general dipole needs a polarization vector")
            v = np.asarray(self.vector, dtype=complex).reshape(3)
            norm = math.sqrt(float(np.vdot(v, v).real))
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"polarization vector must have unit norm, got {norm!r}")
        else:
            v = _NAMED_VECTORS[kind]
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    def __eq__(self, other):
        if not isinstance(other, DipoleSpec):
            return NotImplemented
        return (self.kind, self.N, self.phase) == (other.kind, other.N, other.phase) and bool(
            np.array_equal(self.vector, other.vector)
        )

    def __hash__(self):
        return hash((self.kind, self.N, self.phase, tuple(self.vector.tolist())))

    @classmethod
    def linear_z(cls, N=1.0, phase=0.0):
        return cls(DipoleKind.LINEAR_Z, N, phase)

    @classmethod
    def circular_xy(cls, N=1.0, phase=0.0):
        return cls(DipoleKind.CIRCULAR_XY, N, phase)

    @classmethod
    def general(cls, vector, N=1.0, phase=0.0):
        """Arbitrary complex polarization; ``vector`` is normalized here."""
        v = np.asarray(vector, dtype=complex).reshape(3)
        norm = math.sqrt(float(np.vdot(v, v).real))
        if norm == 0.0:
            raise ValueError("polarization vector must be nonzero")
        return cls(DipoleKind.GENERAL, N, phase, v / norm)

    @classmethod
    def from_name(cls, name: str, N=1.0, phase=0.0):
        """Named kinds plus the axis shorthands ``x``, ``y``, ``z``."""
        axes = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}
        if name in axes:
            return cls.general(axes[name], N, phase)
        return cls(DipoleKind(name), N, phase)

    def replace(self, **changes) -> "DipoleSpec":
        fields_ = {"kind": self.kind, "N": self.N, "phase": self.phase, "vector": self.vector}
        fields_.update(changes)
        return DipoleSpec(**fields_)


@dataclass(frozen=True)
class SourceConfig:
    """A dipole at ``position`` (3-vector in wavelengths)."""

    position: tuple
    dipole: DipoleSpec

    def __post_init__(self):
        pos = tuple(float(c) for c in np.asarray(self.position, dtype=float).reshape(3))
        if not all(math.isfinite(c) for c in pos):
            raise ValueError(f"position must be finite, got {pos}")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class SinglePhotonSpec:
    """Excited two-level emitter: transition dipole direction and linewidth.

    ``linewidth_ratio`` is 1 / (omega0 * T1); the narrow-line treatment used
    here needs it to be small.
    """

    dipole_direction: np.ndarray
    linewidth_ratio: float = 1e-7

    def __post_init__(self):
        v = np.asarray(self.dipole_direction, dtype=complex).reshape(3)
        norm = math.sqrt(float(np.vdot(v, v).real))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"dipole direction must have unit norm, got {norm!r}")
        if not 0.0 < self.linewidth_ratio <= 0.01:
            raise ValueError(
                f"linewidth_ratio must lie in (0, 0.01], got {self.linewidth_ratio!r}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "dipole_direction", v)


def _khat(theta, phi):
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def angular_pattern(d: DipoleSpec, theta, phi):
    """Radiated photons per unit solid angle; integrates to ``d.N``.

    rho = (3 N / 8 pi) (1 - |khat . p|^2) for a unit polarization vector p.
    """
    k = _khat(theta, phi)
    kp = k @ d.vector
    return d.N * PATTERN_NORM * (1.0 - np.abs(kp) ** 2)


def field_amplitudes(src: SourceConfig, q: SphereQuadrature) -> np.ndarray:
    """Far-field amplitude at every node for both transverse polarizations.

    Shape (n_nodes, 2). Summing ``|a|**2`` over polarizations gives the
    angular pattern of ``src.dipole``.
    """
    d = src.dipole
    k = q.unit_vectors
    proj = q.polarization_basis @ d.vector  # (n, 2)
    phase = d.phase - 2.0 * math.pi * (k @ np.asarray(src.position))
    return math.sqrt(d.N * PATTERN_NORM) * np.exp(1j * phase)[:, None] * proj


def overlap_integral(
    a: SourceConfig,
    b: SourceConfig,
    weight: Callable[[np.ndarray], np.ndarray] | None = None,
    q: SphereQuadrature | None = None,
) -> complex:
    """Polarization-summed mode overlap ``sum_s int w(khat) conj(a) b dOmega``.

    ``weight`` maps the (n, 3) array of node directions to real weights; the
    default is 1, giving the photon number for ``a == b``.
    """
    q = default_quadrature() if q is None else q
    sep = float(np.linalg.norm(np.subtract(a.position, b.position)))
    if q.n_phi and q.n_phi < required_n_phi(sep):
        warnings.warn(
            f"n_phi={q.n_phi} undersamples the phase factor at separation {sep:.3g} "
            f"wavelengths (need >= {required_n_phi(sep)})",
            QuadratureResolutionWarning,
            stacklevel=2,
        )
    fa = field_amplitudes(a, q)
    if a == b:
        integrand = np.sum(np.abs(fa) ** 2, axis=1).astype(complex)
    else:
        integrand = np.sum(np.conj(fa) * field_amplitudes(b, q), axis=1)
    w =q.weights if weight is None else q.weights * np.asarray(weight(q.unit_vectors), float)
    return complex(math.fsum(w * integrand.real), math.fsum(w * integrand.imag))


def single_photon_density(s: SinglePhotonSpec, theta, phi):
    """Angular probability density of the photon emitted by a two-level atom.

    In the narrow-line limit the Lorentzian frequency factor collapses onto
    the resonance shell and only the polarization sum
    ``sum_s |mu . eps_s|^2`` over the two transverse vectors survives. It is
    evaluated here explicitly from the (e_theta, e_phi) basis.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    mu = s.dipole_direction
    total = np.abs(e_theta @ mu) ** 2 + np.abs(e_phi @ mu) ** 2
    return PATTERN_NORM * total
