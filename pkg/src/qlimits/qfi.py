"""Quantum Fisher information and Cramér-Rao bounds for point-source localization.

For a coherent (or vacuum-seeded) radiated field the QFI for the source
position is ``J_{mu nu} = 4 k0^2 int khat_mu khat_nu rho(Omega) dOmega`` with
``rho`` the angular photon density, and the per-axis bound is ``W_mu^2 / 4``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LocalRegimeWarning
from .numcore import (
    SphereQuadrature,
    SymMatrix,
    congruence_transform,
    default_quadrature,
    make_gauss_sphere,
)
from .radiation import (
    DipoleKind,
    DipoleSpec,
    SinglePhotonSpec,
    SourceConfig,
    angular_pattern,
    overlap_integral,
    required_n_phi,
    single_photon_density,
)

log = logging.getLogger(__name__)

AXES = ("x", "y", "z")
LOCAL_REGIME = 0.05  # wavelengths
SINGULAR_KAPPA = 1.0 - 1e-12

# N * (2 pi W_mu / lambda0)^2 for the two named dipoles
_W_SQUARED_COEFFS = {
    DipoleKind.LINEAR_Z: (5.0 / 2.0, 5.0 / 2.0, 5.0),
    DipoleKind.CIRCULAR_XY: (10.0 / 3.0, 10.0 / 3.0, 5.0 / 2.0),
}


def base_scale(N: float, lambda0: float = 1.0) -> float:
    """The common length scale lambda0 / (2 pi sqrt(N))."""
    if not N > 0:
        raise ValueError(f"photon number must be positive, got {N!r}")
    return lambda0 / (2.0 * math.pi * math.sqrt(N))


def w_constants_analytic(kind, N: float, lambda0: float = 1.0) -> np.ndarray:
    """Closed-form mode widths (W_x, W_y, W_z) for the linear-z and circular-xy dipoles."""
    kind = DipoleKind(kind)
    if kind not in _W_SQUARED_COEFFS:
        raise ValueError(f"no closed form for dipole kind {kind.value!r}")
    scale = base_scale(N, lambda0)
    return np.sqrt(np.array(_W_SQUARED_COEFFS[kind])) * scale


def _second_moments(density, q: SphereQuadrature) -> np.ndarray:
    """int khat_mu khat_nu density dOmega as a 3x3 array."""
    k = q.unit_vectors
    rho = np.asarray(density(q.theta, q.phi), dtype=float)
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            out[i, j] = out[j, i] = math.fsum(q.weights * rho * k[:, i] * k[:, j])
    return out


def single_source_qfi(
    d: DipoleSpec, q: SphereQuadrature | None = None, lambda0: float = 1.0
) -> SymMatrix:
    """Full 3x3 position QFI of one dipole radiating into vacuum."""
    q = default_quadrature() if q is None else q
    k0 = 2.0 * math.pi / lambda0
    m = _second_moments(lambda t, p: angular_pattern(d, t, p), q)
    return SymMatrix(4.0 * k0**2 * m, AXES)


def w_constants_numeric(
    d: DipoleSpec, q: SphereQuadrature | None = None, lambda0: float = 1.0
) -> np.ndarray:
    """Mode widths by quadrature: W_mu = [k0^2 int khat_mu^2 rho dOmega]^(-1/2)."""
    if not d.N > 0:
        raise ValueError(f"photon number must be positive, got {d.N!r}")
    q = default_quadrature() if q is None else q
    k0 = 2.0 * math.pi / lambda0
    m = _second_moments(lambda t, p: angular_pattern(d, t, p), q)
    return 1.0 / np.sqrt(k0**2 * np.diag(m))


@dataclass(frozen=True)
class ShotNoiseBound:
    """Per-axis mode widths and the mean-square-error bound W^2 / 4."""

    W: np.ndarray
    N: float
    lambda0: float = 1.0
    qcrb_diag: np.ndarray = field(init=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=float).reshape(3)
        W.setflags(write=False)
        qcrb = W**2 / 4.0
        qcrb.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "qcrb_diag", qcrb)

    @property
    def rms(self) -> np.ndarray:
        """Root-mean-square error floor per axis, W / 2."""
        return self.W / 2.0


def shot_noise_bound(
    d: DipoleSpec, lambda0: float = 1.0, q: SphereQuadrature | None = None
) -> ShotNoiseBound:
    """Quantum shot-noise limit for one coherent dipole.

    The closed forms are used for the two named dipole kinds and quadrature
    for everything else.
    """
    if not d.N > 0:
        raise ValueError(f"photon number must be positive, got {d.N!r}")
    if d.kind in _W_SQUARED_COEFFS:
        W = w_constants_analytic(d.kind, d.N, lambda0)
    else:
        W = w_constants_numeric(d, q, lambda0)
    return ShotNoiseBound(W, d.N, lambda0)


def squeeze_factor(N0: float) -> float:
    """Optimal quadrature-variance reduction with N0 photons of squeezed light.

    f(N0) = m (1 - sqrt(1 - m^-2)) with m = 2 N0 + 1, evaluated in the
    cancellation-free form 1 / (m + 2 sqrt(N0 (N0 + 1))).
    """
    N0 = float(N0)
    if not N0 >= 0.0 or not math.isfinite(N0):
        raise ValueError(f"N0 must be finite and >= 0, got {N0!r}")
    return 1.0 / (2.0 * N0 + 1.0 + 2.0 * math.sqrt(N0 * (N0 + 1.0)))


def squeezed_bound(
    b: ShotNoiseBound, N0: float, max_offset: float | None = None
) -> np.ndarray:
    """Per-axis mean-square error W^2 f(N0) / 4 for optimally squeezed homodyne.

    Only valid while the source stays within a small fraction of a wavelength
    of the reference position used to shape the squeezed mode; pass the
    expected ``max_offset`` (same units as lambda0) to be warned otherwise.
    """
    if max_offset is not None and abs(max_offset) > LOCAL_REGIME * b.lambda0:
        warnings.warn(
            f"offset {max_offset!r} is outside the local regime "
            f"(|r - r0| <= {LOCAL_REGIME} lambda0) where squeezing helps",
            LocalRegimeWarning,
            stacklevel=2,
        )
    return b.qcrb_diag * squeeze_factor(N0)


@dataclass(frozen=True)
class TwoSourceQfi:
    """2x2 QFI over (x, x') with the degradation factor and the raised bound on x."""

    matrix: SymMatrix
    kappa: float
    raised_bound_xx: float
    singular: bool = False
    clamped: bool = False


def _x_weight(k):
    return k[:, 0] ** 2


def _two_source_quadrature(a, b, q):
    sep = float(np.linalg.norm(np.subtract(a.position, b.position)))
    need_phi = required_n_phi(sep)
    q = default_quadrature() if q is None else q
    if q.n_phi >= need_phi:
        return q
    n_phi = max(need_phi, q.n_phi)
    n_theta = max(q.n_theta, n_phi // 2)
    log.debug("upscaling quadrature to (%d, %d) for separation %g", n_theta, n_phi, sep)
    return make_gauss_sphere(n_theta, n_phi)


def two_source_qfi(
    a: SourceConfig,
    b: SourceConfig,
    q: SphereQuadrature | None = None,
    lambda0: float = 1.0,
) -> TwoSourceQfi:
    """QFI for the x coordinates of two coherent sources.

    The quadrature is upscaled automatically when the separation needs more
    azimuthal nodes. Coincident, fully overlapping sources give a singular
    matrix; that case is returned with ``singular=True``, ``kappa=1`` and an
    infinite raised bound rather than raising.
    """
    if not (a.dipole.N > 0 and b.dipole.N > 0):
        raise ValueError("both sources need a positive photon number")
    q = _two_source_quadrature(a, b, q)
    k0 = 2.0 * math.pi / lambda0
    jxx = 4.0 * k0**2 * overlap_integral(a, a, _x_weight, q).real
    jpp = 4.0 * k0**2 * overlap_integral(b, b, _x_weight, q).real
    jxp = 4.0 * k0**2 * overlap_integral(a, b, _x_weight, q).real
    matrix = SymMatrix([[jxx, jxp], [jxp, jpp]], ("x", "x'"))
    return _assemble(matrix)


def _assemble(matrix: SymMatrix) -> TwoSourceQfi:
    jxx, jpp, jxp = matrix["x", "x"], matrix["x'", "x'"], matrix["x", "x'"]
    raw = jxp * jxp / (jxx * jpp)
    kappa = min(max(raw, 0.0), 1.0)
    clamped = kappa != raw
    if clamped:
        log.info("kappa %r clamped to %r", raw, kappa)
    singular = kappa >= SINGULAR_KAPPA
    raised = math.inf if singular else 1.0 / (jxx * (1.0 - kappa))
    return TwoSourceQfi(matrix, kappa, raised, singular, clamped)


@dataclass(frozen=True)
class PairTemplate:
    """Two identical dipoles separated along ``direction`` with a fixed relative phase.

    The first source sits at the origin; the second gets ``relative_phase``
    added to its dipole phase.
    """

    dipole: DipoleSpec
    relative_phase: float = 0.0
    direction: tuple = (1.0, 0.0, 0.0)

    def sources(self, separation: float) -> tuple[SourceConfig, SourceConfig]:
        u = np.asarray(self.direction, dtype=float)
        u = u / np.linalg.norm(u)
        a = SourceConfig((0.0, 0.0, 0.0), self.dipole)
        b = SourceConfig(
            separation * u,
            self.dipole.replace(phase=self.dipole.phase + self.relative_phase),
        )
        return a, b


def fig3_template(relative_phase: float = 0.0, N: float = 1.0) -> PairTemplate:
    """x-polarized dipoles displaced along x (y = y', z = z')."""
    return PairTemplate(DipoleSpec.general((1, 0, 0), N), relative_phase)


def kappa_curve(
    template: PairTemplate,
    separations: Sequence[float],
    q: SphereQuadrature | None = None,
) -> list[tuple[float, float]]:
    """Degradation factor kappa at each separation (in wavelengths)."""
    seps = [float(s) for s in separations]
    if not seps:
        raise ValueError("need at least one separation")
    return [(s, two_source_qfi(*template.sources(s), q).kappa) for s in seps]


def centroid_separation_jacobian() -> np.ndarray:
    """d(x, x') / d(c, s) for x = c + s/2, x' = c - s/2."""
    return np.array([[1.0, 0.5], [1.0, -0.5]])


def centroid_separation_qfi(t: TwoSourceQfi) -> SymMatrix:
    """The two-source QFI re-expressed for the centroid and the separation."""
    return congruence_transform(
        t.matrix, centroid_separation_jacobian(), ("centroid", "separation")
    )


def single_photon_qfi(
    s: SinglePhotonSpec, q: SphereQuadrature | None = None, lambda0: float = 1.0
) -> SymMatrix:
    """Position QFI of the one-photon state emitted by an excited two-level atom."""
    q = default_quadrature() if q is None else q
    k0 = 2.0 * math.pi / lambda0
    m = _second_moments(lambda t, p: single_photon_density(s, t, p), q)
    return SymMatrix(4.0 * k0**2 * m, AXES)


def repeated_trials(m: SymMatrix, M: int) -> SymMatrix:
    """QFI of M independent repetitions."""
    if int(M) != M or M < 1:
        raise ValueError(f"number of trials must be a positive integer, got {M!r}")
    return m.scaled(int(M))
