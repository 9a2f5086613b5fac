"""Bayesian quantum Cramér-Rao bounds with nuisance parameters.

The bound on the error matrix averaged over the nuisance prior is
``E_Z[barJ(Z)^-1]`` with ``barJ(Z) = E_{X|Z}[J(X|Z)] + j(Z)``. The average is
taken after the inverse, which is what makes it tighter than folding the
nuisance parameters into the estimated ones.

Monte Carlo estimates use numpy's PCG64 generator seeded through
``numpy.random.SeedSequence(seed)``, one stream per call, and exactly rounded
summation (``math.fsum``) so that a given seed reproduces a report bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError
from .numcore import SymMatrix, SphereQuadrature, exp_integral_e1, sym_invert
from .qfi import _two_source_quadrature
from .radiation import SourceConfig, overlap_integral

MAX_BAD_FRACTION = 0.01
KAPPA_CLIP = 1.0 - 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """The package's reference generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


class PriorKind(enum.Enum):
    POINT_MASS = "point-mass"
    THERMAL = "thermal"
    DISCRETE = "discrete"
    SAMPLER = "sampler"


@dataclass(frozen=True)
class NuisancePrior:
    """Distribution of the nuisance parameters Z.

    Use the constructors rather than building this directly. Point masses and
    discrete sets are averaged exactly; thermal priors and samplers by Monte
    Carlo.
    """

    kind: PriorKind
    values: np.ndarray | None = None
    probs: np.ndarray | None = None
    mean: float | None = None
    draw: Callable[[np.random.Generator, int], np.ndarray] | None = field(
        default=None, compare=False
    )
    description: str = ""

    def __post_init__(self):
        if self.kind is PriorKind.THERMAL:
            if not (self.mean is not None and self.mean > 0):
                raise ValueError(f"thermal mean photon number must be > 0, got {self.mean!r}")
        if self.kind in (PriorKind.POINT_MASS, PriorKind.DISCRETE):
            p = np.asarray(self.probs, dtype=float)
            if np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-12:
                raise ValueError("probabilities must be nonnegative and sum to 1")
            if len(self.values) != len(p):
                raise ValueError("values and probabilities differ in length")
        if self.kind is PriorKind.SAMPLER and self.draw is None:
            raise ValueError("a sampler prior needs a draw function")

    @classmethod
    def point_mass(cls, value, description="point mass"):
        return cls(PriorKind.POINT_MASS, np.asarray([value], dtype=float),
                   np.array([1.0]), description=description)

    @classmethod
    def thermal(cls, mean_photon_number: float, description=""):
        """Photon number N ~ exp(-N / Nbar) / Nbar, the thermal-light P function."""
        return cls(PriorKind.THERMAL, mean=float(mean_photon_number),
                   description=description or f"thermal, mean N = {mean_photon_number:g}")

    @classmethod
    def discrete(cls, values, probs, description="discrete"):
        return cls(PriorKind.DISCRETE, np.asarray(values, dtype=float),
                   np.asarray(probs, dtype=float), description=description)

    @classmethod
    def sampler(cls, draw, description):
        """``draw(rng, n)`` must return n samples stacked along axis 0."""
        return cls(PriorKind.SAMPLER, draw=draw, description=description)

    @property
    def is_exact(self) -> bool:
        return self.kind in (PriorKind.POINT_MASS, PriorKind.DISCRETE)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind is PriorKind.THERMAL:
            return rng.exponential(self.mean, size=n)
        if self.kind is PriorKind.SAMPLER:
            return np.asarray(self.draw(rng, n), dtype=float)
        idx = rng.choice(len(self.probs), size=n, p=self.probs)
        return self.values[idx]


@dataclass(frozen=True)
class PriorInfo:
    """Prior Fisher information j of the estimated parameters."""

    j: SymMatrix

    def __post_init__(self):
        scale = max(1.0, float(np.max(np.abs(self.j.values))))
        if self.j.eigvalsh()[0] < -1e-12 * scale:
            raise ValueError("prior Fisher information must be positive semidefinite")

    @classmethod
    def diagonal(cls, values, labels=()):
        return cls(SymMatrix(np.diag(np.asarray(values, dtype=float)), labels))


@dataclass(frozen=True)
class BayesBoundReport:
    """Lower bound on the nuisance-averaged error matrix, with Monte Carlo error."""

    bound: SymMatrix
    n_samples: int
    std_error: np.ndarray
    seed: int | None
    n_singular: int = 0
    n_clipped: int = 0


def bar_qfi(conditional_qfi: Callable, prior_info: PriorInfo) -> Callable:
    """Return Z -> E_{X|Z}[J(X|Z)] + j.

    The caller supplies ``conditional_qfi`` already averaged over the
    position prior. It may return a :class:`SymMatrix` or a plain array.
    """
    jv = prior_info.j.values

    def barJ(z):
        J = conditional_qfi(z)
        values = J.values if isinstance(J, SymMatrix) else np.atleast_2d(np.asarray(J, float))
        if values.shape != jv.shape:
            raise ValueError(f"QFI shape {values.shape} does not match prior info {jv.shape}")
        return SymMatrix(values + jv, prior_info.j.labels)

    return barJ


def _as_stack(mats) -> np.ndarray:
    if isinstance(mats, np.ndarray):
        return mats.reshape(mats.shape[0], *np.atleast_2d(mats[0]).shape)
    return np.stack([m.values if isinstance(m, SymMatrix) else np.atleast_2d(m) for m in mats])


def _invert_stack(stack: np.ndarray):
    """Invert each matrix; report which ones are singular or indefinite."""
    w, v = np.linalg.eigh(stack)
    wmax = w[:, -1]
    ok = (wmax > 0) & (w[:, 0] > 1e-12 * np.abs(wmax))
    inv = np.full_like(stack, np.nan)
    inv[ok] = np.einsum("nij,nj,nkj->nik", v[ok], 1.0 / w[ok], v[ok])
    return inv, ok


def _fsum_mean(x: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Exactly rounded (weighted) mean along axis 0."""
    flat = x.reshape(x.shape[0], -1)
    if weights is None:
        return np.array([math.fsum(col) for col in flat.T]).reshape(x.shape[1:]) / x.shape[0]
    return np.array([math.fsum(weights * col) for col in flat.T]).reshape(x.shape[1:])


def _expectation(prior, func, n_samples, seed, vectorized):
    """Evaluate func on the prior's support or on fresh draws.

    Returns (stacked values, Z values, probabilities or None for MC).
    """
    if prior.is_exact:
        zs, probs = prior.values, prior.probs
    else:
        if n_samples < 2:
            raise ValueError("Monte Carlo needs at least 2 samples")
        zs, probs = prior.sample(make_rng(seed), n_samples), None
    stack = _as_stack(func(zs) if vectorized else [func(z) for z in zs])
    return stack, zs, probs


def bound_with_nuisance(
    prior: NuisancePrior,
    barJ: Callable,
    n_samples: int = 100_000,
    seed: int = 0,
    vectorized: bool = False,
) -> BayesBoundReport:
    """Estimate E_Z[barJ(Z)^-1].

    With ``vectorized=True`` the whole sample array is passed to ``barJ`` at
    once and an (n, d, d) array is expected back.

    Draws whose conditional information is singular are dropped and counted;
    more than 1% of them aborts with :class:`NumericalError`. The standard
    error is the sample standard deviation of the inverted draws over
    sqrt(n); it is zero for point-mass and discrete priors, which are
    averaged exactly.
    """
    stack, zs, probs = _expectation(prior, barJ, n_samples, seed, vectorized)
    inv, ok = _invert_stack(stack)
    n_bad = int(np.count_nonzero(~ok))
    if n_bad > MAX_BAD_FRACTION * len(ok):
        raise NumericalError(
            f"{n_bad} of {len(ok)} nuisance draws give a singular information matrix"
        )
    labels = _labels_of(barJ, zs, vectorized, stack.shape[-1])
    if probs is not None:
        p = probs[ok] / math.fsum(probs[ok])
        mean = _fsum_mean(inv[ok], p)
        return BayesBoundReport(SymMatrix(mean, labels), len(ok), np.zeros_like(mean),
                                None, n_singular=n_bad)
    good = inv[ok]
    mean = _fsum_mean(good)
    resid = good - mean
    var = _fsum_mean(resid * resid) * len(good) / (len(good) - 1)
    se = np.sqrt(var / len(good))
    return BayesBoundReport(SymMatrix(mean, labels), len(ok), se, int(seed), n_singular=n_bad)


def _labels_of(barJ, zs, vectorized, dim):
    if vectorized:
        return ()
    probe = barJ(zs[0])
    return probe.labels if isinstance(probe, SymMatrix) else ()


def jensen_gap(
    prior: NuisancePrior,
    barJ: Callable,
    n_samples: int = 100_000,
    seed: int = 0,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Scalar case: (E[1/barJ], 1/E[barJ]). The first is never smaller."""
    stack, zs, probs = _expectation(prior, barJ, n_samples, seed, vectorized)
    if stack.shape[-1] != 1:
        raise ValueError("jensen_gap is defined for a single parameter")
    vals = stack[:, 0, 0]
    if np.any(vals <= 0):
        raise NumericalError("non-positive Fisher information in a nuisance draw")
    if probs is not None:
        after = math.fsum(probs / vals)
        before = 1.0 / math.fsum(probs * vals)
    else:
        after = math.fsum(1.0 / vals) / len(vals)
        before = len(vals) / math.fsum(vals)
    return after, before


def _check_thermal_args(N_bar, C_mu, lambda0, j_mumu):
    if not (N_bar > 0 and C_mu > 0 and lambda0 > 0):
        raise ValueError("N_bar, C_mu and lambda0 must be positive")
    if not j_mumu > 0:
        raise ValueError(
            "prior information j_mumu must be positive; with j = 0 the thermal "
            "average of 1/N diverges"
        )


def thermal_bound_closed_form(N_bar: float, C_mu: float, lambda0: float, j_mumu: float) -> float:
    """Bound on one coordinate for a thermal source of mean photon number N_bar.

    Equals (C lambda0^2 / N_bar) int_0^inf exp(-N/N_bar) / (N + a) dN with
    a = C lambda0^2 j, evaluated as (C lambda0^2 / N_bar) e^(a/N_bar) E1(a/N_bar).
    """
    _check_thermal_args(N_bar, C_mu, lambda0, j_mumu)
    c = C_mu * lambda0**2
    a = c * j_mumu
    return c / N_bar * exp_integral_e1(a / N_bar, scaled=True)


def thermal_bound_asymptote(N_bar: float, C_mu: float, lambda0: float, j_mumu: float) -> float:
    """Large-N_bar form (C lambda0^2 / N_bar) ln(N_bar / (C lambda0^2 j))."""
    _check_thermal_args(N_bar, C_mu, lambda0, j_mumu)
    c = C_mu * lambda0**2
    return c / N_bar * math.log(N_bar / (c * j_mumu))


def thermal_barJ(C_mu: float, lambda0: float, j_mumu: float) -> Callable:
    """Vectorized barJ(N) = N / (C lambda0^2) + j for photon-number draws."""
    c = C_mu * lambda0**2

    def barJ(N):
        return (np.asarray(N, dtype=float) / c + j_mumu).reshape(-1, 1, 1)

    return barJ


def pair_prior(
    N: float,
    N_prime: float,
    phase: str | float = "uniform",
    thermal: bool = False,
) -> NuisancePrior:
    """Prior over (N, N', psi, psi') for two partially coherent dipoles.

    ``phase="uniform"`` draws independent uniform phases (mutually incoherent
    sources); a number fixes the relative phase psi' - psi (coherent sources).
    With ``thermal=True`` the photon numbers are exponential with the given
    means instead of fixed.
    """
    if phase != "uniform" and not thermal:
        return NuisancePrior.point_mass(
            [N, N_prime, 0.0, float(phase)],
            f"N={N:g}, N'={N_prime:g}, relative phase {float(phase):g}",
        )

    def draw(rng, n):
        if thermal:
            n_a = rng.exponential(N, size=n)
            n_b = rng.exponential(N_prime, size=n)
        else:
            n_a, n_b = np.full(n, float(N)), np.full(n, float(N_prime))
        if phase == "uniform":
            psi = rng.uniform(0.0, 2.0 * math.pi, size=(n, 2))
        else:
            psi = np.zeros((n, 2))
            psi[:, 1] = float(phase)
        return np.column_stack([n_a, n_b, psi])

    desc = ("thermal" if thermal else "fixed") + " photon numbers, " + (
        "independent uniform phases" if phase == "uniform" else f"relative phase {phase}")
    return NuisancePrior.sampler(draw, desc)


def two_source_partial_coherence_bound(
    a: SourceConfig,
    b: SourceConfig,
    prior: NuisancePrior,
    prior_info: PriorInfo | None = None,
    n_samples: int = 100_000,
    seed: int = 0,
    q: SphereQuadrature | None = None,
    lambda0: float = 1.0,
    position_prior: Sequence[tuple] | None = None,
) -> BayesBoundReport:
    """Bound on the x error of source ``a`` when photon numbers and phases are unknown.

    ``prior`` draws rows (N, N', psi, psi'); the photon numbers and phases of
    ``a`` and ``b`` are replaced by each draw. The geometry is fixed by
    default. ``position_prior`` may list ``(r_a, r_b, weight)`` triples over
    which the cross information is averaged.

    Draws with the degradation factor within 1e-12 of one are clipped there
    and counted; more than 1% aborts.
    """
    if prior_info is None:
        prior_info = PriorInfo.diagonal([0.0, 0.0], ("x", "x'"))
    if prior_info.j.dim != 2:
        raise ValueError("prior information must be 2x2 over (x, x')")
    k0 = 2.0 * math.pi / lambda0
    unit_a = SourceConfig(a.position, a.dipole.replace(N=1.0, phase=0.0))
    unit_b = SourceConfig(b.position, b.dipole.replace(N=1.0, phase=0.0))
    q = _two_source_quadrature(unit_a, unit_b, q)

    def wx(k):
        return k[:, 0] ** 2

    s_a = overlap_integral(unit_a, unit_a, wx, q).real
    s_b = overlap_integral(unit_b, unit_b, wx, q).real
    if position_prior is None:
        cross = overlap_integral(unit_a, unit_b, wx, q)
    else:
        wsum = math.fsum(w for _, _, w in position_prior)
        parts = [
            w * overlap_integral(
                SourceConfig(ra, unit_a.dipole), SourceConfig(rb, unit_b.dipole), wx, q
            )
            for ra, rb, w in position_prior
        ]
        cross = complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts)) / wsum

    jv = prior_info.j.values

    if prior.is_exact:
        zs, probs = prior.values, prior.probs
    else:
        if n_samples < 2:
            raise ValueError("Monte Carlo needs at least 2 samples")
        zs, probs = prior.sample(make_rng(seed), n_samples), None
    zs = np.atleast_2d(zs)
    if zs.shape[1] != 4:
        raise ValueError("pair prior must produce rows (N, N', psi, psi')")
    n_a, n_b, psi_a, psi_b = zs.T
    jxx = 4.0 * k0**2 * n_a * s_a + jv[0, 0]
    jpp = 4.0 * k0**2 * n_b * s_b + jv[1, 1]
    jxp = 4.0 * k0**2 * np.sqrt(n_a * n_b) * (cross * np.exp(1j * (psi_b - psi_a))).real + jv[0, 1]
    if np.any(jxx <= 0) or np.any(jpp <= 0):
        raise NumericalError("a draw has zero information about a source position")
    kbar = jxp * jxp / (jxx * jpp)
    clip = kbar >= KAPPA_CLIP
    n_clip = int(np.count_nonzero(clip))
    if n_clip > MAX_BAD_FRACTION * len(kbar):
        raise NumericalError(
            f"{n_clip} of {len(kbar)} draws have degradation factor ~1; the bound diverges"
        )
    kbar = np.minimum(kbar, KAPPA_CLIP)
    terms = 1.0 / (jxx * (1.0 - kbar))
    if probs is not None:
        value = math.fsum(probs * terms)
        se = 0.0
        seed_out = None
    else:
        value = math.fsum(terms) / len(terms)
        resid = terms - value
        se = math.sqrt(math.fsum(resid * resid) / (len(terms) - 1) / len(terms))
        seed_out = int(seed)
    return BayesBoundReport(
        SymMatrix([[value]], ("x",)), len(terms), np.array([[se]]), seed_out, n_clipped=n_clip
    )
