"""Quantum Cramér-Rao limits for locating optical point sources."""

__version__ = "0.1.0"

from .numcore import (  # noqa: E402
    SphereQuadrature,
    SymMatrix,
    congruence_transform,
    exp_integral_e1,
    make_gauss_sphere,
    sphere_integrate,
    sym_invert,
)
from .radiation import DipoleSpec, SinglePhotonSpec, SourceConfig, UnitSystem  # noqa: E402
from .qfi import (  # noqa: E402
    shot_noise_bound,
    squeeze_factor,
    squeezed_bound,
    two_source_qfi,
    kappa_curve,
    single_photon_qfi,
)
