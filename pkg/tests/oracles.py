"""Independent reference computations used only by the tests.

Nothing here imports qlimits; each oracle re-derives its quantity from the
defining integral.
"""

import math

import numpy as np
from scipy.integrate import quad


def e1_by_quadrature(x):
    value, _ = quad(lambda t: math.exp(-t) / t, x, math.inf, epsabs=0, epsrel=1e-13, limit=500)
    return value


def brute_sphere(n_theta=512, n_phi=1024):
    """Direction cosines and weights of a dense product rule, built from scratch."""
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t, phi, indexing="ij")
    s = np.sqrt(1 - T**2)
    k = np.stack([s * np.cos(P), s * np.sin(P), T], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    return k, w


def kappa_fig3_1d(d):
    """Degradation factor for x dipoles separated by d along x.

    Only k_x enters, so the sphere integral reduces to 2 pi int du over
    u = k_x in [-1, 1] with the x-dipole pattern 1 - u^2.
    """
    num, _ = quad(lambda u: u * u * (1 - u * u), -1, 1, weight="cos", wvar=2 * math.pi * d,
                  epsabs=1e-15, epsrel=1e-13, limit=400)
    return (num / (4.0 / 15.0)) ** 2


def thermal_bound_by_quadrature(N_bar, c, a):
    """(c / N_bar) int_0^inf exp(-N/N_bar) / (N + a) dN."""
    value, _ = quad(lambda n: math.exp(-n / N_bar) / (n + a), 0, math.inf,
                    epsabs=0, epsrel=1e-13, limit=1000)
    return c / N_bar * value


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)
