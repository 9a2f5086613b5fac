import math

import numpy as np
import pytest

from qlimits.errors import NumericalError
from qlimits.numcore import make_gauss_sphere
from qlimits.qfi import fig3_template, single_source_qfi, squeeze_factor, w_constants_analytic
from qlimits.radiation import DipoleSpec, SourceConfig
from qlimits.simulate import (
    HeterodyneModel,
    QuadratureModel,
    fisher_of_gaussian_model,
    simulate_heterodyne,
    simulate_homodyne,
)

W = w_constants_analytic("linear-z", 100.0)[0]


def z_source(N=100.0, pos=(0.0, 0.0, 0.0)):
    return SourceConfig(pos, DipoleSpec.linear_z(N))


def test_quadrature_variance_floor():
    with pytest.raises(ValueError, match="floor"):
        QuadratureModel("x", W, quadrature_variance=0.4)
    with pytest.raises(ValueError, match="floor"):
        QuadratureModel("x", W, quadrature_variance=0.01, N0=1.0)
    QuadratureModel("x", W, quadrature_variance=squeeze_factor(1.0) / 2, N0=1.0)
    with pytest.raises(ValueError):
        QuadratureModel("w", W)


@pytest.mark.parametrize("offset", [0.0, 0.01, -0.05])
def test_homodyne_vacuum_attains_shot_noise(offset):
    m = QuadratureModel.vacuum("x", W)
    r = simulate_homodyne(m, offset, 100_000, seed=1)
    assert r.bound_compared == pytest.approx(W**2 / 4, rel=1e-15)
    assert r.within(W**2 / 4)
    assert r.respects_qcrb()


def test_homodyne_squeezed_attains_enhanced_bound():
    m = QuadratureModel.squeezed("z", W, 10.0)
    r = simulate_homodyne(m, 0.02, 100_000, seed=2)
    target = W**2 * squeeze_factor(10.0) / 4
    assert r.bound_compared == pytest.approx(target, rel=1e-15)
    assert r.within(target)
    assert r.empirical_mse < W**2 / 4 / 10


def test_homodyne_rejects_bad_inputs():
    m = QuadratureModel.vacuum("x", W)
    with pytest.raises(ValueError):
        simulate_homodyne(m, 0.0, 0)
    with pytest.raises(ValueError, match="linear regime"):
        simulate_homodyne(m, 0.06, 100)


def test_homodyne_deterministic():
    m = QuadratureModel.vacuum("y", W)
    assert simulate_homodyne(m, 0.0, 20_000, 7) == simulate_homodyne(m, 0.0, 20_000, 7)
    assert simulate_homodyne(m, 0.0, 20_000, 7) != simulate_homodyne(m, 0.0, 20_000, 8)


def test_homodyne_fisher_equals_qfi():
    for N0 in (0.0, 3.0):
        m = QuadratureModel.squeezed("x", W, N0)
        j = fisher_of_gaussian_model(m)
        assert j["x", "x"] == pytest.approx(4 / (W**2 * squeeze_factor(N0)), rel=1e-8)


def test_doubling_noise_halves_fisher():
    m = QuadratureModel.vacuum("x", W)
    noisy = QuadratureModel("x", W, quadrature_variance=1.0)
    assert fisher_of_gaussian_model(noisy)["x", "x"] == pytest.approx(
        fisher_of_gaussian_model(m)["x", "x"] / 2, rel=1e-12)


@pytest.mark.parametrize("dipole", [DipoleSpec.linear_z(40.0), DipoleSpec.circular_xy(40.0),
                                    DipoleSpec.general((1, 0, 1), 40.0)])
def test_heterodyne_fisher_is_half_the_qfi(dipole):
    q = make_gauss_sphere(8, 16)
    h = HeterodyneModel((SourceConfig((0.1, 0, 0), dipole),), q)
    j = fisher_of_gaussian_model(h)
    J = single_source_qfi(dipole, q)
    assert j["x", "x"] == pytest.approx(J["x", "x"] / 2, rel=1e-8)
    assert h.qfi()["x", "x"] == pytest.approx(J["x", "x"], rel=1e-12)
    # the coarse grid is already exact for this degree-4 integrand
    assert J["x", "x"] == pytest.approx(single_source_qfi(dipole)["x", "x"], rel=1e-12)


def test_heterodyne_fd_matches_analytic_jacobian():
    h = HeterodyneModel((z_source(), z_source(pos=(0.3, 0, 0))), make_gauss_sphere(16, 48))
    j = fisher_of_gaussian_model(h)
    D = h.jacobian(h.fiducial)
    np.testing.assert_allclose(j.values, 2 * D.T @ D, rtol=1e-8)


def test_heterodyne_single_source_mse():
    h = HeterodyneModel((z_source(),), truth_offsets=(0.01,))
    (r,) = simulate_heterodyne(h, 100_000, seed=3)
    assert r.bound_compared == pytest.approx(2 * W**2 / 4, rel=1e-12)
    assert r.qcrb == pytest.approx(W**2 / 4, rel=1e-12)
    assert r.within(r.bound_compared)
    assert r.respects_qcrb()


def test_heterodyne_full_outcomes_agree_with_reduced():
    h = HeterodyneModel((z_source(),), truth_offsets=(0.02,))
    (full,) = simulate_heterodyne(h, 40_000, seed=4, full_outcomes=True)
    (red,) = simulate_heterodyne(h, 40_000, seed=4)
    assert full.within(full.bound_compared)
    assert abs(full.empirical_mse - red.empirical_mse) <= 3 * math.hypot(
        full.mse_std_error, red.mse_std_error)


def test_heterodyne_refinement():
    h = HeterodyneModel((z_source(),), truth_offsets=(0.05,))
    (r,) = simulate_heterodyne(h, 400, seed=5, full_outcomes=True, refine_steps=2)
    assert r.within(r.bound_compared, n_sigma=4)
    with pytest.raises(ValueError):
        simulate_heterodyne(h, 400, seed=5, refine_steps=1)


def test_heterodyne_two_well_separated_sources():
    q = make_gauss_sphere(176, 352)
    a, b = fig3_template(N=100.0).sources(10.0)
    h = HeterodyneModel((a, b), q)
    reports = simulate_heterodyne(h, 20_000, seed=6)
    single = 2 / single_source_qfi(a.dipole)["x", "x"]
    for r in reports:
        assert r.bound_compared == pytest.approx(single, rel=1e-4)
        assert r.within(single)
        assert r.respects_qcrb()


def test_heterodyne_fisher_below_qfi():
    h = HeterodyneModel((z_source(), z_source(pos=(0.4, 0, 0))), make_gauss_sphere(16, 48))
    gap = h.qfi().values - fisher_of_gaussian_model(h).values
    assert np.linalg.eigvalsh(gap)[0] >= -1e-8 * np.abs(gap).max()


def test_heterodyne_ill_conditioned():
    with pytest.raises(NumericalError):
        simulate_heterodyne(HeterodyneModel((z_source(N=0.0),)), 10)
    with pytest.raises(NumericalError):
        simulate_heterodyne(HeterodyneModel((z_source(), z_source())), 10)


def test_heterodyne_validation_and_determinism():
    with pytest.raises(ValueError):
        HeterodyneModel(())
    with pytest.raises(ValueError):
        HeterodyneModel((z_source(),), truth_offsets=(0.2,))
    with pytest.raises(ValueError):
        simulate_heterodyne(HeterodyneModel((z_source(),)), 1)
    h = HeterodyneModel((z_source(),))
    assert simulate_heterodyne(h, 5000, 9) == simulate_heterodyne(h, 5000, 9)


def test_richardson_check_flags_rough_models():
    class Rough:
        parameter_labels = ("x",)
        fiducial = np.array([0.0])
        noise_variance = np.array([1.0])

        def mean(self, p):
            return np.array([np.sin(1e7 * p[0])])

    with pytest.raises(NumericalError, match="Richardson"):
        fisher_of_gaussian_model(Rough())

    class Flat(Rough):
        def mean(self, p):
            return np.array([1.0])

    with pytest.raises(NumericalError):
        fisher_of_gaussian_model(Flat())
