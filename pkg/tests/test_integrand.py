"""Oracles for integrands, gauges and Wulff shapes.

Independent references used here: finite differences of the restriction of
Phi to the sphere, brute-force direction scans for the dual gauge, closed
forms for ellipsoids, and convexity of 1-homogeneous extensions sampled
along random chords.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wulff_lab.errors import (
    ConfigError,
    GridResolutionError,
    NonEllipticError,
    PreconditionError,
)
from wulff_lab.grids import CircleGrid, SphereGrid, make_grid
from wulff_lab.integrand import (
    ConstantOne,
    ModePerturbation,
    QuadraticForm,
    TabulatedIntegrand,
    build_wulff,
    gauge_gradient_residual,
    integrand_from_spec,
)

RNG = np.random.default_rng(777)


def random_unit(m, d, rng=RNG):
    v = rng.normal(size=(m, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# anisotropy tensor
# ---------------------------------------------------------------------------
class TestAnisotropy:
    def test_constant_one_gives_identity(self):
        for d in (2, 3):
            F = ConstantOne(d)
            nu = random_unit(30, d)
            A = F.anisotropy_frame(nu)
            assert np.max(np.abs(A - np.eye(d - 1))) < 1e-13

    def test_isotropic_quadratic_reduces_to_identity(self):
        F = QuadraticForm(np.eye(3))
        nu = random_unit(20, 3)
        assert np.max(np.abs(F.anisotropy_frame(nu) - np.eye(2))) < 1e-13

    def test_quadratic_matches_finite_difference_oracle(self):
        # independent oracle: restrict Phi to the unit circle and use a
        # centered second difference; A = (F o gamma)''(0) + F at nu = e1
        F = QuadraticForm(np.diag([4.0, 1.0]))
        h = 1e-4
        th = np.array([-2 * h, -h, 0.0, h, 2 * h])
        pts = np.stack([np.cos(th), np.sin(th)], axis=-1)
        vals = F.value(pts)
        d2 = (-30 * vals[2] + 16 * (vals[1] + vals[3]) - (vals[0] + vals[4])) / (12 * h * h)
        oracle = d2 + vals[2]
        assert oracle == pytest.approx(0.5, abs=1e-6)  # frozen: det M / F(e1)^3
        A = F.anisotropy_frame(np.array([[1.0, 0.0]]))
        assert A[0, 0, 0] == pytest.approx(oracle, abs=1e-6)

    def test_linear_perturbation_margin_is_exactly_one(self):
        # F = 1 + 0.9 <e3, nu>: the sphere Hessian of a linear function is
        # -f sigma, so A = Id exactly and the margin is 1
        F = ModePerturbation(3, 0.9, 1, axes=(2, 0))
        nu = random_unit(40, 3)
        probe = np.array([0.3, -0.5, 0.81])
        assert F.value(probe[None] / np.linalg.norm(probe)) == pytest.approx(
            1 + 0.9 * probe[2] / np.linalg.norm(probe), rel=1e-12
        )
        assert abs(F.ellipticity_margin(resolution=24) - 1.0) < 1e-10
        A = F.anisotropy_frame(nu)
        assert np.max(np.abs(A - np.eye(2))) < 1e-12

    def test_large_second_mode_is_non_elliptic(self):
        margins = [
            ModePerturbation(3, eps, 2).ellipticity_margin(resolution=32)
            for eps in (0.05, 0.2, 1.0)
        ]
        assert margins[0] > 0
        assert margins[-1] < 0
        assert margins[0] > margins[1] > margins[2]
        with pytest.raises(NonEllipticError):
            ModePerturbation(3, 1.0, 2).check_elliptic()

    def test_non_unit_input_rejected(self):
        F = ConstantOne(3)
        with pytest.raises(PreconditionError):
            F.anisotropy_frame(np.array([[1.0, 1.0, 0.0]]))

    def test_euler_relations(self):
        # grad Phi(nu).nu = Phi(nu) and hess Phi(nu) nu = 0 (1-homogeneity)
        for F in (
            QuadraticForm(np.diag([1.0, 2.0, 3.0])),
            ModePerturbation(3, 0.1, 2),
            ModePerturbation(2, 0.05, 3),
        ):
            nu = random_unit(25, F.dim)
            p, g, H = F.phi_grad_hess(nu)
            assert np.max(np.abs(np.sum(g * nu, -1) - p)) < 1e-12
            assert np.max(np.abs(np.einsum("...de,...e->...d", H, nu))) < 1e-11


# ---------------------------------------------------------------------------
# dual gauge
# ---------------------------------------------------------------------------
class TestGauge:
    def test_isotropic_gauge_is_euclidean_norm(self):
        F = ConstantOne(3)
        assert F.gauge(np.array([0.0, 0.0, 2.0])) == pytest.approx(2.0, rel=1e-12)
        x = RNG.normal(size=(10, 3))
        np.testing.assert_allclose(F.gauge(x), np.linalg.norm(x, axis=-1), rtol=1e-10)

    def test_quadratic_gauge_closed_form_and_bruteforce(self):
        M = np.diag([4.0, 1.0, 2.25])
        F = QuadraticForm(M)
        x = RNG.normal(size=(12, 3)) * 2.0
        got = F.gauge(x)
        np.testing.assert_allclose(got, F.gauge_closed_form(x), rtol=1e-9)
        # a direction scan is a lower bound with O(gap^2) error; the closed
        # form above is the tight oracle
        dirs = random_unit(10_000, 3)
        brute = np.max((x @ dirs.T) / F.value(dirs)[None, :], axis=1)
        assert np.max(np.abs(got - brute) / got) < 5e-3
        assert np.all(got >= brute - 1e-12)

    def test_gauge_homogeneity_and_zero(self):
        F = ModePerturbation(3, 0.1, 2)
        x = RNG.normal(size=(8, 3))
        lam = 2.75
        np.testing.assert_allclose(F.gauge(lam * x), lam * F.gauge(x), rtol=1e-10)
        assert F.gauge(np.zeros(3)) == 0.0

    def test_gauge_is_one_on_wulff_boundary(self):
        for F in (
            ConstantOne(2),
            QuadraticForm(np.diag([4.0, 1.0])),
            ModePerturbation(3, 0.1, 2),
            ModePerturbation(2, 0.08, 3),
        ):
            nu = random_unit(40, F.dim)
            xi = F.xi(nu)
            assert np.max(np.abs(F.gauge(xi) - 1.0)) < 1e-8

    def test_warm_start_agrees_with_cold(self):
        F = ModePerturbation(3, 0.1, 2)
        nu = random_unit(15, 3)
        x = F.xi(nu) * RNG.uniform(0.5, 2.0, size=(15, 1))
        cold = F.gauge(x)
        warm = F.gauge(x, warm_nu=nu)
        np.testing.assert_allclose(cold, warm, rtol=1e-9)

    def test_gauge_gradient_residual(self):
        assert gauge_gradient_residual(ConstantOne(3), random_unit(10, 3)) < 1e-8
        M = np.diag([4.0, 1.0])
        F = QuadraticForm(M)
        nu = np.array([[1.0, 0.0]])
        assert gauge_gradient_residual(F, nu) < 1e-7
        # closed-form gradient oracle M^{-1}x/sqrt(<M^{-1}x,x>)
        x = F.xi(random_unit(12, 2)) * 1.7
        grad = F.gauge_gradient(x)
        oracle = (x @ F.Minv) / F.gauge_closed_form(x)[:, None]
        assert np.max(np.abs(grad - oracle)) < 1e-8
        Fm = ModePerturbation(3, 0.1, 2)
        assert gauge_gradient_residual(Fm, random_unit(10, 3)) < 1e-5


# ---------------------------------------------------------------------------
# Wulff points and shapes
# ---------------------------------------------------------------------------
class TestWulff:
    def test_isotropic_wulff_is_unit_sphere(self):
        F = ConstantOne(3)
        nu = random_unit(20, 3)
        assert np.max(np.abs(F.xi(nu) - nu)) < 1e-13
        W = build_wulff(F, SphereGrid(24))
        assert W.perimeter == pytest.approx(4 * np.pi, rel=1e-10)
        assert W.volume == pytest.approx(4 * np.pi / 3, rel=1e-10)
        assert np.max(np.abs(W.h - W.grid.sigma_chart())) < 1e-12
        assert W.tubular_radius == pytest.approx(0.5, rel=1e-9)

    def test_isotropic_circle(self):
        W = build_wulff(ConstantOne(2), CircleGrid(64))
        assert W.perimeter == pytest.approx(2 * np.pi, rel=1e-12)
        assert W.volume == pytest.approx(np.pi, rel=1e-12)

    def test_quadratic_wulff_is_ellipsoid(self):
        M = np.diag([1.0, 4.0, 2.25])  # semi-axes 1, 2, 1.5
        F = QuadraticForm(M)
        nu = random_unit(30, 3)
        xi = F.xi(nu)
        oracle = (nu @ M) / np.sqrt(np.einsum("md,md->m", nu @ M, nu))[:, None]
        assert np.max(np.abs(xi - oracle)) < 1e-12
        # ellipsoid volume (4 pi / 3) abc
        W = build_wulff(F, SphereGrid(32))
        assert W.volume == pytest.approx(4 * np.pi / 3 * 1 * 2 * 1.5, rel=1e-8)
        assert W.gauge_residual() < 1e-9

    def test_support_identity(self):
        # integral of F(nu) over the shape = (n+1) |U|
        for F, grid in (
            (ModePerturbation(3, 0.1, 2), SphereGrid(24)),
            (ModePerturbation(2, 0.08, 3), CircleGrid(128)),
        ):
            W = build_wulff(F, grid)
            assert W.aniso_energy == pytest.approx((W.n + 1) * W.volume, rel=1e-12)
            assert W.gauge_residual() < 1e-8

    def test_normals_match_position_field(self):
        # the outward normal of the position field at node nu equals nu:
        # tangents are orthogonal to nu and the field points outward
        W = build_wulff(ModePerturbation(3, 0.1, 2), SphereGrid(16))
        ips = np.einsum("...ad,...d->...a", W.tangents, W.nu)
        assert np.max(np.abs(ips)) < 1e-12
        assert np.min(np.einsum("...d,...d->...", W.positions, W.nu)) > 0

    def test_mismatched_dimensions_rejected(self):
        with pytest.raises(ConfigError):
            build_wulff(ConstantOne(2), SphereGrid(12))


# ---------------------------------------------------------------------------
# tabulated integrands
# ---------------------------------------------------------------------------
class TestTabulated:
    def test_matches_analytic_source(self):
        M = np.diag([1.0, 2.0, 1.5])
        src = QuadraticForm(M)
        grid = SphereGrid(48)
        tab = TabulatedIntegrand(grid, src.value(grid.nodes))
        nu = random_unit(25, 3)
        assert np.max(np.abs(tab.value(nu) - src.value(nu))) < 1e-7
        assert np.max(np.abs(tab.xi(nu) - src.xi(nu))) < 5e-5
        A_t = tab.anisotropy_frame(nu)
        A_s = src.anisotropy_frame(nu)
        assert np.max(np.abs(A_t - A_s)) < 1e-4
        assert tab.ellipticity_margin(resolution=16) > 0

    def test_circle_tabulated(self):
        src = ModePerturbation(2, 0.05, 2)
        grid = CircleGrid(256)
        tab = TabulatedIntegrand(grid, src.value(grid.nodes))
        nu = random_unit(30, 2)
        assert np.max(np.abs(tab.value(nu) - src.value(nu))) < 1e-10
        assert np.max(np.abs(tab.xi(nu) - src.xi(nu))) < 1e-6

    def test_resolution_guard(self):
        with pytest.raises(GridResolutionError):
            TabulatedIntegrand(CircleGrid(16), np.ones(16))
        with pytest.raises(NonEllipticError):
            TabulatedIntegrand(CircleGrid(64), -np.ones(64))


# ---------------------------------------------------------------------------
# spec round trip
# ---------------------------------------------------------------------------
def test_spec_round_trip():
    for F in (
        ConstantOne(3),
        QuadraticForm(np.diag([1.0, 2.0, 3.0])),
        ModePerturbation(3, 0.1, 2),
    ):
        G = integrand_from_spec(F.spec())
        nu = random_unit(10, F.dim)
        np.testing.assert_allclose(F.value(nu), G.value(nu), rtol=1e-12)
    with pytest.raises(ConfigError):
        integrand_from_spec({"family": "nope"})
    with pytest.raises(ConfigError):
        integrand_from_spec({"family": "quadratic_form"})
    # hyphens accepted
    assert integrand_from_spec({"family": "constant-one", "dim": 2}).n == 1


# ---------------------------------------------------------------------------
# property: the 1-homogeneous extension of an elliptic integrand is convex
# ---------------------------------------------------------------------------
@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    fam=st.sampled_from(["constant", "quadratic", "mode"]),
)
def test_phi_convex_along_random_chords(seed, fam):
    rng = np.random.default_rng(seed)
    if fam == "constant":
        F = ConstantOne(3)
    elif fam == "quadratic":
        lam = rng.uniform(0.5, 3.0, size=3)
        F = QuadraticForm(np.diag(lam))
    else:
        F = ModePerturbation(3, rng.uniform(0.0, 0.12), int(rng.integers(1, 4)))
    a = rng.normal(size=3)
    b = rng.normal(size=3)
    # keep the chord away from the origin where Phi is non-smooth
    if np.linalg.norm(a + b) < 0.3 or np.linalg.norm(a) < 0.3 or np.linalg.norm(b) < 0.3:
        a = a + np.array([2.0, 0.0, 0.0])
        b = b + np.array([2.0, 0.0, 0.0])
    mid = 0.5 * (a + b)
    lhs = F.phi(mid[None])[0]
    rhs = 0.5 * (F.phi(a[None])[0] + F.phi(b[None])[0])
    assert lhs <= rhs + 1e-10
