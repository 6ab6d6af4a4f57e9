"""Discrete closed hypersurfaces and their anisotropic curvature.

A hypersurface is a map from a quadrature grid on S^n (n in {1, 2}) into
R^(n+1), described by one of three chart types:

* ``SphereRadialChart``  -- position = center + exp(f) * direction;
* ``WulffGraphChart``    -- position = center + scale * (xi(nu) + u * nu),
  a graph in the normal direction over a Wulff shape;
* ``ExplicitChart``      -- raw nodal positions, no off-grid evaluation.

``DiscreteHypersurface`` differentiates the position field with the grid's
stencils to obtain the induced metric, outward unit normal, second
fundamental form and area measure.  ``aniso_shape_operator`` composes the
Weingarten map with an integrand's anisotropy tensor into the mixed
anisotropic shape operator, whose trace is the anisotropic mean curvature.

Module functions provide the derived quantities the experiment suite keeps
asking for: Lp and W^{2,p} norms, the best constant-multiple-of-identity
approximation to the shape operator, convexity and quadrature-identity
checks, star-shaped ray casting (the basis of all resampling), rescaling to
a target perimeter, and Hausdorff distances between node clouds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import ConfigError, EmbeddingError, PreconditionError
from .grids import (
    circular_harmonic,
    inv_sqrt_spd,
    metric_christoffels,
    sqrt_spd,
    tangent_frame,
    theta_parity,
)
from .integrand import EllipticIntegrand, WulffShape


# ---------------------------------------------------------------------------
# tensor fields
# ---------------------------------------------------------------------------

_VARIANCES = ("scalar", "ambient", "vector", "covector", "ud", "dd", "uu")


@dataclass
class TensorField:
    """A nodal tensor field tagged with its index variance.

    ``variance`` is one of: "scalar"; "ambient" (vector of ambient
    components, last axis dim); "vector"/"covector" (one chart index, up or
    down); "ud", "dd", "uu" (two chart indices, first index named first).
    The tag is what makes pointwise norms and index shuffles unambiguous.
    """

    grid: object
    data: np.ndarray
    variance: str

    def __post_init__(self):
        if self.variance not in _VARIANCES:
            raise ConfigError(f"unknown variance {self.variance!r}")
        self.data = np.asarray(self.data, dtype=float)
        lead = self.data.shape[: len(self.grid.shape)]
        if lead != self.grid.shape:
            raise ConfigError("tensor field does not live on the given grid")

    def with_variance(self, target: str, metric, metric_inv) -> "TensorField":
        """Raise/lower chart indices with the given metric."""
        if target == self.variance:
            return TensorField(self.grid, self.data.copy(), target)
        two = {"ud", "dd", "uu"}
        if self.variance in two and target in two:
            data = self.data
            # go through the mixed form, first index up
            if self.variance == "dd":
                data = np.einsum("...ac,...cb->...ab", metric_inv, data)
            elif self.variance == "uu":
                data = np.einsum("...ac,...cb->...ab", data, metric)
            if target == "dd":
                data = np.einsum("...ac,...cb->...ab", metric, data)
            elif target == "uu":
                data = np.einsum("...ac,...cb->...ab", data, metric_inv)
            return TensorField(self.grid, data, target)
        one = {"vector", "covector"}
        if self.variance in one and target in one:
            m = metric if target == "covector" else metric_inv
            return TensorField(
                self.grid, np.einsum("...ab,...b->...a", m, self.data), target
            )
        raise ConfigError(f"cannot convert {self.variance} to {target}")

    def pointwise_norm(self, metric=None, metric_inv=None) -> np.ndarray:
        """Metric Frobenius norm at each node (plain |.| for scalars)."""
        d = self.data
        if self.variance == "scalar":
            return np.abs(d)
        if self.variance == "ambient":
            return np.linalg.norm(d, axis=-1)
        if metric is None or metric_inv is None:
            raise ConfigError("chart-index norms need the metric")
        if self.variance == "vector":
            q = np.einsum("...a,...b,...ab->...", d, d, metric)
        elif self.variance == "covector":
            q = np.einsum("...a,...b,...ab->...", d, d, metric_inv)
        elif self.variance == "ud":
            q = np.einsum("...ab,...cd,...ac,...bd->...", d, d, metric, metric_inv)
        elif self.variance == "dd":
            q = np.einsum("...ab,...cd,...ac,...bd->...", d, d, metric_inv, metric_inv)
        else:  # uu
            q = np.einsum("...ab,...cd,...ac,...bd->...", d, d, metric, metric)
        return np.sqrt(np.maximum(q, 0.0))


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


def _nodal(grid, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 0:
        return np.full(grid.shape, float(values))
    if values.shape != grid.shape:
        raise ConfigError("nodal field shape does not match the grid")
    return values.copy()


def _as_center(dim, center) -> np.ndarray:
    if center is None:
        return np.zeros(dim)
    center = np.asarray(center, dtype=float)
    if center.shape != (dim,):
        raise ConfigError(f"center must have {dim} components")
    return center


def _bisect_ray(fun, lo, hi, tol, max_iter=90):
    """Vectorized bisection for monotone-bracketed ray equations."""
    flo = fun(lo)
    if np.any(flo >= 0.0):
        raise EmbeddingError("ray origin is not strictly inside the surface")
    fhi = fun(hi)
    if np.any(fhi <= 0.0):
        raise EmbeddingError("ray bracket does not enclose the surface")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        neg = fm < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


class SphereRadialChart:
    """Star-shaped surface given by log-radius nodal values over a grid."""

    kind = "sphere_radial"

    def __init__(self, grid, log_radius, center=None):
        self.grid = grid
        self.f = _nodal(grid, log_radius)
        self.center = _as_center(grid.dim, center)
        self._interp = None

    @property
    def interp(self):
        if self._interp is None:
            self._interp = self.grid.interpolator(self.f)
        return self._interp

    def node_positions(self) -> np.ndarray:
        return self.center + np.exp(self.f)[..., None] * self.grid.nodes

    def positions_at(self, coords) -> np.ndarray:
        nu = self.grid.chart_points(*coords)
        f = self.interp.ev(*coords)
        return self.center + np.exp(f)[..., None] * nu

    def radius_at_directions(self, dirs) -> np.ndarray:
        return np.exp(self.interp.at_directions(dirs))

    def ray_radius(self, origin, dirs) -> np.ndarray:
        """Distance from ``origin`` to the surface along unit rays ``dirs``."""
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        rel = origin - self.center
        rmax = float(np.exp(self.f.max()))
        if np.linalg.norm(rel) < 1e-14 * rmax:
            return self.radius_at_directions(dirs)

        def gap(s):
            y = rel + s[..., None] * dirs
            r = np.linalg.norm(y, axis=-1)
            return r - self.radius_at_directions(y / r[..., None])

        lo = np.zeros(dirs.shape[:-1])
        hi = np.full(dirs.shape[:-1], np.linalg.norm(rel) + rmax * (1.0 + 1e-6))
        return _bisect_ray(gap, lo, hi, tol=1e-13 * max(rmax, 1.0))

    def rescaled(self, s: float) -> "SphereRadialChart":
        return SphereRadialChart(self.grid, self.f + np.log(s), self.center * s)

    def translated(self, v) -> "SphereRadialChart":
        return SphereRadialChart(self.grid, self.f, self.center + np.asarray(v, float))


class WulffGraphChart:
    """Graph in the normal direction over a Wulff shape.

    Nodal positions are center + scale * (xi(nu) + u(nu) * nu), where xi is
    the shape's boundary map and u is the nodal height field.
    """

    kind = "wulff_graph"

    def __init__(self, wulff: WulffShape, height=0.0, scale: float = 1.0, center=None):
        self.wulff = wulff
        self.grid = wulff.grid
        self.u = _nodal(self.grid, height)
        if not np.isfinite(scale) or scale <= 0:
            raise ConfigError("scale must be positive")
        self.scale = float(scale)
        self.center = _as_center(self.grid.dim, center)
        self._interp = None

    @property
    def interp(self):
        if self._interp is None:
            self._interp = self.grid.interpolator(self.u)
        return self._interp

    def node_positions(self) -> np.ndarray:
        body = self.wulff.positions + self.u[..., None] * self.grid.nodes
        return self.center + self.scale * body

    def _height_derivs(self, coords):
        if self.grid.n == 1:
            (th,) = coords
            return self.interp.ev(th), np.stack([self.interp.ev(th, 1)], axis=-1)
        th, ph = coords
        u = self.interp.ev(th, ph)
        du = np.stack(
            [self.interp.ev(th, ph, 1, 0), self.interp.ev(th, ph, 0, 1)], axis=-1
        )
        return u, du

    def positions_at(self, coords) -> np.ndarray:
        nu = self.grid.chart_points(*coords)
        u, _ = self._height_derivs(coords)
        xi = self.wulff.integrand.xi(nu)
        return self.center + self.scale * (xi + u[..., None] * nu)

    def jacobian_at(self, coords) -> np.ndarray:
        """Chart partials of the position map, shape (..., n, dim)."""
        nu = self.grid.chart_points(*coords)
        dnu = self.grid.chart_jacobian(*coords)
        A = self.wulff.integrand.anisotropy_ambient(nu)
        u, du = self._height_derivs(coords)
        jac = (
            np.einsum("...de,...ae->...ad", A, dnu)
            + du[..., None] * nu[..., None, :]
            + u[..., None, None] * dnu
        )
        return self.scale * jac

    def ray_radius(self, origin, dirs) -> np.ndarray:
        """Distance to the surface along rays, by chart-coordinate Newton."""
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        grid = self.grid
        frame = tangent_frame(dirs)
        if grid.n == 1:
            coords = [np.arctan2(dirs[..., 1], dirs[..., 0])]
        else:
            coords = [
                np.arccos(np.clip(dirs[..., 2], -1.0, 1.0)),
                np.arctan2(dirs[..., 1], dirs[..., 0]),
            ]
            cap = min(0.3, 4.0 * np.pi / grid.nlat)
        diam = max(self.scale * self.wulff.diameter, 1e-12)
        tol = 1e-13 * diam
        rel = None
        converged = False
        for _ in range(60):
            rel = self.positions_at(tuple(coords)) - origin
            resid = np.einsum("...id,...d->...i", frame, rel)
            if np.max(np.abs(resid)) < tol:
                converged = True
                break
            jac = self.jacobian_at(tuple(coords))
            mat = np.einsum("...id,...ad->...ia", frame, jac)
            if grid.n == 2:
                # precondition the longitude column near the poles
                col = np.maximum(np.abs(np.sin(coords[0])), 1e-3)
                mat = mat.copy()
                mat[..., 1] = mat[..., 1] * col[..., None]
            try:
                step = np.linalg.solve(mat, resid[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise EmbeddingError("ray cast hit a singular chart Jacobian") from exc
            coords[0] = coords[0] - step[..., 0]
            if grid.n == 2:
                coords[0] = np.clip(coords[0], -cap, np.pi + cap)
                coords[1] = coords[1] - step[..., 1] * col
        if not converged:
            worst = float(np.max(np.abs(np.einsum("...id,...d->...i", frame, rel))))
            raise EmbeddingError(f"ray cast did not converge (residual {worst:.2e})")
        rho = np.einsum("...d,...d->...", rel, dirs)
        if np.any(rho <= 0):
            raise EmbeddingError("surface is not star shaped about the ray origin")
        return rho

    def rescaled(self, s: float) -> "WulffGraphChart":
        return WulffGraphChart(self.wulff, self.u, self.scale * s, self.center * s)

    def translated(self, v) -> "WulffGraphChart":
        return WulffGraphChart(
            self.wulff, self.u, self.scale, self.center + np.asarray(v, float)
        )


class ExplicitChart:
    """Raw nodal positions; supports rescaling but no off-grid evaluation."""

    kind = "explicit"

    def __init__(self, grid, positions):
        self.grid = grid
        positions = np.asarray(positions, dtype=float)
        if positions.shape != grid.shape + (grid.dim,):
            raise ConfigError("positions must have shape grid.shape + (dim,)")
        self.positions = positions.copy()

    def node_positions(self) -> np.ndarray:
        return self.positions.copy()

    def ray_radius(self, origin, dirs):
        raise EmbeddingError(
            "explicit charts cannot be ray cast; resample onto a radial chart"
        )

    def rescaled(self, s: float) -> "ExplicitChart":
        return ExplicitChart(self.grid, self.positions * s)

    def translated(self, v) -> "ExplicitChart":
        return ExplicitChart(self.grid, self.positions + np.asarray(v, float))


# ---------------------------------------------------------------------------
# the discrete hypersurface
# ---------------------------------------------------------------------------


class DiscreteHypersurface:
    """Closed hypersurface sampled on a grid, with stencil-based geometry.

    Attributes
    ----------
    positions : (..., dim) nodal immersion.
    tangents : (..., n, dim) chart partials of the immersion.
    g, g_inv : induced metric and inverse.
    normal : outward unit normal (orientation fixed by the signed volume).
    h : second fundamental form <d normal, d position>, symmetrized.
    weingarten : mixed shape operator g^{-1} h.
    dV : nodal quadrature weights for the induced area measure.
    area, volume : total perimeter/area and enclosed volume.
    """

    def __init__(self, chart):
        self.chart = chart
        grid = chart.grid
        self.grid = grid
        self.n = grid.n
        self.dim = grid.dim

        pos = np.asarray(chart.node_positions(), dtype=float)
        if pos.shape != grid.shape + (grid.dim,):
            raise EmbeddingError("chart produced positions of the wrong shape")
        if not np.all(np.isfinite(pos)):
            raise EmbeddingError("chart produced non-finite positions")
        self.positions = pos

        T = np.stack([grid.partials(pos[..., j]) for j in range(self.dim)], axis=-1)
        self.tangents = T
        g = np.einsum("...ad,...bd->...ab", T, T)
        det = np.linalg.det(g)
        if not np.all(np.isfinite(det)) or np.min(det) <= 0.0:
            raise EmbeddingError("degenerate induced metric (immersion folds over)")
        self.g = g
        self.g_inv = np.linalg.inv(g)

        if self.n == 1:
            t = T[..., 0, :]
            cross = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        else:
            cross = np.cross(T[..., 0, :], T[..., 1, :])
        norm = np.linalg.norm(cross, axis=-1, keepdims=True)
        nu = cross / norm

        self.area_element = np.sqrt(det / grid.sigma_det)
        self.dV = grid.weights * self.area_element
        self.area = float(np.sum(self.dV))
        centroid = np.tensordot(self.dV, pos, axes=self.n) / self.area
        if np.sum(self.dV * np.einsum("...d,...d->...", nu, pos - centroid)) < 0:
            nu = -nu
        self.normal = nu
        self.centroid = centroid

        dN = np.stack([grid.partials(nu[..., j]) for j in range(self.dim)], axis=-1)
        self.normal_partials = dN
        self.h = 0.5 * (
            np.einsum("...ad,...bd->...ab", dN, T)
            + np.einsum("...ad,...bd->...ab", T, dN)
        )
        self.weingarten = np.einsum("...ab,...bc->...ac", self.g_inv, self.h)

        support = np.einsum("...d,...d->...", pos, nu)
        self.volume = float(np.sum(self.dV * support)) / (self.n + 1)
        self.diameter = 2.0 * float(
            np.max(np.linalg.norm(pos - centroid, axis=-1))
        )
        self._christ = None

    @property
    def metric(self) -> np.ndarray:
        return self.g

    @property
    def metric_inv(self) -> np.ndarray:
        return self.g_inv

    def christoffels(self) -> np.ndarray:
        if self._christ is None:
            self._christ = metric_christoffels(self.grid, self.g)
        return self._christ

    def quad(self, f) -> float:
        """Integral of a nodal field against the induced area measure."""
        return float(np.sum(self.dV * f))

    def sym_weingarten(self) -> np.ndarray:
        """Shape operator conjugated to a symmetric matrix field."""
        si = inv_sqrt_spd(self.g)
        return np.einsum("...ab,...bc,...cd->...ad", si, self.h, si)

    def principal_curvatures(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.sym_weingarten())

    def describe(self) -> str:
        return f"surface[{self.chart.kind} on {self.grid.describe()}]"


def build_surface(chart) -> DiscreteHypersurface:
    return DiscreteHypersurface(chart)


def nodal_mode_field(grid, modes) -> np.ndarray:
    """Sum of rotational harmonics described by dicts with keys k/amp/axes/phase."""
    out = np.zeros(grid.shape)
    for mode in modes:
        k = int(mode["k"])
        amp = float(mode.get("amp", 0.0))
        axes = tuple(mode.get("axes", (0, 1)))
        coeff = np.exp(1j * float(mode.get("phase", 0.0)))
        out += amp * circular_harmonic(grid.nodes, k, axes, coeff)
    return out


def surface_from_spec(spec: dict, *, grid=None, wulff=None) -> DiscreteHypersurface:
    """Build a surface from a plain-dict description.

    Keys: ``chart`` ("sphere_radial" or "wulff_graph"), ``modes`` (list of
    {k, amp, axes, phase}), ``constant`` (added to the nodal field),
    ``scale`` and ``center`` where the chart supports them.
    """
    if "chart" not in spec:
        raise ConfigError("surface spec needs a 'chart' key")
    kind = str(spec["chart"]).replace("-", "_")
    modes = spec.get("modes", spec.get("u_modes", spec.get("f_modes", [])))
    const = float(spec.get("constant", 0.0))
    center = spec.get("center")
    if kind == "sphere_radial":
        if grid is None:
            raise ConfigError("sphere_radial spec needs a grid")
        field = nodal_mode_field(grid, modes) + const
        return build_surface(SphereRadialChart(grid, field, center))
    if kind == "wulff_graph":
        if wulff is None:
            raise ConfigError("wulff_graph spec needs a Wulff shape")
        field = nodal_mode_field(wulff.grid, modes) + const
        scale = float(spec.get("scale", 1.0))
        return build_surface(WulffGraphChart(wulff, field, scale, center))
    raise ConfigError(f"unknown chart kind {spec['chart']!r}")


# ---------------------------------------------------------------------------
# anisotropic curvature
# ---------------------------------------------------------------------------


@dataclass
class AnisoCurvature:
    """Anisotropic shape operator of a surface for a given integrand.

    ``S`` is the mixed-index operator (anisotropy composed with the
    Weingarten map), ``H`` its trace, ``S0`` the deviation from the best
    multiple of the identity: pointwise H/n for n = 2; the area-averaged
    mean for n = 1, where the pointwise deviation is identically zero.
    """

    surface: DiscreteHypersurface
    integrand: EllipticIntegrand
    S: TensorField
    H: np.ndarray
    H_mean: float
    S0: TensorField
    kappas: np.ndarray
    A_chart: np.ndarray
    trace_convention: str

    def s0_pointwise(self) -> np.ndarray:
        return self.S0.pointwise_norm(self.surface.g, self.surface.g_inv)

    def s0_lp(self, p: float) -> float:
        return lp_norm(self.surface, self.s0_pointwise(), p)

    def identity_deviation(self) -> np.ndarray:
        """Pointwise norm of S minus the identity (rigidity driver)."""
        eye = np.eye(self.surface.n)
        dev = TensorField(self.surface.grid, self.S.data - eye, "ud")
        return dev.pointwise_norm(self.surface.g, self.surface.g_inv)


def aniso_shape_operator(surface: DiscreteHypersurface, integrand) -> AnisoCurvature:
    """Mixed anisotropic shape operator, trace, deviation and eigenvalues."""
    if integrand.dim != surface.dim:
        raise ConfigError("integrand and surface live in different dimensions")
    n = surface.n
    nu = surface.normal
    A_amb = integrand.anisotropy_ambient(nu)
    T = surface.tangents
    a_cov = np.einsum("...ad,...de,...be->...ab", T, A_amb, T)
    a_cov = 0.5 * (a_cov + np.swapaxes(a_cov, -1, -2))
    S = np.einsum("...ac,...cd,...db->...ab", surface.g_inv, a_cov, surface.weingarten)
    H = np.einsum("...aa->...", S)
    H_mean = surface.quad(H) / surface.area

    eye = np.eye(n)
    if n == 2:
        S0 = S - 0.5 * H[..., None, None] * eye
        convention = "pointwise"
    else:
        S0 = S - H_mean * eye
        convention = "mean"

    # eigenvalues via a symmetric similarity: S ~ (si a si)(si h si)
    si = inv_sqrt_spd(surface.g)
    a_tilde = np.einsum("...ab,...bc,...cd->...ad", si, a_cov, si)
    h_tilde = np.einsum("...ab,...bc,...cd->...ad", si, surface.h, si)
    root = sqrt_spd(a_tilde)
    sym = np.einsum("...ab,...bc,...cd->...ad", root, h_tilde, root)
    kappas = np.linalg.eigvalsh(0.5 * (sym + np.swapaxes(sym, -1, -2)))

    return AnisoCurvature(
        surface=surface,
        integrand=integrand,
        S=TensorField(surface.grid, S, "ud"),
        H=H,
        H_mean=float(H_mean),
        S0=TensorField(surface.grid, S0, "ud"),
        kappas=kappas,
        A_chart=a_cov,
        trace_convention=convention,
    )


def second_fundamental_form_radial(grid, log_radius) -> np.ndarray:
    """Mixed shape operator of the star-shaped graph exp(f) * direction.

    Closed-form in the round covariant derivatives of f; used as the
    independent oracle for the stencil pipeline.
    """
    f = _nodal(grid, log_radius)
    df = grid.partials(f)
    hess = grid.sphere_hessian_chart(f)
    sig_inv = grid.sigma_inv()
    df_up = np.einsum("...ab,...b->...a", sig_inv, df)
    grad2 = np.einsum("...a,...a->...", df_up, df)
    w = np.sqrt(1.0 + grad2)
    hess_ud = np.einsum("...ac,...cb->...ab", sig_inv, hess)
    eye = np.eye(grid.n)
    op = (
        eye
        - hess_ud
        + np.einsum("...a,...b->...ab", df_up, np.einsum("...ab,...b->...a", hess, df_up))
        / (w ** 2)[..., None, None]
    )
    return op * (np.exp(-f) / w)[..., None, None]


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _check_p(p: float):
    if not p > 1.0:
        raise PreconditionError("integrability exponent p must exceed 1")


def lp_norm(domain, values, p: float) -> float:
    """Lp norm of a nodal scalar field against the domain's area measure."""
    _check_p(p)
    values = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(np.max(values))
    return float(np.sum(domain.dV * values ** p) ** (1.0 / p))


def covariant_gradient(domain, u) -> np.ndarray:
    """Differential of a scalar field, as a covector field (..., n)."""
    return domain.grid.partials(np.asarray(u, dtype=float))


def covariant_hessian(domain, u) -> np.ndarray:
    """Second covariant derivative of a scalar field, as a dd 2-tensor."""
    u = np.asarray(u, dtype=float)
    du = domain.grid.partials(u)
    raw = domain.grid.second_partials(u)
    gam = domain.christoffels()
    return raw - np.einsum("...cab,...c->...ab", gam, du)


def w2p_norm(domain, u, p: float) -> float:
    """Sobolev norm (|u|_p^p + |grad u|_p^p + |hess u|_p^p)^(1/p).

    ``u`` is a nodal scalar field or a field of ambient vector components;
    vector fields are measured component-by-component and the pointwise
    squares summed before taking the Lp aggregate.
    """
    _check_p(p)
    if np.isinf(p):
        raise PreconditionError("the Sobolev norm needs a finite exponent")
    u = np.asarray(u, dtype=float)
    if u.shape == domain.grid.shape:
        comps = [u]
    elif u.shape == domain.grid.shape + (domain.grid.dim,):
        comps = [u[..., j] for j in range(domain.grid.dim)]
    else:
        raise ConfigError("field must be scalar or ambient-vector valued")
    g_inv = domain.metric_inv
    val2 = np.zeros(domain.grid.shape)
    grad2 = np.zeros(domain.grid.shape)
    hess2 = np.zeros(domain.grid.shape)
    for comp in comps:
        du = covariant_gradient(domain, comp)
        hess = covariant_hessian(domain, comp)
        val2 += comp ** 2
        grad2 += np.einsum("...a,...b,...ab->...", du, du, g_inv)
        hess2 += np.einsum("...ab,...cd,...ac,...bd->...", hess, hess, g_inv, g_inv)
    total = np.sum(
        domain.dV
        * (
            np.maximum(val2, 0.0) ** (p / 2.0)
            + np.maximum(grad2, 0.0) ** (p / 2.0)
            + np.maximum(hess2, 0.0) ** (p / 2.0)
        )
    )
    return float(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# derived checks
# ---------------------------------------------------------------------------


def oscillation_minimum(aniso: AnisoCurvature, p: float):
    """Best constant lam minimizing ||S - lam Id||_Lp and the minimum value.

    The minimizer lies in the convex hull of the operator's eigenvalue
    range; the bounded scalar minimizer is run on a slightly padded bracket.
    """
    _check_p(p)
    surface = aniso.surface
    S = aniso.S.data
    eye = np.eye(surface.n)
    kmin = float(np.min(aniso.kappas))
    kmax = float(np.max(aniso.kappas))
    pad = 0.1 * (kmax - kmin) + 1e-6 * (1.0 + abs(kmax))

    def value(lam):
        dev = TensorField(surface.grid, S - lam * eye, "ud")
        return lp_norm(surface, dev.pointwise_norm(surface.g, surface.g_inv), p)

    res = minimize_scalar(
        value,
        bounds=(kmin - pad, kmax + pad),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x), float(res.fun)


def convexity_check(surface: DiscreteHypersurface, tol: float = 1e-8):
    """(is_convex, margin): margin is the minimal principal curvature."""
    margin = float(np.min(surface.principal_curvatures()))
    return margin >= -tol, margin


def codazzi_residual(surface: DiscreteHypersurface, aniso: AnisoCurvature) -> float:
    """Sup of |grad H - div S| in the induced metric (a discrete identity)."""
    grid = surface.grid
    n = surface.n
    S = aniso.S.data
    gam = surface.christoffels()
    dS = np.empty(S.shape + (n,))
    for a in range(n):
        for b in range(n):
            dS[..., a, b, :] = grid.partials(
                S[..., a, b], parity=theta_parity((a, b))
            )
    div = np.einsum("...aka->...k", dS)
    div = div + np.einsum("...aab,...bk->...k", gam, S)
    div = div - np.einsum("...bak,...ab->...k", gam, S)
    resid = grid.partials(aniso.H) - div
    norm2 = np.einsum("...a,...b,...ab->...", resid, resid, surface.g_inv)
    return float(np.sqrt(max(float(np.max(norm2)), 0.0)))


def det_identity_residual(
    surface: DiscreteHypersurface, aniso: AnisoCurvature, reference_grid=None
) -> dict:
    """Compare the surface integral of det S with its unit-sphere value.

    For convex surfaces the normal map has degree one, so the integral of
    det S over the surface equals the integral of the determinant of the
    frame anisotropy over the unit sphere; both sides are returned together
    with the relative residual.  Non-convex input raises.
    """
    ok, margin = convexity_check(surface)
    if not ok:
        raise PreconditionError(
            f"determinant identity needs a convex surface (margin {margin:.3e})"
        )
    lhs = surface.quad(np.linalg.det(aniso.S.data))
    ref = reference_grid if reference_grid is not None else surface.grid
    A_frame = aniso.integrand.anisotropy_frame(ref.nodes)
    rhs = ref.quad(np.linalg.det(A_frame))
    return {
        "surface_integral": lhs,
        "sphere_integral": rhs,
        "relative_residual": abs(lhs - rhs) / abs(rhs),
    }


def hausdorff_distance(s1: DiscreteHypersurface, s2: DiscreteHypersurface) -> float:
    """Two-sided Hausdorff distance between the nodal point clouds."""
    P = s1.positions.reshape(-1, s1.dim)
    Q = s2.positions.reshape(-1, s2.dim)
    d1 = float(np.max(cKDTree(Q).query(P)[0]))
    d2 = float(np.max(cKDTree(P).query(Q)[0]))
    return max(d1, d2)


def rescale_to_perimeter(surface: DiscreteHypersurface, target: float):
    """Rescale about the origin so the perimeter hits ``target``.

    Returns (new_surface, scale_factor); curvatures shrink by the factor and
    the area measure picks up its n-th power.
    """
    if not target > 0:
        raise ConfigError("target perimeter must be positive")
    s = (target / surface.area) ** (1.0 / surface.n)
    return build_surface(surface.chart.rescaled(s)), s


def radial_function(surface: DiscreteHypersurface, center, directions=None) -> np.ndarray:
    """Star-body radii of the surface about ``center`` along unit directions.

    Defaults to the surface's own grid directions.  Requires a chart that
    supports ray casting (radial or graph charts, not explicit ones).
    """
    if directions is None:
        directions = surface.grid.nodes
    return surface.chart.ray_radius(center, np.asarray(directions, dtype=float))
