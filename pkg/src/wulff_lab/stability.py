"""Second-variation operator, kernel projection, and graph reparametrization.

The second variation of the anisotropic surface energy at its minimizing
shape, restricted to normal graphs with height u, is governed by

    L u = div(A grad u) + q u,

where A is the mixed anisotropy endomorphism of the shape, the divergence
and gradient are taken in the shape's induced metric, and q is a
zeroth-order coefficient.  Two conventions for q are implemented:

* "isotropic": q is the trace of the classical shape operator.  With this
  choice L annihilates the height functions of infinitesimal translations
  exactly (verified to discretization order by the test suite).
* "anisotropic": q is the trace of the anisotropy-weighted shape operator,
  which equals the surface dimension on the minimizer.  This variant does
  not annihilate translation heights; it is kept so experiments can
  discriminate between the two candidates.

Divergences of tangent vector fields are evaluated through their ambient
components.  Chart components of smooth vector fields blow up like 1/theta
at the sphere grid's poles, where latitude stencils cannot follow them;
ambient components are bounded scalar fields, and the chain rule

    (grad_j X)^i = omega^{ik} <t_k, d_j X_ambient>

recovers the covariant derivative from stencil-differentiable data.  The
same route gives the tensor-valued linearization of the anisotropy-weighted
shape operator along normal graphs,

    (Lt u)^i_j = (grad_j (A grad u))^i + u W^i_j,

whose traceless part is the first-order model for the curvature deviation
of a graph of small height.

Spectra are computed by a Rayleigh-Ritz restriction of the weak form to a
subspace of smooth rotational harmonics.  Collocation spectra of
divergence-form operators assembled from finite-difference stencils carry
families of dispersion-damaged high-frequency modes that land anywhere in
the spectral window (the stencil symbol of a first derivative turns over
and returns to zero at the grid Nyquist frequency); restricting to a smooth
subspace removes those families while resolving the analytic eigenfunctions
to quadrature accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize
from scipy.special import sph_harm_y

from .errors import ConfigError, EmbeddingError, PreconditionError
from .surface import (
    DiscreteHypersurface,
    TensorField,
    WulffGraphChart,
    _bisect_ray,
    _nodal,
    aniso_shape_operator,
    build_surface,
    covariant_hessian,
    lp_norm,
    w2p_norm,
)
from .integrand import WulffShape

__all__ = [
    "StabilityOperator",
    "KernelBasis",
    "harmonic_basis",
    "KernelOffset",
    "best_kernel_offset",
    "ReparamResult",
    "reparametrize_over_wulff",
    "centering_map",
    "CenterResult",
    "find_center",
    "expansion_check",
    "linearization_residual",
]

ZEROTH_ORDER_VARIANTS = ("isotropic", "anisotropic")

# dense assembly is O(N^2) operator applies; keep it to diagnostic sizes
DENSE_NODE_CAP = 2048


def _grid_moments(wulff: WulffShape, u: np.ndarray) -> np.ndarray:
    """Integrals of u against each ambient normal component."""
    axes = wulff.n
    return np.tensordot(wulff.dV * u, wulff.grid.nodes, axes=axes)


class StabilityOperator:
    """Second-variation operator of the anisotropic energy at its minimizer.

    Parameters
    ----------
    wulff : WulffShape
        The minimizing shape whose analytic chart fields supply all
        coefficients.
    zeroth_order : {"isotropic", "anisotropic"}
        Choice of the zeroth-order coefficient, see the module docstring.
    """

    def __init__(self, wulff: WulffShape, zeroth_order: str = "isotropic"):
        if zeroth_order not in ZEROTH_ORDER_VARIANTS:
            raise ConfigError(
                f"zeroth_order must be one of {ZEROTH_ORDER_VARIANTS}"
            )
        self.wulff = wulff
        self.grid = wulff.grid
        self.zeroth_order = zeroth_order
        # mixed anisotropy endomorphism and the contravariant flux coefficient
        self.mixed = np.einsum("...ab,...bc->...ac", wulff.omega_inv, wulff.A_chart)
        self.flux_coeff = np.einsum(
            "...ab,...bc->...ac", self.mixed, wulff.omega_inv
        )
        if zeroth_order == "isotropic":
            self.zeroth = np.einsum("...aa->...", wulff.weingarten)
        else:
            self.zeroth = np.einsum(
                "...ab,...ba->...", self.mixed, wulff.weingarten
            )

    # -- first-order building blocks ------------------------------------

    def flux(self, u) -> np.ndarray:
        """Contravariant flux A grad u of a nodal scalar field."""
        u = _nodal(self.grid, u)
        du = self.grid.partials(u)
        return np.einsum("...ab,...b->...a", self.flux_coeff, du)

    def covariant_vector_derivative(self, X) -> np.ndarray:
        """grad_j X^i of a contravariant tangent field, via ambient components.

        The field enters as chart components (..., n); the result carries one
        upper and one lower index (..., i, j).
        """
        W = self.wulff
        Xamb = np.einsum("...a,...ad->...d", X, W.tangents)
        dXamb = np.stack(
            [self.grid.partials(Xamb[..., d]) for d in range(self.grid.dim)],
            axis=-2,
        )
        return np.einsum(
            "...ik,...kd,...dj->...ij", W.omega_inv, W.tangents, dXamb
        )

    def divergence(self, X) -> np.ndarray:
        """Covariant divergence of a contravariant tangent field."""
        return np.einsum("...ii->...", self.covariant_vector_derivative(X))

    # -- the operator ----------------------------------------------------

    def apply(self, u) -> np.ndarray:
        """L u on nodal values."""
        u = _nodal(self.grid, u)
        return self.divergence(self.flux(u)) + self.zeroth * u

    def apply_tensor(self, u) -> TensorField:
        """Tensor-valued linearization grad(A grad u) + u W, mixed indices.

        Its traceless part models the curvature deviation of a normal graph
        of height u to first order.  Independent of the scalar zeroth-order
        variant.
        """
        u = _nodal(self.grid, u)
        covX = self.covariant_vector_derivative(self.flux(u))
        data = covX + u[..., None, None] * self.wulff.weingarten
        return TensorField(self.grid, data, "ud")

    def kernel_residual(self, c) -> float:
        """sup |L <c, normal>| for a constant ambient vector c."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.grid.dim,):
            raise ConfigError(f"c must have {self.grid.dim} components")
        return float(np.max(np.abs(self.apply(self.grid.nodes @ c))))

    # -- dense diagnostics ------------------------------------------------

    def assemble_dense(self) -> np.ndarray:
        """Strong-form collocation matrix acting on raveled nodal values."""
        N = int(np.prod(self.grid.shape))
        if N > DENSE_NODE_CAP:
            raise ConfigError(
                f"dense assembly is capped at {DENSE_NODE_CAP} nodes, got {N}"
            )
        M = np.empty((N, N))
        for j in range(N):
            e = np.zeros(N)
            e[j] = 1.0
            M[:, j] = self.apply(e.reshape(self.grid.shape)).ravel()
        return M

    def spectrum(self, degree: int = 8) -> np.ndarray:
        """Descending Ritz eigenvalues on the rotational-harmonic subspace.

        ``degree`` is the maximal harmonic degree; the subspace dimension is
        2*degree + 1 on curves and (degree + 1)^2 on surfaces.  Eigenvalues
        of smooth eigenfunctions are resolved to quadrature accuracy; raising
        the degree adds deeper (more negative) eigenvalues.
        """
        basis = harmonic_basis(self.grid, degree)
        B = basis.shape[0]
        dV = self.wulff.dV
        flat = basis.reshape(B, -1)
        mass = flat @ (dV.ravel()[None, :] * flat).T
        grads = np.stack(
            [self.grid.partials(basis[i]) for i in range(B)], axis=0
        )
        n = self.grid.n
        gflat = grads.reshape(B, -1, n)
        kflat = (dV[..., None, None] * self.flux_coeff).reshape(-1, n, n)
        Q = -np.einsum("kxa,xab,lxb->kl", gflat, kflat, gflat)
        Q += flat @ ((dV * self.zeroth).ravel()[None, :] * flat).T
        vals = scipy.linalg.eigh(
            0.5 * (Q + Q.T), 0.5 * (mass + mass.T), eigvals_only=True
        )
        return vals[::-1]


def harmonic_basis(grid, degree: int) -> np.ndarray:
    """Real rotational harmonics through ``degree``, stacked nodal fields."""
    if degree < 0:
        raise ConfigError("harmonic degree must be nonnegative")
    fields = []
    if grid.n == 1:
        if 2 * degree + 1 > grid.shape[0]:
            raise ConfigError("harmonic degree exceeds the grid resolution")
        th = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        fields.append(np.ones(grid.shape))
        for k in range(1, degree + 1):
            fields.append(np.cos(k * th))
            fields.append(np.sin(k * th))
    else:
        if (degree + 1) ** 2 > int(np.prod(grid.shape)) // 4:
            raise ConfigError("harmonic degree exceeds the grid resolution")
        ones = np.ones(grid.shape)
        th = grid.theta[:, None] * ones
        ph = grid.phi[None, :] * ones
        for ell in range(degree + 1):
            fields.append(np.real(sph_harm_y(ell, 0, th, ph)))
            for m in range(1, ell + 1):
                Y = sph_harm_y(ell, m, th, ph)
                fields.append(np.sqrt(2.0) * np.real(Y))
                fields.append(np.sqrt(2.0) * np.imag(Y))
    return np.stack(fields, axis=0)


class KernelBasis:
    """Height functions of infinitesimal translations and their projector.

    The functions <c, normal> span the translation modes of a shape.  The
    Gram matrix of the ambient normal components against the shape's area
    measure converts moment integrals into translation vectors: for
    u = <c, normal> the recovered coefficients equal c exactly.
    """

    def __init__(self, wulff: WulffShape):
        self.wulff = wulff
        nodes = wulff.grid.nodes
        axes = list(range(wulff.n))
        self.gram = np.tensordot(
            wulff.dV[..., None] * nodes, nodes, axes=(axes, axes)
        )

    def coefficients(self, u) -> np.ndarray:
        """Translation vector whose height best matches u (area measure)."""
        u = _nodal(self.wulff.grid, u)
        return np.linalg.solve(self.gram, _grid_moments(self.wulff, u))

    def project(self, u) -> np.ndarray:
        """Component of u inside the translation-height subspace."""
        return self.wulff.grid.nodes @ self.coefficients(u)

    def projection(self, u):
        """Translation vector and its height field, as a pair (v, field)."""
        v = self.coefficients(u)
        return v, self.wulff.grid.nodes @ v

    def deflate(self, u) -> np.ndarray:
        """u with its translation-height component removed."""
        return _nodal(self.wulff.grid, u) - self.project(u)

    @property
    def orthonormal_fields(self) -> np.ndarray:
        """The translation heights orthonormalized against the area measure.

        Rows are fields of shape ``grid.shape``; their mutual mean-square
        inner products form the identity matrix.
        """
        nodes = self.wulff.grid.nodes
        raw = np.moveaxis(nodes, -1, 0)
        chol = np.linalg.cholesky(self.gram)
        flat = raw.reshape(self.wulff.grid.dim, -1)
        ortho = np.linalg.solve(chol, flat)
        return ortho.reshape(raw.shape)


class KernelOffset(NamedTuple):
    """Result of a translation-vector fit: argmin, value, optimizer status."""

    center: np.ndarray
    value: float
    converged: bool


OFFSET_FORMS = ("scalar", "displacement")


def best_kernel_offset(
    wulff: WulffShape, height, p: float, form: str = "scalar"
) -> KernelOffset:
    """Constant translation vector minimizing a Sobolev misfit of a height.

    Two convex objectives are supported.  With ``form="scalar"`` the fit is

        c  ->  || u - <c, normal> ||_{W^{2,p}},

    the distance of the height field from the translation-height subspace.
    With ``form="displacement"`` the objective is the norm of the ambient
    graph displacement with a constant vector removed,

        c  ->  || u * normal - c ||_{W^{2,p}};

    here c has no derivatives, so for p = 2 the exact minimizer is the
    area-measure mean of the displacement field.  Both objectives are
    minimized by simplex descent from the mean-square kernel projection
    (scalar form) or the mean displacement (displacement form); the best
    value seen, seed included, is returned.

    Returns
    -------
    KernelOffset
        ``center`` (the argmin), ``value`` (the attained norm), and
        ``converged`` (False when the simplex search hit its iteration
        budget; the result is then the best point seen so far).
    """
    if form not in OFFSET_FORMS:
        raise ConfigError(f"form must be one of {OFFSET_FORMS}, got {form!r}")
    u = _nodal(wulff.grid, height)
    nodes = wulff.grid.nodes
    if form == "scalar":
        seed = KernelBasis(wulff).coefficients(u)

        def objective(c):
            return w2p_norm(wulff, u - nodes @ c, p)

    else:
        disp = u[..., None] * nodes
        seed = np.tensordot(wulff.dV, disp, axes=wulff.n) / wulff.perimeter

        def objective(c):
            return w2p_norm(wulff, disp - c, p)

    best_c, best_val = seed, objective(seed)
    res = minimize(
        objective,
        best_c,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400},
    )
    if res.fun < best_val:
        best_c, best_val = np.asarray(res.x), float(res.fun)
    return KernelOffset(best_c, float(best_val), bool(res.success))


# ---------------------------------------------------------------------------
# graph reparametrization and centering
# ---------------------------------------------------------------------------


@dataclass
class ReparamResult:
    """Normal-graph description of a surface over a reference shape."""

    height: np.ndarray
    surface: DiscreteHypersurface
    center: np.ndarray


def reparametrize_over_wulff(
    surface: DiscreteHypersurface,
    wulff: WulffShape,
    center=None,
    refine: float = 1.5,
) -> ReparamResult:
    """Express a star-shaped surface as a normal graph over a shape.

    Solves, per reference node z with normal nu, for the height t such that
    center + z + t nu lies on the surface.  A radial interpolant sampled by
    exact chart ray casts on a refined grid brackets the root; damped Newton
    steps with exact ray casts at the current directions then polish the
    height to the chart tolerance, so no interpolation error survives in the
    returned field.

    Raises
    ------
    EmbeddingError
        If the surface is not a normal graph over the shape about this
        center (no bracket inside the tubular neighborhood, near-tangent
        rays, or a stalled polish).
    """
    if surface.dim != wulff.grid.dim:
        raise ConfigError("surface and reference shape dimensions disagree")
    center = (
        np.zeros(wulff.grid.dim)
        if center is None
        else np.asarray(center, dtype=float)
    )
    if center.shape != (wulff.grid.dim,):
        raise ConfigError(f"center must have {wulff.grid.dim} components")

    ref = surface.grid.refined(refine)
    rho_ref = surface.chart.ray_radius(center, ref.nodes)
    if np.min(rho_ref) <= 0.0:
        raise EmbeddingError("center is not strictly inside the surface")
    interp = ref.interpolator(np.log(rho_ref))
    z = wulff.positions
    nu = wulff.nu

    def gap(t):
        y = z + t[..., None] * nu
        r = np.linalg.norm(y, axis=-1)
        return r - np.exp(interp.at_directions(y / r[..., None]))

    lo = np.full(wulff.grid.shape, -0.99 * wulff.tubular_radius)
    hi = np.full(
        wulff.grid.shape, 1.01 * (float(np.max(rho_ref)) + wulff.diameter)
    )
    try:
        u = _bisect_ray(gap, lo, hi, tol=1e-10 * wulff.diameter)
    except EmbeddingError as exc:
        raise EmbeddingError(
            "surface is not a normal graph over the reference shape "
            f"about center {center}: {exc}"
        ) from None

    # polish with exact chart ray casts; removes the interpolation error
    tol = 1e-12 * wulff.diameter
    converged = False
    for _ in range(16):
        y = z + u[..., None] * nu
        r = np.linalg.norm(y, axis=-1)
        dirs = y / r[..., None]
        rho = surface.chart.ray_radius(center, dirs)
        cosang = np.einsum("...d,...d->...", dirs, nu)
        if np.min(cosang) < 0.05:
            raise EmbeddingError(
                "graph rays become tangent to the reference normals"
            )
        du = (rho - r) / cosang
        u = u + du
        if np.max(np.abs(du)) < tol:
            converged = True
            break
    if not converged:
        raise EmbeddingError("graph height refinement stalled")

    chart = WulffGraphChart(wulff, u, center=center)
    return ReparamResult(height=u, surface=build_surface(chart), center=center)


def centering_map(surface, wulff, center) -> np.ndarray:
    """Translation coefficients of the graph height about a trial center."""
    rep = reparametrize_over_wulff(surface, wulff, center)
    return KernelBasis(wulff).coefficients(rep.height)


@dataclass
class CenterResult:
    """Outcome of the damped fixed-point search for the graph center."""

    center: np.ndarray
    height: np.ndarray
    coefficients: np.ndarray
    residual: float
    iterations: int
    converged: bool


def find_center(
    surface: DiscreteHypersurface,
    wulff: WulffShape,
    start=None,
    damping: float = 0.8,
    tol: float = 1e-9,
    max_iter: int = 80,
) -> CenterResult:
    """Center about which the graph height has no translation component.

    Iterates c <- c + damping * v(c), where v(c) are the translation
    coefficients of the height field about c; at the fixed point the height
    is orthogonal to all translation modes.  Seeded with the difference of
    the surface and shape area centroids unless ``start`` is given.
    """
    if not 0.0 < damping <= 1.0:
        raise ConfigError("damping must lie in (0, 1]")
    if start is None:
        wc = (
            np.tensordot(wulff.dV, wulff.positions, axes=wulff.n)
            / wulff.perimeter
        )
        center = surface.centroid - wc
    else:
        center = np.asarray(start, dtype=float).copy()
    kb = KernelBasis(wulff)
    coeffs = np.zeros(wulff.grid.dim)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        rep = reparametrize_over_wulff(surface, wulff, center)
        coeffs = kb.coefficients(rep.height)
        center = center + damping * coeffs
        if np.linalg.norm(coeffs) <= tol:
            converged = True
            break
    rep = reparametrize_over_wulff(surface, wulff, center)
    return CenterResult(
        center=center,
        height=rep.height,
        coefficients=coeffs,
        residual=float(np.linalg.norm(coeffs)),
        iterations=iterations,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# perturbation expansions along normal graphs
# ---------------------------------------------------------------------------

# the remaining checks (second_form, shape_operator, mean_curvature) are
# curvature-level and use the driver that includes the hessian
_FIRST_ORDER_CHECKS = ("metric", "inverse_metric", "determinant", "normal")

EXPANSION_CHECKS = (
    "metric",
    "inverse_metric",
    "determinant",
    "normal",
    "second_form",
    "shape_operator",
    "mean_curvature",
)


def expansion_check(wulff: WulffShape, height, which: str | None = None) -> dict:
    """Quadratic-remainder ratios of geometric fields along a normal graph.

    For the graph of a height field u over the shape, each listed geometric
    quantity has a known first-order expansion in u.  This check evaluates
    the remainder after subtracting the expansion and reports, per quantity,
    the sup of its invariant pointwise norm divided by the square of the
    relevant driver (sup of |u| + |grad u|, plus |hess u| for the
    curvature-level quantities).  Bounded ratios along a family of shrinking
    heights certify the expansions.  ``which`` restricts the report to one
    named quantity (see ``EXPANSION_CHECKS``).

    The curvature-level baselines are evaluated on the zero-height graph
    through the same stencil pipeline, so discretization bias cancels in the
    differences.

    Raises
    ------
    PreconditionError
        If sup |u| > 0.3 or sup |grad u| > 2 sqrt(sup |u|): outside that
        window the graph may leave the tubular neighborhood and quadratic
        remainder ratios are not meaningful.
    """
    if which is not None and which not in EXPANSION_CHECKS:
        raise ConfigError(
            f"unknown expansion check {which!r}; choose from {EXPANSION_CHECKS}"
        )
    grid = wulff.grid
    u = _nodal(grid, height)
    du = grid.partials(u)
    grad_sq = np.einsum("...a,...b,...ab->...", du, du, wulff.omega_inv)
    grad_abs = np.sqrt(np.maximum(grad_sq, 0.0))
    sup_u = float(np.max(np.abs(u)))
    sup_grad = float(np.max(grad_abs))
    if sup_u > 0.3:
        raise PreconditionError(
            f"graph height sup {sup_u:.3f} exceeds the expansion window 0.3"
        )
    if sup_grad > 2.0 * np.sqrt(max(sup_u, 1e-300)):
        raise PreconditionError(
            "graph height slope is too large for a quadratic remainder check"
        )

    hess = covariant_hessian(wulff, u)
    hess_sq = np.einsum(
        "...ab,...cd,...ac,...bd->...",
        hess,
        hess,
        wulff.omega_inv,
        wulff.omega_inv,
    )
    hess_abs = np.sqrt(np.maximum(hess_sq, 0.0))
    driver1 = float(np.max(np.abs(u) + grad_abs))
    driver2 = float(np.max(np.abs(u) + grad_abs + hess_abs))

    surf = build_surface(WulffGraphChart(wulff, u))
    base = build_surface(WulffGraphChart(wulff, 0.0))
    an_surf = aniso_shape_operator(surf, wulff.integrand)
    an_base = aniso_shape_operator(base, wulff.integrand)
    operator = StabilityOperator(wulff)

    omega, omega_inv = wulff.omega, wulff.omega_inv
    h = wulff.h
    h_up = np.einsum("...ab,...bc,...cd->...ad", omega_inv, h, omega_inv)
    h_mix_sq = np.einsum("...ab,...bc->...ac", h, np.einsum("...ab,...bc->...ac", omega_inv, h))

    residuals = {}
    residuals["metric"] = TensorField(
        grid, surf.g - omega - 2.0 * u[..., None, None] * h, "dd"
    ).pointwise_norm(omega, omega_inv)
    residuals["inverse_metric"] = TensorField(
        grid, surf.g_inv - omega_inv + 2.0 * u[..., None, None] * h_up, "uu"
    ).pointwise_norm(omega, omega_inv)
    det_ratio = np.linalg.det(surf.g) / np.linalg.det(omega)
    trace_h = np.einsum("...aa->...", wulff.weingarten)
    residuals["determinant"] = np.abs(det_ratio - 1.0 - 2.0 * u * trace_h)
    grad_amb = np.einsum("...ad,...ab,...b->...d", wulff.tangents, omega_inv, du)
    residuals["normal"] = np.linalg.norm(
        surf.normal - wulff.nu + grad_amb, axis=-1
    )
    residuals["second_form"] = TensorField(
        grid,
        surf.h - h + hess - u[..., None, None] * h_mix_sq,
        "dd",
    ).pointwise_norm(omega, omega_inv)
    tensor_lin = operator.apply_tensor(u).data
    residuals["shape_operator"] = TensorField(
        grid,
        an_surf.S.data - an_base.S.data + tensor_lin,
        "ud",
    ).pointwise_norm(omega, omega_inv)
    # the trace of the tensor linearization models the pointwise curvature
    # trace; an area-mean comparison would leak a first-order term n*mean(u)
    residuals["mean_curvature"] = np.abs(
        an_surf.H - an_base.H + np.einsum("...aa->...", tensor_lin)
    )

    report = {}
    for name, res in residuals.items():
        if which is not None and name != which:
            continue
        driver = driver1 if name in _FIRST_ORDER_CHECKS else driver2
        sup = float(np.max(res))
        report[name] = {
            "residual_sup": sup,
            "driver_sup": driver,
            "ratio": sup / driver ** 2 if driver > 0 else 0.0,
        }
    return report


def linearization_residual(
    wulff: WulffShape, height, eps: float, p: float = 2.0
) -> dict:
    """First-order model quality for the curvature deviation of a graph.

    Builds the graph of eps * height, evaluates its traceless
    anisotropy-weighted shape operator, and compares against the traceless
    part of the numeric baseline minus eps times the tensor linearization.
    Returns the deviation norm of the graph, the norm of the linear model,
    and the remainder norm (expected quadratic in eps), all in Lp.
    """
    if not np.isfinite(eps) or eps <= 0:
        raise ConfigError("eps must be positive")
    grid = wulff.grid
    u = _nodal(grid, height)
    operator = StabilityOperator(wulff)
    Lt = operator.apply_tensor(u).data

    base = build_surface(WulffGraphChart(wulff, 0.0))
    an_base = aniso_shape_operator(base, wulff.integrand)

    surf = build_surface(WulffGraphChart(wulff, eps * u))
    an = aniso_shape_operator(surf, wulff.integrand)

    model = an_base.S.data - eps * Lt
    eye = np.eye(grid.n)
    trace = np.einsum("...aa->...", model)
    if grid.n == 1:
        mean = float(np.sum(base.dV * trace)) / base.area
        model0 = model - mean * eye
    else:
        model0 = model - (trace / grid.n)[..., None, None] * eye
    linear0 = model0 - an_base.S0.data

    remainder = TensorField(grid, an.S0.data - model0, "ud").pointwise_norm(
        surf.g, surf.g_inv
    )
    linear_norm = TensorField(grid, linear0, "ud").pointwise_norm(
        base.g, base.g_inv
    )
    return {
        "eps": float(eps),
        "deviation_norm": an.s0_lp(p),
        "linear_norm": lp_norm(base, linear_norm, p),
        "remainder_norm": lp_norm(surf, remainder, p),
    }
