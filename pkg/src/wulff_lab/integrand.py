"""Elliptic surface-energy integrands, their duals, and discrete Wulff shapes.

An integrand is a positive function F on the unit sphere of R^d (d = n+1,
n in {1, 2}).  Everything the library needs is derived from the
1-homogeneous extension

    Phi(x) = |x| F(x/|x|),

through its gradient and Hessian:

* the boundary point of the Wulff shape with outward normal nu is
  xi(nu) = grad Phi(nu)  (so <xi(nu), nu> = Phi(nu) = F(nu) by homogeneity);
* the anisotropy tensor A(nu) = restriction of hess Phi(nu) to the tangent
  space nu-perp (hess Phi(nu) annihilates nu, again by homogeneity), which
  equals the intrinsic D^2 F + F sigma there;
* the dual gauge F#(x) = sup_nu <x, nu>/F(nu), whose unit level set is the
  Wulff shape boundary, evaluated by a coarse scan plus a Riemannian Newton
  ascent (the maximizer is unique for elliptic F).

Subclasses implement ``phi_grad_hess`` (and the cheap ``phi``); the base
class supplies every derived quantity.  Built-in families: constant-one,
quadratic-form, additive low-mode perturbations of 1, and tabulated nodal
samples with finite-difference derivatives.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    ConfigError,
    ConvexityError,
    GridResolutionError,
    NonEllipticError,
    PreconditionError,
)
from .grids import (
    CircleGrid,
    SphereGrid,
    inv_sqrt_spd,
    make_grid,
    metric_christoffels,
    tangent_frame,
)


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise PreconditionError(f"expected points in R^{dim}, got shape {x.shape}")
    lead = x.shape[:-1]
    return x.reshape(-1, dim), lead


class EllipticIntegrand:
    """Base class; see module docstring for the derivation contract.

    Parameters
    ----------
    dim : ambient dimension d = n+1, in {2, 3}.
    """

    family = "abstract"

    def __init__(self, dim: int):
        if dim not in (2, 3):
            raise ConfigError(f"ambient dimension must be 2 or 3, got {dim}")
        self.dim = int(dim)
        self.n = self.dim - 1
        self._scan_nodes = None
        self._scan_vals = None

    # -- subclass contract -------------------------------------------------
    def phi(self, x: np.ndarray) -> np.ndarray:
        """Phi(x) for batched nonzero x, shape (...,)."""
        raise NotImplementedError

    def phi_grad_hess(self, x: np.ndarray):
        """(Phi, grad Phi, hess Phi) at batched nonzero x."""
        raise NotImplementedError

    # -- derived pointwise quantities --------------------------------------
    def value(self, nu: np.ndarray) -> np.ndarray:
        """F(nu) for unit vectors nu."""
        return self.phi(nu)

    def xi(self, nu: np.ndarray) -> np.ndarray:
        """Boundary point of the Wulff shape with outward normal nu."""
        return self.phi_grad_hess(nu)[1]

    def anisotropy_ambient(self, nu: np.ndarray) -> np.ndarray:
        """A(nu) as a d x d matrix annihilating nu (tangential elsewhere)."""
        return self.phi_grad_hess(nu)[2]

    def anisotropy_frame(self, nu: np.ndarray, frame: np.ndarray | None = None):
        """A(nu) in an orthonormal tangent frame, shape (..., n, n).

        Raises if nu is not unit length: the tensor lives on the sphere.
        """
        nu = np.asarray(nu, dtype=float)
        rr = np.linalg.norm(nu, axis=-1)
        if np.max(np.abs(rr - 1.0)) > 1e-9:
            raise PreconditionError("anisotropy tensor requires unit-length directions")
        if frame is None:
            frame = tangent_frame(nu)
        amb = self.anisotropy_ambient(nu)
        return np.einsum("...ad,...de,...be->...ab", frame, amb, frame)

    def ellipticity_margin(self, grid=None, resolution: int | None = None) -> float:
        """Min over sample directions of the smallest eigenvalue of A.

        Positive iff F is elliptic on the sample set; a negative value is a
        valid answer signaling non-ellipticity.
        """
        if grid is None:
            grid = make_grid(self.n, resolution or (96 if self.n == 1 else 32))
        A = self.anisotropy_frame(grid.nodes)
        return float(np.min(np.linalg.eigvalsh(A)))

    def check_elliptic(self, resolution: int | None = None) -> float:
        """Certify ellipticity on a sample grid and its 2x refinement.

        Returns the (coarse-grid) margin; raises NonEllipticError if either
        scan produces a non-positive margin.
        """
        res = resolution or (96 if self.n == 1 else 24)
        margin = self.ellipticity_margin(resolution=res)
        fine = self.ellipticity_margin(resolution=2 * res)
        if margin <= 0.0 or fine <= 0.0:
            raise NonEllipticError(
                f"integrand {self.family}: anisotropy margin {min(margin, fine):.3e} <= 0"
            )
        return margin

    def positivity_margin(self, resolution: int | None = None) -> float:
        res = resolution or (128 if self.n == 1 else 32)
        grid = make_grid(self.n, res)
        return float(np.min(self.value(grid.nodes)))

    # -- dual gauge ---------------------------------------------------------
    def _scan_directions(self):
        if self._scan_nodes is None:
            grid = CircleGrid(512) if self.n == 1 else SphereGrid(24)
            nodes = grid.nodes.reshape(-1, self.dim)
            self._scan_nodes = nodes
            self._scan_vals = self.value(nodes)
        return self._scan_nodes, self._scan_vals

    def gauge_with_normal(self, x, warm_nu=None, tol: float = 1e-10, max_iter: int = 60):
        """Dual gauge F#(x) and the maximizing direction nu*(x).

        F#(x) = sup over unit nu of <x, nu>/F(nu); the maximizer is the
        outward normal of the Wulff boundary point x/F#(x).  Solved by a
        coarse scan (skipped when ``warm_nu`` seeds are supplied) followed
        by damped Newton ascent on the sphere; terminates when the ascent
        step drops below ``tol``.
        """
        X, lead = _as_batch(x, self.dim)
        r = np.linalg.norm(X, axis=-1)
        zero = r < 1e-300
        Xh = X / np.where(zero, 1.0, r)[:, None]
        Xh[zero] = 0.0
        Xh[zero, 0] = 1.0

        if warm_nu is not None:
            nu, _ = _as_batch(warm_nu, self.dim)
            nu = nu / np.linalg.norm(nu, axis=-1, keepdims=True)
            nu = nu.copy()
        else:
            nodes, vals = self._scan_directions()
            nu = nodes[np.argmax((Xh @ nodes.T) / vals[None, :], axis=1)].copy()

        m, nt = Xh.shape[0], self.n
        eye = np.eye(nt)
        for _ in range(max_iter):
            F, gPhi, hPhi = self.phi_grad_hess(nu)
            U = tangent_frame(nu)
            G = np.sum(Xh * nu, axis=-1)
            dG = np.einsum("mad,md->ma", U, Xh)
            dF = np.einsum("mad,md->ma", U, gPhi)
            grad = dG / F[:, None] - G[:, None] * dF / F[:, None] ** 2
            Hfr = np.einsum("mad,mde,mbe->mab", U, hPhi, U)
            H = (
                -(dG[:, :, None] * dF[:, None, :] + dG[:, None, :] * dF[:, :, None])
                / F[:, None, None] ** 2
                - G[:, None, None] * Hfr / F[:, None, None] ** 2
                + 2.0 * G[:, None, None] * dF[:, :, None] * dF[:, None, :]
                / F[:, None, None] ** 3
            )
            # keep the Newton matrix negative definite (q has a strict max)
            wmax = np.linalg.eigvalsh(H)[:, -1]
            scale = np.maximum(np.abs(H).reshape(m, -1).max(axis=1), 1e-12)
            shift = np.maximum(wmax + 1e-8 * scale, 0.0)
            H = H - shift[:, None, None] * eye
            t = -np.linalg.solve(H, grad[..., None])[..., 0]

            q0 = G / F
            step = np.ones(m)
            cand = nu
            for _bt in range(30):
                cand = nu + np.einsum("ma,mad->md", t * step[:, None], U)
                cand = cand / np.linalg.norm(cand, axis=-1, keepdims=True)
                q1 = np.sum(Xh * cand, axis=-1) / self.phi(cand)
                bad = q1 < q0 - 1e-15
                if not bad.any():
                    break
                step[bad] *= 0.5
            nu = cand
            if np.max(np.linalg.norm(t * step[:, None], axis=-1)) < tol:
                break
        else:
            raise ConvexityError("gauge ascent did not converge; integrand may be non-elliptic")

        vals = np.sum(Xh * nu, axis=-1) / self.phi(nu) * r
        vals[zero] = 0.0
        return vals.reshape(lead), nu.reshape(lead + (self.dim,))

    def gauge(self, x, warm_nu=None) -> np.ndarray:
        """Dual gauge F#(x); positively 1-homogeneous, zero only at 0."""
        return self.gauge_with_normal(x, warm_nu=warm_nu)[0]

    def gauge_gradient(self, x, warm_nu=None) -> np.ndarray:
        """grad F#(x) = nu*(x)/F(nu*(x)) (envelope differentiation)."""
        _, nu = self.gauge_with_normal(x, warm_nu=warm_nu)
        return nu / self.value(nu)[..., None]

    def support_radius(self, omega) -> np.ndarray:
        """Radial function of the Wulff body: r(omega) = 1/F#(omega)."""
        return 1.0 / self.gauge(omega)

    # -- serialization -------------------------------------------------------
    def spec(self) -> dict:
        raise NotImplementedError


def gauge_gradient_residual(F: EllipticIntegrand, nu, step: float = 1e-4) -> float:
    """Diagnostic for the gauge differential at Wulff boundary points.

    The gauge satisfies dF#|_{xi(nu)}[c] = <nu, c>/F(nu): the gradient points
    along the outward normal with magnitude 1/F(nu).  Returns the maximum
    over canonical directions c of |F(nu) dF#[c] - <nu, c>|, with dF# from
    Richardson-extrapolated centered differences at the given step.
    """
    nu = np.atleast_2d(np.asarray(nu, dtype=float))
    z = F.xi(nu)
    fval = F.value(nu)
    worst = 0.0
    for j in range(F.dim):
        c = np.zeros(F.dim)
        c[j] = 1.0
        ds = []
        for h in (step, 0.5 * step):
            ds.append((F.gauge(z + h * c) - F.gauge(z - h * c)) / (2.0 * h))
        d = (4.0 * ds[1] - ds[0]) / 3.0
        worst = max(worst, float(np.max(np.abs(fval * d - nu[:, j]))))
    return worst


class ConstantOne(EllipticIntegrand):
    """F = 1: the isotropic area integrand; the Wulff shape is the unit sphere."""

    family = "constant_one"

    def phi(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def phi_grad_hess(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        w = x / r[..., None]
        eye = np.broadcast_to(np.eye(self.dim), x.shape + (self.dim,))
        hess = (eye - w[..., :, None] * w[..., None, :]) / r[..., None, None]
        return r, w, hess

    def spec(self):
        return {"family": self.family, "dim": self.dim}


class QuadraticForm(EllipticIntegrand):
    """F(nu) = sqrt(<M nu, nu>) for symmetric positive definite M.

    The Wulff shape is the ellipsoid <M^{-1} x, x> = 1 and the dual gauge is
    sqrt(<M^{-1} x, x>) (used as an exact oracle in tests).
    """

    family = "quadratic_form"

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigError("quadratic form needs a square matrix")
        if np.max(np.abs(M - M.T)) > 1e-12 * np.max(np.abs(M)):
            raise ConfigError("quadratic form matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(M)) <= 0:
            raise NonEllipticError("quadratic form matrix must be positive definite")
        super().__init__(M.shape[0])
        self.M = 0.5 * (M + M.T)
        self.Minv = np.linalg.inv(self.M)

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.M, x))

    def phi_grad_hess(self, x):
        x = np.asarray(x, dtype=float)
        Mx = x @ self.M
        p = np.sqrt(np.einsum("...i,...i->...", x, Mx))
        grad = Mx / p[..., None]
        hess = self.M / p[..., None, None] - Mx[..., :, None] * Mx[..., None, :] / p[
            ..., None, None
        ] ** 3
        return p, grad, hess

    def gauge_closed_form(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.Minv, x))

    def spec(self):
        return {"family": self.family, "M": self.M.tolist()}


class ModePerturbation(EllipticIntegrand):
    """F = 1 + eps * Y_k with Y_k a fixed degree-k harmonic of sup norm |coeff|.

    Y_k(nu) = Re(coeff (nu_a + i nu_b)^k) restricted to the sphere; its solid
    extension H(x) = Re(coeff (x_a + i x_b)^k) is harmonic, which keeps the
    gradient and Hessian of Phi = r + eps H / r^{k-1} in closed form.
    """

    family = "mode_perturbation"

    def __init__(self, dim: int, eps: float, k: int, axes=(0, 1), coeff=1.0 + 0.0j):
        super().__init__(dim)
        if k < 1:
            raise ConfigError("mode index k must be >= 1")
        a, b = axes
        if not (0 <= a < dim and 0 <= b < dim and a != b):
            raise ConfigError(f"axes {axes} invalid for dimension {dim}")
        self.eps = float(eps)
        self.k = int(k)
        self.axes = (int(a), int(b))
        self.coeff = complex(coeff)

    def _solid(self, x):
        """H, grad H, hess H of the solid harmonic Re(coeff z^k)."""
        a, b = self.axes
        z = x[..., a] + 1j * x[..., b]
        c = self.coeff
        k = self.k
        H = np.real(c * z ** k)
        w1 = c * k * z ** (k - 1)
        grad = np.zeros_like(x)
        grad[..., a] = np.real(w1)
        grad[..., b] = -np.imag(w1)
        w2 = c * k * (k - 1) * z ** (k - 2) if k >= 2 else np.zeros_like(z)
        hess = np.zeros(x.shape + (self.dim,))
        hess[..., a, a] = np.real(w2)
        hess[..., a, b] = -np.imag(w2)
        hess[..., b, a] = -np.imag(w2)
        hess[..., b, b] = -np.real(w2)
        return H, grad, hess

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        H = self._solid(x)[0]
        return r + self.eps * H / r ** (self.k - 1)

    def phi_grad_hess(self, x):
        x = np.asarray(x, dtype=float)
        d = self.dim
        r = np.linalg.norm(x, axis=-1)
        H, gH, hH = self._solid(x)
        k = self.k
        rp = r ** (1 - k)
        rq = r ** (-k - 1)
        phi = r + self.eps * H * rp
        eye = np.broadcast_to(np.eye(d), x.shape + (d,))
        # grad(H r^{1-k}) = r^{1-k} grad H + (1-k) r^{-k-1} H x
        gG = rp[..., None] * gH + (1 - k) * (rq * H)[..., None] * x
        grad = x / r[..., None] + self.eps * gG
        xxT = x[..., :, None] * x[..., None, :]
        xgH = x[..., :, None] * gH[..., None, :] + gH[..., :, None] * x[..., None, :]
        hG = (
            rp[..., None, None] * hH
            + (1 - k) * rq[..., None, None] * xgH
            + (1 - k) * H[..., None, None]
            * (rq[..., None, None] * eye - (k + 1) * (r ** (-k - 3))[..., None, None] * xxT)
        )
        hPhi = (eye - xxT / r[..., None, None] ** 2) / r[..., None, None] + self.eps * hG
        return phi, grad, hPhi

    def spec(self):
        out = {"family": self.family, "dim": self.dim, "eps": self.eps, "k": self.k}
        if self.axes != (0, 1):
            out["axes"] = list(self.axes)
        if self.coeff != 1.0 + 0.0j:
            out["coeff"] = [self.coeff.real, self.coeff.imag]
        return out


class TabulatedIntegrand(EllipticIntegrand):
    """F given by nodal samples on a grid; derivatives by finite differences.

    F at arbitrary directions comes from the grid interpolant.  Tangential
    derivatives use 5-point centered differences along great circles through
    the evaluation point (geodesics, so the second difference is exactly the
    intrinsic covariant Hessian in that direction); off-diagonal Hessian
    entries by polarization.  The step is tied to the source grid spacing.
    """

    family = "tabulated"

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ConfigError("sample array shape must match the grid")
        if not np.all(np.isfinite(values)):
            raise ConfigError("samples must be finite")
        if np.min(values) <= 0:
            raise NonEllipticError("integrand samples must be positive")
        if grid.n == 1 and grid.nnodes < 32:
            raise GridResolutionError("tabulated integrand needs >= 32 circle nodes")
        if grid.n == 2 and grid.nlat < 16:
            raise GridResolutionError("tabulated integrand needs >= 16 latitude rings")
        super().__init__(grid.dim)
        self.grid = grid
        self.values = values
        self._interp = grid.interpolator(values)
        spacing = (2 * np.pi / grid.nnodes) if grid.n == 1 else (np.pi / grid.nlat)
        self._step = spacing

    def _F(self, w):
        return self._interp.at_directions(w)

    def _geodesic_second(self, w, z):
        """(F(gamma(s)) second difference) with gamma the great circle (w, z)."""
        h = self._step
        vals = []
        for s in (-2 * h, -h, 0.0, h, 2 * h):
            p = np.cos(s) * w + np.sin(s) * z
            vals.append(self._F(p))
        f_m2, f_m1, f_0, f_p1, f_p2 = vals
        d1 = (8.0 * (f_p1 - f_m1) - (f_p2 - f_m2)) / (12.0 * h)
        d2 = (-30.0 * f_0 + 16.0 * (f_p1 + f_m1) - (f_p2 + f_m2)) / (12.0 * h * h)
        return d1, d2

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return r * self._F(x / r[..., None])

    def phi_grad_hess(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        w = x / r[..., None]
        U = tangent_frame(w)
        F = self._F(w)
        n = self.n
        d1 = np.empty(w.shape[:-1] + (n,))
        d2 = np.empty(w.shape[:-1] + (n, n))
        for a in range(n):
            d1[..., a], d2[..., a, a] = self._geodesic_second(w, U[..., a, :])
        if n == 2:
            s = 1.0 / np.sqrt(2.0)
            _, dpp = self._geodesic_second(w, s * (U[..., 0, :] + U[..., 1, :]))
            _, dmm = self._geodesic_second(w, s * (U[..., 0, :] - U[..., 1, :]))
            d2[..., 0, 1] = d2[..., 1, 0] = 0.5 * (dpp - dmm)
        # grad Phi = F w + tangential gradient; hess Phi = (D^2F + F Id_tan)/r
        grad = F[..., None] * w + np.einsum("...a,...ad->...d", d1, U)
        Afr = d2 + F[..., None, None] * np.eye(n)
        hess = np.einsum("...ab,...ad,...be->...de", Afr, U, U) / r[..., None, None]
        return r * F, grad, hess

    def spec(self):
        return {
            "family": self.family,
            "n": self.grid.n,
            "resolution": self.grid.shape[0],
            "values": self.values.tolist(),
        }


def integrand_from_spec(spec: dict) -> EllipticIntegrand:
    """Build an integrand from its JSON-style description.

    Families: ``constant_one`` (needs dim), ``quadratic_form`` (needs M),
    ``mode_perturbation`` (needs dim, eps, k; optional axes, coeff),
    ``tabulated`` (needs n, resolution, values).  Hyphens in the family
    name are accepted.
    """
    if "family" not in spec:
        raise ConfigError("integrand spec needs a 'family' key")
    fam = str(spec["family"]).replace("-", "_")
    if fam == "constant_one":
        return ConstantOne(int(spec.get("dim", 3)))
    if fam == "quadratic_form":
        if "M" not in spec:
            raise ConfigError("quadratic_form spec needs 'M'")
        return QuadraticForm(np.asarray(spec["M"], dtype=float))
    if fam == "mode_perturbation":
        missing = {"eps", "k"} - set(spec)
        if missing:
            raise ConfigError(f"mode_perturbation spec missing {sorted(missing)}")
        coeff = spec.get("coeff", 1.0)
        if isinstance(coeff, (list, tuple)):
            coeff = complex(coeff[0], coeff[1])
        return ModePerturbation(
            int(spec.get("dim", 3)),
            float(spec["eps"]),
            int(spec["k"]),
            axes=tuple(spec.get("axes", (0, 1))),
            coeff=coeff,
        )
    if fam == "tabulated":
        grid = make_grid(int(spec["n"]), int(spec["resolution"]))
        return TabulatedIntegrand(grid, np.asarray(spec["values"], dtype=float))
    raise ConfigError(f"unknown integrand family '{spec['family']}'")


class WulffShape:
    """Discrete Wulff shape: the boundary x = grad Phi(nu) indexed by normals.

    All geometric fields are assembled from closed-form derivatives of the
    integrand (no stencils): with t_a = A(nu) d_a nu the chart tangents,

        omega_ab = <t_a, t_b>,    h_ab = <t_a, d_b nu>,

    and the Weingarten map W = omega^{-1} h satisfies A o W = Id exactly on
    the continuum shape, which is the rigidity baseline the numeric pipeline
    is tested against.

    Attributes
    ----------
    grid : parameter grid on S^n (nodes are the outward normals).
    positions : (..., d) boundary points.
    nu : outward normal field (= grid nodes).
    omega, omega_inv : metric and inverse, chart indices.
    h : second fundamental form (chart, covariant), sign convention
        h_ab = <d_a nu, d_b x> (positive definite for convex shapes).
    area_element : dV / d(grid weight), i.e. sqrt(det omega / det sigma).
    volume : enclosed volume via the divergence identity.
    perimeter : isotropic surface measure of the boundary.
    """

    def __init__(self, integrand: EllipticIntegrand, grid):
        if integrand.dim != grid.dim:
            raise ConfigError("integrand and grid dimensions disagree")
        integrand.check_elliptic()
        self.integrand = integrand
        self.grid = grid
        self.n = grid.n

        nu = grid.nodes
        F, xi, A_amb = integrand.phi_grad_hess(nu)
        self.F_values = F
        self.positions = xi
        self.nu = nu
        self.A_ambient = A_amb

        dnu = grid.node_partials()                      # (..., n, d)
        tang = np.einsum("...de,...ae->...ad", A_amb, dnu)  # t_a = A d_a nu
        self.tangents = tang
        self.omega = np.einsum("...ad,...bd->...ab", tang, tang)
        det = np.linalg.det(self.omega)
        if np.min(det) <= 0:
            raise NonEllipticError("degenerate induced metric on the Wulff shape")
        self.omega_inv = np.linalg.inv(self.omega)
        self.h = 0.5 * (
            np.einsum("...ad,...bd->...ab", tang, dnu)
            + np.einsum("...ad,...bd->...ab", dnu, tang)
        )
        self.weingarten = np.einsum("...ab,...bc->...ac", self.omega_inv, self.h)
        self.A_chart = np.einsum("...ad,...de,...be->...ab", tang, A_amb, tang)

        self.area_element = np.sqrt(det / grid.sigma_det)
        self.dV = grid.weights * self.area_element
        self.perimeter = float(np.sum(self.dV))
        self.aniso_energy = float(np.sum(self.dV * F))
        support = np.einsum("...d,...d->...", xi, nu)
        self.volume = float(np.sum(self.dV * support)) / (self.n + 1)

        kappa = np.linalg.eigvalsh(self._sym_weingarten())
        self.max_curvature = float(np.max(np.abs(kappa)))
        self.tubular_radius = 0.5 / self.max_curvature
        self.diameter = 2.0 * float(np.max(np.linalg.norm(xi, axis=-1)))

    def _sym_weingarten(self):
        si = inv_sqrt_spd(self.omega)
        return np.einsum("...ab,...bc,...cd->...ad", si, self.h, si)

    @property
    def metric(self) -> np.ndarray:
        """Chart metric (alias of ``omega``; shared name with surfaces)."""
        return self.omega

    @property
    def metric_inv(self) -> np.ndarray:
        return self.omega_inv

    def christoffels(self) -> np.ndarray:
        """Gamma^c_ab of omega, by grid stencils on the metric components."""
        if not hasattr(self, "_christ"):
            self._christ = metric_christoffels(self.grid, self.omega)
        return self._christ

    def gauge_residual(self) -> float:
        """max |F#(position) - 1| over nodes (should be ~ Newton tolerance)."""
        vals = self.integrand.gauge(
            self.positions.reshape(-1, self.grid.dim),
            warm_nu=self.nu.reshape(-1, self.grid.dim),
        )
        return float(np.max(np.abs(vals - 1.0)))

    def quad(self, f) -> float:
        """Integral of a nodal field over the shape (its own area measure)."""
        return float(np.sum(self.dV * f))


def build_wulff(integrand: EllipticIntegrand, grid) -> WulffShape:
    """Construct the discrete Wulff shape of an elliptic integrand."""
    return WulffShape(integrand, grid)
