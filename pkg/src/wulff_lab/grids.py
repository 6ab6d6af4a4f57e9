"""Quadrature grids on the unit circle and unit sphere with tangential calculus.

Scalar fields live on a grid as arrays whose leading axes equal ``grid.shape``;
trailing axes (ambient components, tensor indices) are carried along unchanged.
Chart-derivative indices are appended as the *last* axis of the result.

Two discretizations are provided:

* ``CircleGrid`` -- uniform nodes on S^1, trapezoidal quadrature (exact for
  trigonometric polynomials) and FFT-based spectral differentiation.
* ``SphereGrid`` -- Gauss--Legendre nodes in cos(colatitude) crossed with a
  uniform longitude grid.  Longitude derivatives use 4th-order centered
  differences; colatitude derivatives use 7-point stencils on the slightly
  non-uniform node set, generated by Fornberg's algorithm, with ghost rows
  continued across the poles (value pulled from the antipodal longitude,
  sign fixed by the number of colatitude indices of the differentiated
  component).  The advertised order of the combined scheme is 4.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.interpolate import RectBivariateSpline

from .errors import GridResolutionError

TWO_PI = 2.0 * np.pi


def fd_weights(x0: float, xs: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at ``x0``.

    Fornberg's recursion on the arbitrary node set ``xs``.  Returns the
    weight vector ``w`` with ``f^(m)(x0) ~= sum_k w[k] f(xs[k])``.
    """
    xs = np.asarray(xs, dtype=float)
    npts = xs.size
    if npts <= m:
        raise ValueError("need more than m nodes for the m-th derivative")
    C = np.zeros((npts, m + 1))
    C[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[j, k] = (c4 * C[j, k] - k * C[j, k - 1]) / c3
            C[j, 0] = c4 * C[j, 0] / c3
        c1 = c2
    return C[:, m]


def circular_harmonic(points: np.ndarray, k: int, axes=(0, 1), coeff=1.0 + 0.0j) -> np.ndarray:
    """Re(coeff * (x_a + i x_b)^k) evaluated at unit vectors ``points``.

    Restricted to the sphere this is a degree-k spherical harmonic (for the
    circle it is cos/sin of k theta, depending on ``coeff``), with sup norm
    |coeff|.  Used as the library's stock perturbation mode family.
    """
    z = points[..., axes[0]] + 1j * points[..., axes[1]]
    return np.real(coeff * z ** k)


def tangent_frame(nu: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the tangent space at unit vectors.

    Returns an array of shape ``nu.shape[:-1] + (d-1, d)``.  The first leg is
    the normalized projection of the coordinate axis least aligned with nu;
    for d == 3 the second leg completes a right-handed triple.
    """
    nu = np.asarray(nu, dtype=float)
    d = nu.shape[-1]
    if d == 2:
        u1 = np.stack([-nu[..., 1], nu[..., 0]], axis=-1)
        return u1[..., None, :]
    ref_idx = np.argmin(np.abs(nu), axis=-1)
    ref = np.zeros_like(nu)
    np.put_along_axis(ref, ref_idx[..., None], 1.0, axis=-1)
    u1 = ref - np.sum(ref * nu, axis=-1, keepdims=True) * nu
    u1 = u1 / np.linalg.norm(u1, axis=-1, keepdims=True)
    u2 = np.cross(nu, u1)
    return np.stack([u1, u2], axis=-2)


class _TrigInterp:
    """Trigonometric interpolant of a periodic nodal field on the circle.

    Exact for band-limited data; derivatives come from multiplying the
    Fourier coefficients.
    """

    def __init__(self, theta_nodes: np.ndarray, values: np.ndarray):
        nn = theta_nodes.size
        self._N = nn
        self._coef = np.fft.rfft(values) / nn
        self._k = np.arange(self._coef.size)

    def ev(self, theta, dtheta: int = 0):
        theta = np.asarray(theta, dtype=float)
        coef = self._coef * (1j * self._k) ** dtheta
        if dtheta % 2 == 1 and self._N % 2 == 0:
            coef = coef.copy()
            coef[-1] = 0.0  # Nyquist mode carries no odd derivative
        phase = np.exp(1j * np.multiply.outer(theta, self._k))
        out = np.real(phase @ coef) * 2.0
        out -= np.real(coef[0] * np.ones_like(theta))
        if self._N % 2 == 0:
            out -= np.real(phase[..., -1] * coef[-1])
        return out

    def at_directions(self, dirs: np.ndarray, dtheta: int = 0):
        theta = np.mod(np.arctan2(dirs[..., 1], dirs[..., 0]), TWO_PI)
        return self.ev(theta, dtheta)


class CircleGrid:
    """Uniform grid on S^1 with spectral differentiation.

    Attributes
    ----------
    nodes : (N, 2) unit vectors, counterclockwise starting at (1, 0).
    weights : (N,) quadrature weights for the arclength measure; sums to 2*pi.
    """

    n = 1

    def __init__(self, nnodes: int):
        if nnodes < 8:
            raise GridResolutionError("circle grid needs at least 8 nodes")
        self.nnodes = int(nnodes)
        self.shape = (self.nnodes,)
        self.theta = TWO_PI * np.arange(self.nnodes) / self.nnodes
        self.nodes = np.stack([np.cos(self.theta), np.sin(self.theta)], axis=-1)
        self.weights = np.full(self.shape, TWO_PI / self.nnodes)
        self.area = TWO_PI
        self.sigma_det = np.ones(self.shape)
        self._k = np.arange(self.nnodes // 2 + 1)

    @property
    def dim(self) -> int:
        return 2

    def describe(self) -> str:
        return f"circle[{self.nnodes}]"

    def refined(self, factor: float) -> "CircleGrid":
        return CircleGrid(int(round(self.nnodes * factor)))

    # -- differentiation -------------------------------------------------
    def _fourier_derivative(self, f: np.ndarray, order: int) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        spec = np.fft.rfft(f, axis=0)
        mult = (1j * self._k) ** order
        if order % 2 == 1 and self.nnodes % 2 == 0:
            mult = mult.copy()
            mult[-1] = 0.0
        mult = mult.reshape((-1,) + (1,) * (f.ndim - 1))
        return np.fft.irfft(spec * mult, n=self.nnodes, axis=0)

    def partials(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        """d/dtheta, appended as a trailing axis of length 1.

        ``parity`` is accepted for interface compatibility with the sphere
        grid; the circle chart has no pole closure so it is ignored.
        """
        return self._fourier_derivative(f, 1)[..., None]

    def second_partials(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        return self._fourier_derivative(f, 2)[..., None, None]

    # -- geometry of the round metric ------------------------------------
    def frame(self) -> np.ndarray:
        e = np.stack([-np.sin(self.theta), np.cos(self.theta)], axis=-1)
        return e[..., None, :]

    def node_partials(self) -> np.ndarray:
        """Chart partials of the node field (d nu / d theta)."""
        return self.frame()

    def sigma_chart(self) -> np.ndarray:
        return np.ones(self.shape + (1, 1))

    def sigma_inv(self) -> np.ndarray:
        return np.ones(self.shape + (1, 1))

    def sigma_christoffels(self) -> np.ndarray:
        return np.zeros(self.shape + (1, 1, 1))

    def quad(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    def tangential_gradient(self, f: np.ndarray) -> np.ndarray:
        return self._fourier_derivative(f, 1)[..., None] * self.frame()[..., 0, :]

    def sphere_hessian_chart(self, f: np.ndarray) -> np.ndarray:
        return self.second_partials(f)

    def sphere_hessian_frame(self, f: np.ndarray) -> np.ndarray:
        return self.second_partials(f)

    # -- interpolation and chart evaluation ------------------------------
    def interpolator(self, values: np.ndarray) -> _TrigInterp:
        return _TrigInterp(self.theta, np.asarray(values, dtype=float))

    def chart_points(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def chart_jacobian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)[..., None, :]

    def node_chart_coords(self):
        return (self.theta.copy(),)


class _SphereInterp:
    """Quintic spline interpolant of a scalar field on the sphere grid.

    The nodal data is continued across the poles (antipodal longitude) and
    periodically in longitude before fitting, so evaluation and the first
    few derivatives stay smooth on the whole sphere and slightly beyond the
    chart seams.
    """

    def __init__(self, grid: "SphereGrid", values: np.ndarray, ghosts: int = 6):
        th, ph = grid.theta, grid.phi
        g = ghosts
        shift = grid.nlon // 2
        vals = np.asarray(values, dtype=float)
        top = np.roll(vals[g - 1::-1], shift, axis=1)
        bot = np.roll(vals[:-g - 1:-1], shift, axis=1)
        v_ext = np.concatenate([top, vals, bot], axis=0)
        th_ext = np.concatenate([-th[g - 1::-1], th, TWO_PI - th[:-g - 1:-1]])
        v_ext = np.concatenate([v_ext[:, -g:], v_ext, v_ext[:, :g]], axis=1)
        ph_ext = np.concatenate([ph[-g:] - TWO_PI, ph, ph[:g] + TWO_PI])
        self._spl = RectBivariateSpline(th_ext, ph_ext, v_ext, kx=5, ky=5, s=0)

    def ev(self, theta, phi, dtheta: int = 0, dphi: int = 0):
        theta = np.asarray(theta, dtype=float)
        phi = np.mod(np.asarray(phi, dtype=float), TWO_PI)
        return self._spl.ev(theta, phi, dx=dtheta, dy=dphi)

    def at_directions(self, dirs: np.ndarray, dtheta: int = 0, dphi: int = 0):
        z = np.clip(dirs[..., 2], -1.0, 1.0)
        theta = np.arccos(z)
        phi = np.mod(np.arctan2(dirs[..., 1], dirs[..., 0]), TWO_PI)
        return self.ev(theta, phi, dtheta, dphi)


class SphereGrid:
    """Gauss--Legendre x uniform-longitude grid on S^2.

    Parameters
    ----------
    nlat : number of Gauss--Legendre colatitude rings (>= 8).
    nlon : number of uniform longitudes (even, >= 16; defaults to 2*nlat).

    Notes
    -----
    Quadrature weights come from the Gauss--Legendre rule in cos(theta), so
    ``weights.sum() == 4*pi`` to machine precision and smooth integrands are
    integrated with near-spectral accuracy.  Colatitude stencils are 7-point
    Fornberg weights on the non-uniform ring positions; the first/last rings
    borrow ghost rings reflected across the pole.  A component with an odd
    number of colatitude indices flips sign across the pole, which is the
    ``parity`` argument of the differentiation methods.
    """

    n = 2
    _G = 3  # ghost rings per pole; stencil width 2*_G + 1

    def __init__(self, nlat: int, nlon: int | None = None):
        if nlon is None:
            nlon = 2 * nlat
        if nlat < 8 or nlon < 16:
            raise GridResolutionError("sphere grid needs nlat >= 8, nlon >= 16")
        if nlon % 2:
            raise GridResolutionError("nlon must be even (pole closure shifts by half a turn)")
        self.nlat, self.nlon = int(nlat), int(nlon)
        self.shape = (self.nlat, self.nlon)

        x, wl = np.polynomial.legendre.leggauss(self.nlat)
        self.theta = np.arccos(x[::-1])          # ascending colatitude in (0, pi)
        self._wlat = wl[::-1]
        self.phi = TWO_PI * np.arange(self.nlon) / self.nlon
        self._hphi = TWO_PI / self.nlon

        st, ct = np.sin(self.theta), np.cos(self.theta)
        sp, cp = np.sin(self.phi), np.cos(self.phi)
        self._st, self._ct = st, ct
        self.nodes = np.stack(
            [np.outer(st, cp), np.outer(st, sp), np.outer(ct, np.ones(self.nlon))],
            axis=-1,
        )
        self.weights = np.broadcast_to(
            self._wlat[:, None] * (TWO_PI / self.nlon), self.shape
        ).copy()
        self.area = 4.0 * np.pi
        self.sigma_det = np.broadcast_to((st ** 2)[:, None], self.shape).copy()

        g = self._G
        th_ext = np.concatenate(
            [-self.theta[g - 1::-1], self.theta, TWO_PI - self.theta[:-g - 1:-1]]
        )
        self._th_ext = th_ext
        width = 2 * g + 1
        self._W1 = np.empty((self.nlat, width))
        self._W2 = np.empty((self.nlat, width))
        for i in range(self.nlat):
            window = th_ext[i:i + width]
            self._W1[i] = fd_weights(self.theta[i], window, 1)
            self._W2[i] = fd_weights(self.theta[i], window, 2)
        self._shift = self.nlon // 2

    @property
    def dim(self) -> int:
        return 3

    def describe(self) -> str:
        return f"sphere[{self.nlat}x{self.nlon}]"

    def refined(self, factor: float) -> "SphereGrid":
        nlat = int(round(self.nlat * factor))
        nlon = int(round(self.nlon * factor))
        return SphereGrid(nlat, nlon + (nlon % 2))

    # -- differentiation -------------------------------------------------
    def _extend(self, f: np.ndarray, parity: int) -> np.ndarray:
        g = self._G
        top = parity * np.roll(f[g - 1::-1], self._shift, axis=1)
        bot = parity * np.roll(f[:-g - 1:-1], self._shift, axis=1)
        return np.concatenate([top, f, bot], axis=0)

    def _dtheta(self, f: np.ndarray, order: int, parity: int) -> np.ndarray:
        ext = self._extend(np.asarray(f, dtype=float), parity)
        win = sliding_window_view(ext, 2 * self._G + 1, axis=0)
        W = self._W1 if order == 1 else self._W2
        return np.einsum("ik,i...k->i...", W, win)

    def _dphi(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return (
            8.0 * (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1))
            - (np.roll(f, -2, axis=1) - np.roll(f, 2, axis=1))
        ) / (12.0 * self._hphi)

    def _dphi2(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return (
            -30.0 * f
            + 16.0 * (np.roll(f, -1, axis=1) + np.roll(f, 1, axis=1))
            - (np.roll(f, -2, axis=1) + np.roll(f, 2, axis=1))
        ) / (12.0 * self._hphi ** 2)

    def partials(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        """Chart partials (d/dtheta, d/dphi) stacked on a new last axis."""
        return np.stack([self._dtheta(f, 1, parity), self._dphi(f)], axis=-1)

    def second_partials(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        """Symmetric chart second-derivative block, shape (..., 2, 2)."""
        ftt = self._dtheta(f, 2, parity)
        ftp = self._dtheta(self._dphi(f), 1, parity)
        fpp = self._dphi2(f)
        row0 = np.stack([ftt, ftp], axis=-1)
        row1 = np.stack([ftp, fpp], axis=-1)
        return np.stack([row0, row1], axis=-2)

    # -- geometry of the round metric ------------------------------------
    def frame(self) -> np.ndarray:
        st, ct = self._st[:, None], self._ct[:, None]
        sp, cp = np.sin(self.phi)[None, :], np.cos(self.phi)[None, :]
        e_th = np.stack(
            [ct * cp, ct * sp, -st * np.ones_like(sp)], axis=-1
        )
        e_ph = np.stack(
            [-sp * np.ones_like(st), cp * np.ones_like(st), np.zeros(self.shape)],
            axis=-1,
        )
        return np.stack([e_th, e_ph], axis=-2)

    def node_partials(self) -> np.ndarray:
        """Chart partials of the node field: [d nu/d theta, d nu/d phi]."""
        fr = self.frame()
        out = fr.copy()
        out[..., 1, :] *= self._st[:, None, None]
        return out

    def sigma_chart(self) -> np.ndarray:
        sig = np.zeros(self.shape + (2, 2))
        sig[..., 0, 0] = 1.0
        sig[..., 1, 1] = self.sigma_det
        return sig

    def sigma_inv(self) -> np.ndarray:
        inv = np.zeros(self.shape + (2, 2))
        inv[..., 0, 0] = 1.0
        inv[..., 1, 1] = 1.0 / self.sigma_det
        return inv

    def sigma_christoffels(self) -> np.ndarray:
        """Gamma^c_ab of the round metric, index order [c, a, b]."""
        gam = np.zeros(self.shape + (2, 2, 2))
        st, ct = self._st[:, None], self._ct[:, None]
        gam[..., 0, 1, 1] = -st * ct
        cot = ct / st
        gam[..., 1, 0, 1] = cot
        gam[..., 1, 1, 0] = cot
        return gam

    def quad(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    def tangential_gradient(self, f: np.ndarray) -> np.ndarray:
        pd = self.partials(f)
        fr = self.frame()
        st = self._st[:, None]
        return pd[..., 0, None] * fr[..., 0, :] + (pd[..., 1] / st)[..., None] * fr[..., 1, :]

    def sphere_hessian_chart(self, f: np.ndarray) -> np.ndarray:
        """Covariant Hessian of f on the round sphere, chart components."""
        H = self.second_partials(f)
        pd = self.partials(f)
        st, ct = self._st[:, None], self._ct[:, None]
        cot = ct / st
        out = H.copy()
        out[..., 0, 1] -= cot * pd[..., 1]
        out[..., 1, 0] = out[..., 0, 1]
        out[..., 1, 1] += st * ct * pd[..., 0]
        return out

    def sphere_hessian_frame(self, f: np.ndarray) -> np.ndarray:
        """Covariant Hessian in the orthonormal frame [e_theta, e_phi]."""
        H = self.sphere_hessian_chart(f)
        st = self._st[:, None]
        out = H.copy()
        out[..., 0, 1] /= st
        out[..., 1, 0] /= st
        out[..., 1, 1] /= st ** 2
        return out

    # -- interpolation and chart evaluation ------------------------------
    def interpolator(self, values: np.ndarray) -> _SphereInterp:
        return _SphereInterp(self, values)

    def chart_points(self, theta, phi) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        st, ct = np.sin(theta), np.cos(theta)
        return np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)

    def chart_jacobian(self, theta, phi) -> np.ndarray:
        """[d nu/d theta, d nu/d phi] at arbitrary chart coords."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        d_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        d_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        return np.stack([d_th, d_ph], axis=-2)

    def node_chart_coords(self):
        th = np.broadcast_to(self.theta[:, None], self.shape).copy()
        ph = np.broadcast_to(self.phi[None, :], self.shape).copy()
        return th, ph


def make_grid(n: int, resolution: int, nlon: int | None = None):
    """Build the standard grid for an n-dimensional hypersurface domain."""
    if n == 1:
        return CircleGrid(resolution)
    if n == 2:
        return SphereGrid(resolution, nlon)
    raise GridResolutionError(f"only n in {{1, 2}} is supported, got n={n}")


def theta_parity(index_tuple) -> int:
    """Sign a tensor-component field picks up across the pole.

    For the sphere chart the pole continuation (theta -> -theta,
    phi -> phi + pi) is affine, so a component transforms with
    (-1)^(number of colatitude indices).
    """
    zeros = sum(1 for idx in index_tuple if idx == 0)
    return -1 if zeros % 2 else 1


def sqrt_spd(mats: np.ndarray) -> np.ndarray:
    """Principal square root of batched SPD matrices (size <= 2).

    The 2x2 case uses the closed form sqrt(M) = (M + sqrt(det) I) /
    sqrt(tr + 2 sqrt(det)).
    """
    if mats.shape[-1] == 1:
        return np.sqrt(mats)
    det = np.linalg.det(mats)
    tr = mats[..., 0, 0] + mats[..., 1, 1]
    s = np.sqrt(det)
    t = np.sqrt(tr + 2.0 * s)
    eye = np.eye(2)
    return (mats + s[..., None, None] * eye) / t[..., None, None]


def inv_sqrt_spd(mats: np.ndarray) -> np.ndarray:
    """Inverse principal square root of batched SPD matrices (size <= 2)."""
    if mats.shape[-1] == 1:
        return 1.0 / np.sqrt(mats)
    return np.linalg.inv(sqrt_spd(mats))


def metric_christoffels(grid, metric: np.ndarray) -> np.ndarray:
    """Gamma^c_ab of a chart metric field, by the grid's stencils.

    Component parities across the pole follow from the index count, so the
    ghost closure stays consistent for any smooth surface metric.
    """
    n = grid.n
    dmet = np.empty(metric.shape + (n,))
    for a in range(n):
        for b in range(a, n):
            par = theta_parity((a, b))
            dmet[..., a, b, :] = grid.partials(metric[..., a, b], parity=par)
            if b != a:
                dmet[..., b, a, :] = dmet[..., a, b, :]
    inv = np.linalg.inv(metric)
    # Gamma^c_ab = 1/2 g^{cd} (d_a g_db + d_b g_da - d_d g_ab)
    gam = np.zeros(metric.shape[:-2] + (n, n, n))
    for c in range(n):
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for d in range(n):
                    acc = acc + inv[..., c, d] * (
                        dmet[..., d, b, a] + dmet[..., d, a, b] - dmet[..., a, b, d]
                    )
                gam[..., c, a, b] = 0.5 * acc
    return gam
