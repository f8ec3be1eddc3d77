"""Dirichlet Green function, Robin function and harmonic background flow.

Conventions (fixed once for the whole package):

    G(x, y) = (1/2pi) ln(1/|x-y|) + H(x, y),   G = 0 on the boundary,
    h(x, y) = -H(x, y),
    g(x, z) = ln(bigR) + 2 pi h(x, z)          (harmonic in x, g = ln(bigR/|x-z|) on the boundary),
    barG(x, y) = ln(bigR/|x-y|) - g(x, y)      (equals 2 pi G identically).

Two backends: the method of images on disks (closed forms, machine accurate)
and a second-kind boundary integral equation on smooth parametric boundaries
(double-layer representation, Nystrom/trapezoid, spectrally accurate).  The
regular part H is always evaluated directly from the smooth representation,
never as a difference of two nearly equal logarithms.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import CompatibilityError, ConfigError, DomainError, SingularityError
from .geometry import Domain, _fft_derivative

TWO_PI = 2.0 * np.pi


def _as_points(x):
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    return np.atleast_2d(a), single


def _ret(val, single):
    return val[0] if single else val


# ====================================================================== #
#  images backend (disks)
# ====================================================================== #


class _ImagesBackend:
    """Closed-form H for a disk of radius rho centered at c.

    Uses the symmetric combination
        q2(x, y) = |x|^2 |y|^2 - 2 rho^2 x.y + rho^4   (coordinates relative to c)
    so that H = (1/4pi) ln q2 - (1/2pi) ln rho is exactly symmetric and stays
    stable as y -> 0 or x -> y.
    """

    def __init__(self, domain):
        self.c = domain.center
        self.rho = domain.radius

    def _q2(self, x, y):
        xt = x - self.c
        yt = y - self.c
        xx = (xt**2).sum(-1)
        yy = (yt**2).sum(-1)
        xy = (xt * yt).sum(-1)
        r2 = self.rho**2
        return xx * yy - 2.0 * r2 * xy + r2**2, xt, yt

    def H(self, x, y):
        q2, _, _ = self._q2(x, y)
        return np.log(q2) / (2.0 * TWO_PI) - np.log(self.rho) / TWO_PI

    def H_grad_x(self, x, y):
        q2, xt, yt = self._q2(x, y)
        yy = (yt**2).sum(-1)[..., None]
        dq = 2.0 * yy * xt - 2.0 * self.rho**2 * yt
        return dq / (2.0 * TWO_PI * q2[..., None])

    def H_grad_y(self, x, y):
        q2, xt, yt = self._q2(x, y)
        xx = (xt**2).sum(-1)[..., None]
        dq = 2.0 * xx * yt - 2.0 * self.rho**2 * xt
        return dq / (2.0 * TWO_PI * q2[..., None])

    def H_hess_xx(self, x, y):
        q2, xt, yt = self._q2(x, y)
        yy = (yt**2).sum(-1)[..., None, None]
        dq = (2.0 * (yt**2).sum(-1)[..., None] * xt - 2.0 * self.rho**2 * yt)
        eye = np.eye(2)
        hess_q = 2.0 * yy * eye
        outer = dq[..., :, None] * dq[..., None, :]
        return (hess_q / q2[..., None, None] - outer / (q2**2)[..., None, None]) / (2.0 * TWO_PI)

    def H_hess_xy(self, x, y):
        # d^2 H / dx_i dy_j
        q2, xt, yt = self._q2(x, y)
        r2 = self.rho**2
        dqx = 2.0 * (yt**2).sum(-1)[..., None] * xt - 2.0 * r2 * yt
        dqy = 2.0 * (xt**2).sum(-1)[..., None] * yt - 2.0 * r2 * xt
        mixed = 4.0 * xt[..., :, None] * yt[..., None, :] - 2.0 * r2 * np.eye(2)
        outer = dqx[..., :, None] * dqy[..., None, :]
        return (mixed / q2[..., None, None] - outer / (q2**2)[..., None, None]) / (2.0 * TWO_PI)


# ====================================================================== #
#  boundary integral backend (smooth parametric boundaries)
# ====================================================================== #


def _dlp_kernel(targets, bpts, bnormals):
    """Double-layer kernel (1/2pi) (x-b).n_b / |x-b|^2, shape (nt, nb)."""
    d = targets[:, None, :] - bpts[None, :, :]
    r2 = (d**2).sum(-1)
    c = (d * bnormals[None, :, :]).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return c / (TWO_PI * r2)


class _BoundaryIntegralBackend:
    """Interior Dirichlet solver via the double-layer Nystrom method.

    The density for boundary data f solves (K_w - I/2) mu = f where K_w is
    the trapezoid discretization of the double-layer operator; the diagonal
    carries the continuous limit -curvature/(4pi).  Densities for the Green
    regular part (and its derivatives in the source point) are cached per
    source, reusing one LU factorization of the Nystrom matrix.
    """

    def __init__(self, domain, order=512):
        curve = domain.curve.resample(order) if domain.curve.n != order else domain.curve
        self.curve = curve
        self.n = curve.n
        self.w = TWO_PI / self.n * curve.speed
        K = _dlp_kernel(curve.x, curve.x, curve.normal)
        np.fill_diagonal(K, -curve.curvature / (2.0 * TWO_PI))
        self.A = K * self.w[None, :] - 0.5 * np.eye(self.n)
        self.lu = lu_factor(self.A)
        self._cache = {}
        self._spacing = curve.perimeter / self.n

    # -- density solves -------------------------------------------------- #

    def _densities(self, y, level):
        """Density for H(., y) plus y-derivative densities up to `level`."""
        key = (float(y[0]), float(y[1]))
        entry = self._cache.get(key)
        if entry is None or entry["level"] < level:
            d = self.curve.x - y[None, :]
            r2 = (d**2).sum(-1)
            f = 0.5 * np.log(r2) / TWO_PI  # boundary data (1/2pi) ln|x_b - y|
            entry = {"level": 0, "mu": lu_solve(self.lu, f)}
            if level >= 1:
                # d f / d y_h = (y - x_b)_h / (2pi |x_b - y|^2)
                rhs = (-d) / (TWO_PI * r2[:, None])
                entry["mu_y"] = np.column_stack(
                    [lu_solve(self.lu, rhs[:, h]) for h in range(2)]
                )
                entry["level"] = 1
            if level >= 2:
                eye = np.eye(2)
                hess = (eye[None, :, :] / r2[:, None, None]
                        - 2.0 * d[:, :, None] * d[:, None, :] / (r2**2)[:, None, None]) / TWO_PI
                entry["mu_yy"] = np.stack(
                    [[lu_solve(self.lu, hess[:, h, k]) for k in range(2)] for h in range(2)]
                )
                entry["level"] = 2
            if len(self._cache) > 2048:
                self._cache.clear()
            self._cache[key] = entry
        return entry

    # -- interior evaluation ---------------------------------------------- #

    def _eval(self, targets, mu):
        K = _dlp_kernel(targets, self.curve.x, self.curve.normal)
        return K @ (mu * self.w)

    def _eval_near(self, target, mu, dist):
        # Near-boundary: subtract the density at the closest boundary point
        # (Gauss identity gives the subtracted part exactly) and upsample the
        # remainder by trigonometric interpolation until the kernel lobe of
        # width ~dist is resolved.
        n_f = int(min(2 ** int(np.ceil(np.log2(max(8.0 * self.curve.perimeter / max(dist, 1e-14), self.n)))), 2**20))
        curve_f = self.curve.resample(n_f)
        spec = np.fft.fft(mu)
        pad = np.zeros(n_f, dtype=complex)
        half = self.n // 2
        pad[:half] = spec[:half]
        pad[-half:] = spec[-half:]
        mu_f = np.real(np.fft.ifft(pad)) * (n_f / self.n)
        j = np.argmin(((curve_f.x - target)**2).sum(-1))
        w_f = TWO_PI / n_f * curve_f.speed
        K = _dlp_kernel(target[None, :], curve_f.x, curve_f.normal)[0]
        return float(((mu_f - mu_f[j]) * w_f) @ K - mu_f[j])

    def _eval_auto(self, targets, mu, dists):
        out = np.empty(targets.shape[0])
        near = dists < 6.0 * self._spacing
        if np.any(~near):
            out[~near] = self._eval(targets[~near], mu)
        for i in np.nonzero(near)[0]:
            out[i] = self._eval_near(targets[i], mu, dists[i])
        return out

    def _eval_grad(self, targets, mu):
        d = targets[:, None, :] - self.curve.x[None, :, :]
        r2 = (d**2).sum(-1)
        nrm = self.curve.normal
        c = (d * nrm[None, :, :]).sum(-1)
        gk = (nrm[None, :, :] / r2[..., None]
              - 2.0 * c[..., None] * d / (r2**2)[..., None]) / TWO_PI
        return np.einsum("tbi,b->ti", gk, mu * self.w)

    def _eval_hess(self, targets, mu):
        d = targets[:, None, :] - self.curve.x[None, :, :]
        r2 = (d**2).sum(-1)
        nrm = self.curve.normal
        c = (d * nrm[None, :, :]).sum(-1)
        eye = np.eye(2)
        t1 = -2.0 * (nrm[None, :, :, None] * d[:, :, None, :]
                     + nrm[None, :, None, :] * d[:, :, :, None]) / (r2**2)[..., None, None]
        t2 = -2.0 * c[..., None, None] * eye / (r2**2)[..., None, None]
        t3 = 8.0 * c[..., None, None] * d[:, :, :, None] * d[:, :, None, :] / (r2**3)[..., None, None]
        hk = (t1 + t2 + t3) / TWO_PI
        return np.einsum("tbij,b->tij", hk, mu * self.w)


# ====================================================================== #
#  public evaluator
# ====================================================================== #


class GreenEvaluator:
    """Green function machinery for a Domain.

    backend "images" is available on disks only; "boundary-integral" works on
    any smooth domain.  All evaluations are pure; the boundary factorization
    and density cache are computed once, so a single instance can be shared
    across threads.
    """

    def __init__(self, domain, backend=None, order=512):
        self.domain = domain
        self.big_r = domain.big_r
        if backend is None:
            backend = "images" if domain.kind == "disk" else "boundary-integral"
        if backend == "images":
            if domain.kind != "disk":
                raise ConfigError("images backend requires a disk domain")
            self._b = _ImagesBackend(domain)
        elif backend == "boundary-integral":
            if domain.kind == "disk":
                # build the circle curve for the disk so disks can cross-check
                t = TWO_PI * np.arange(order) / order
                pts = domain.center + domain.radius * np.column_stack((np.cos(t), np.sin(t)))
                circle_domain = Domain.from_samples(pts, big_r=domain.big_r)
                self._b = _BoundaryIntegralBackend(circle_domain, order)
            else:
                self._b = _BoundaryIntegralBackend(domain, order)
        else:
            raise ConfigError(f"unknown Green backend {backend!r}")
        self.backend = backend

    # -- regular part ---------------------------------------------------- #

    def H(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H(x, y), single)
        ent = self._b._densities(y, 0)
        dists = self.domain.signed_distance(x)
        return _ret(self._b._eval_auto(x, ent["mu"], dists), single)

    def H_grad_x(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H_grad_x(x, y), single)
        ent = self._b._densities(y, 0)
        return _ret(self._b._eval_grad(x, ent["mu"]), single)

    def H_grad_y(self, x, y):
        """Gradient of H(x, y) in the source point, vectorized over x."""
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H_grad_y(x, y), single)
        ent = self._b._densities(y, 1)
        cols = [self._b._eval(x, ent["mu_y"][:, h]) for h in range(2)]
        return _ret(np.stack(cols, axis=-1), single)

    def H_hess_xx(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H_hess_xx(x, y), single)
        ent = self._b._densities(y, 0)
        return _ret(self._b._eval_hess(x, ent["mu"]), single)

    def H_hess_xy(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H_hess_xy(x, y), single)
        ent = self._b._densities(y, 1)
        cols = [self._b._eval_grad(x, ent["mu_y"][:, h]) for h in range(2)]
        return _ret(np.stack([cols[0], cols[1]], axis=-1), single)

    def H_hess_yy(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        if isinstance(self._b, _ImagesBackend):
            return _ret(self._b.H_hess_xx(y[None, :], x)[0] if single else
                        np.stack([self._b.H_hess_xx(y[None, :], xi)[0] for xi in x]), single)
        ent = self._b._densities(y, 2)
        vals = np.empty(x.shape[:-1] + (2, 2))
        for h in range(2):
            for k in range(2):
                vals[..., h, k] = self._b._eval(x, ent["mu_yy"][h][k])
        return _ret(vals, single)

    # -- Green function and friends --------------------------------------- #

    def green(self, x, y):
        """G(x, y); x may be a batch of points, y a single point."""
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        self._check_pair(x, y)
        r = np.hypot(x[..., 0] - y[0], x[..., 1] - y[1])
        return _ret(-np.log(r) / TWO_PI + self.H(x, y), single)

    def green_grad_x(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        self._check_pair(x, y)
        d = x - y[None, :]
        r2 = (d**2).sum(-1)[..., None]
        return _ret(-d / (TWO_PI * r2) + self.H_grad_x(x, y), single)

    def green_hess_xx(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        d = x - y[None, :]
        r2 = (d**2).sum(-1)
        eye = np.eye(2)
        log_h = (eye / r2[..., None, None]
                 - 2.0 * d[..., :, None] * d[..., None, :] / (r2**2)[..., None, None])
        return _ret(-log_h / TWO_PI + self.H_hess_xx(x, y), single)

    def green_hess_xy(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        d = x - y[None, :]
        r2 = (d**2).sum(-1)
        eye = np.eye(2)
        log_h = (eye / r2[..., None, None]
                 - 2.0 * d[..., :, None] * d[..., None, :] / (r2**2)[..., None, None])
        return _ret(log_h / TWO_PI + self.H_hess_xy(x, y), single)

    def robin(self, z):
        """Robin function H(z, z)."""
        z = np.asarray(z, dtype=float)
        self.domain.require_inside(z)
        return float(self.H(z[None, :], z)[0])

    def robin_grad(self, z):
        z = np.asarray(z, dtype=float)
        return 2.0 * self.H_grad_x(z[None, :], z)[0]

    def robin_hess(self, z):
        z = np.asarray(z, dtype=float)
        hxx = self.H_hess_xx(z[None, :], z)[0]
        hxy = self.H_hess_xy(z[None, :], z)[0]
        return 2.0 * (hxx + hxy)

    def g(self, x, z):
        """g(x, z) = ln(bigR) - 2 pi H(x, z); defined also at x = z."""
        x, single = _as_points(x)
        z = np.asarray(z, dtype=float)
        return _ret(np.log(self.big_r) - TWO_PI * self.H(x, z), single)

    def g_grad_x(self, x, z):
        x, single = _as_points(x)
        z = np.asarray(z, dtype=float)
        return _ret(-TWO_PI * self.H_grad_x(x, z), single)

    def g_hess_xx(self, x, z):
        x, single = _as_points(x)
        return _ret(-TWO_PI * self.H_hess_xx(x, np.asarray(z, dtype=float)), single)

    def g_hess_xy(self, x, z):
        x, single = _as_points(x)
        return _ret(-TWO_PI * self.H_hess_xy(x, np.asarray(z, dtype=float)), single)

    def bar_g(self, x, y):
        """barG(x, y) = ln(bigR/|x-y|) - g(x, y); identical to 2 pi G."""
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        self._check_pair(x, y)
        r = np.hypot(x[..., 0] - y[0], x[..., 1] - y[1])
        return _ret(np.log(self.big_r / r) - self.g(x, y), single)

    def bar_g_grad_x(self, x, y):
        x, single = _as_points(x)
        y = np.asarray(y, dtype=float)
        d = x - y[None, :]
        r2 = (d**2).sum(-1)[..., None]
        return _ret(-d / r2 - self.g_grad_x(x, y), single)

    def _check_pair(self, x, y):
        if not np.all(self.domain.contains(x)):
            raise DomainError("evaluation point outside the domain")
        if not self.domain.contains(y):
            raise DomainError("source point outside the domain")
        r = np.hypot(x[..., 0] - y[0], x[..., 1] - y[1])
        if np.any(r == 0.0):
            raise SingularityError("Green function evaluated on its diagonal; "
                                   "use robin() for the regular part")


# ====================================================================== #
#  harmonic background q = -psi0 from prescribed boundary flux
# ====================================================================== #


class HarmonicBackground:
    """Harmonic function q on the domain with analytic gradient and Hessian.

    Represented through a holomorphic polynomial/series f in the scaled
    variable zeta = (z - center)/scale with q = Re f + offset, which keeps
    the Laplacian exactly zero for every representation.
    """

    def __init__(self, representation, coeffs, center, scale, offset=0.0):
        self.representation = representation
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.offset = float(offset)

    @classmethod
    def zero(cls, offset=0.0):
        return cls("zero", np.zeros(0, dtype=complex), (0.0, 0.0), 1.0, offset)

    @classmethod
    def from_polynomial(cls, coeffs, center=(0.0, 0.0), scale=1.0, offset=0.0):
        """q = Re(sum c_k zeta^k) + offset with zeta = (z - center)/scale."""
        return cls("harmonic-polynomial", coeffs, center, scale, offset)

    def _zeta(self, x):
        x = np.asarray(x, dtype=float)
        return ((x[..., 0] - self.center[0]) + 1j * (x[..., 1] - self.center[1])) / self.scale

    def _poly(self, z, deriv=0):
        c = self.coeffs
        if deriv:
            k = np.arange(len(c))
            for _ in range(deriv):
                c = c * k
                c = c[1:]
                k = np.arange(len(c))
        if len(c) == 0:
            return np.zeros(np.shape(z), dtype=complex)
        return np.polynomial.polynomial.polyval(z, c)

    def value(self, x):
        if self.representation == "zero":
            return np.full(np.shape(np.asarray(x))[:-1], self.offset) if np.ndim(x) > 1 else self.offset
        f = self._poly(self._zeta(x))
        return np.real(f) + self.offset

    def grad(self, x):
        shape = np.shape(np.asarray(x))[:-1] + (2,)
        if self.representation == "zero":
            return np.zeros(shape)
        fp = self._poly(self._zeta(x), 1) / self.scale
        return np.stack([np.real(fp), -np.imag(fp)], axis=-1)

    def hessian(self, x):
        shape = np.shape(np.asarray(x))[:-1] + (2, 2)
        if self.representation == "zero":
            return np.zeros(shape)
        fpp = self._poly(self._zeta(x), 2) / self.scale**2
        a, b = np.real(fpp), -np.imag(fpp)
        return np.stack([np.stack([a, b], -1), np.stack([b, -a], -1)], -2)

    def psi0(self, x):
        """Stream function of the background field, psi0 = -q."""
        return -self.value(x)


def background_from_flux(domain, vn, offset=0.0, n_modes=None):
    """Build q = -psi0 from the outward boundary flux v_n.

    vn is either a callable of the boundary parameter t in [0, 2pi) or an
    array of samples on the uniform parameter grid.  The net flux must vanish
    (relative tolerance 1e-10); psi0 solves -dpsi0/dtau = v_n and q is
    normalized to zero mean over the domain before the offset is added.
    """
    if domain.kind == "disk":
        n = 512 if not hasattr(vn, "__len__") else max(len(vn), 16)
    else:
        n = domain.curve.n
    t = TWO_PI * np.arange(n) / n
    if callable(vn):
        samples = np.asarray([vn(tj) for tj in t], dtype=float)
    else:
        samples = np.asarray(vn, dtype=float)
        if samples.size == 0:
            raise CompatibilityError("empty boundary flux samples")
        if samples.shape[0] != n:
            raise ConfigError("flux samples must match the boundary parameter grid")

    if domain.kind == "disk":
        ds = domain.radius * np.full(n, TWO_PI / n)
    else:
        ds = domain.curve.speed * TWO_PI / n
    net = float(np.sum(samples * ds))
    scale_flux = float(np.sum(np.abs(samples) * ds))
    if scale_flux == 0.0:
        return HarmonicBackground.zero(offset)
    if abs(net) > 1e-10 * scale_flux:
        raise CompatibilityError(
            f"net boundary flux {net:.3e} violates the zero-circulation "
            f"compatibility condition (relative {abs(net) / scale_flux:.2e})")

    # psi0 on the boundary from the flux: psi0(t) = + int v_n ds.  With the
    # velocity orientation v = (d2 psi, -d1 psi) (which makes the vorticity
    # of a positive vortex positive), this sign reproduces v . n = v_n on
    # the boundary; the opposite sign would flip the measured flux.
    if domain.kind == "disk":
        spec = np.fft.fft(samples) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            psi_spec = np.where(k == 0, 0.0, domain.radius * spec / (1j * k))
        kmax = n_modes or n // 2 - 1
        # boundary trace psi0 = sum_k psi_spec[k] e^{ikt}; for real data the
        # harmonic extension is psi0 = Re(sum_{k>=1} 2 psi_spec[k] zeta^k),
        # zeta = (z - center)/radius.  Dropping k = 0 makes q mean-zero.
        coeffs = np.zeros(kmax + 1, dtype=complex)
        coeffs[1:] = 2.0 * psi_spec[1:kmax + 1]
        return HarmonicBackground("fourier-on-disk", -coeffs, domain.center,
                                  domain.radius, offset)

    # parametric: integrate v_n along arclength spectrally (the k = 0 mode of
    # v_n |x'| vanishes by compatibility), then fit a harmonic polynomial
    integrand = samples * domain.curve.speed
    spec_i = np.fft.fft(integrand) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(k == 0, 0.0, spec_i / (1j * k))
    psi_b = np.real(np.fft.ifft(anti * n))
    psi_b -= psi_b.mean()
    pts = domain.curve.x
    zeta = ((pts[:, 0] - domain.center[0]) + 1j * (pts[:, 1] - domain.center[1])) / (domain.diameter / 2.0)
    kmax = n_modes or min(48, n // 4)
    cols = [np.ones(n)]
    for kk in range(1, kmax + 1):
        cols.append(np.real(zeta**kk))
        cols.append(np.imag(zeta**kk))
    Amat = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(Amat, psi_b, rcond=1e-12)
    coeffs = np.zeros(kmax + 1, dtype=complex)
    coeffs[0] = sol[0]
    for kk in range(1, kmax + 1):
        coeffs[kk] = sol[2 * kk - 1] - 1j * sol[2 * kk]
    qc = -coeffs
    q = HarmonicBackground("harmonic-polynomial", qc, domain.center, domain.diameter / 2.0, offset)
    # subtract the domain mean (midpoint quadrature on a masked grid)
    lo, hi = domain.bounding_box()
    m = 160
    gx = np.linspace(lo[0], hi[0], m)
    gy = np.linspace(lo[1], hi[1], m)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=-1)
    mask = domain.contains(P)
    mean = float(np.mean(q.value(P[mask]))) - offset
    q.coeffs = q.coeffs.copy()
    q.coeffs[0] -= mean
    return q
