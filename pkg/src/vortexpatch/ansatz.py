"""Explicit near-solution: truncated cores, plateau levels, projections.

Each vortex carries a core radius s and a plateau level a.  The radial bump

    W_{delta,a}(x) = a + delta^(2/(p-1)) s^(-2/(p-1)) phi(|x|/s),   |x| <= s
                   = a ln(|x|/bigR) / ln(s/bigR),                   s <= |x| <= bigR

is C^1 across |x| = s exactly when s solves the gluing equation

    delta^(2/(p-1)) s^(-2/(p-1)) phi'(1) = a / ln(s/bigR).

Subtracting the harmonic extension of the tail gives the projected bump

    PW(x) = W_{delta,z,a}(x) - a g(x, z) / ln(bigR/s),

which vanishes on the boundary, and the composite field is

    sum_i PW(z_i^+, a_i^+) - sum_j PW(z_j^-, a_j^-).

The plateau levels couple through the per-vortex balance equations

    a_i^+ = kappa_i^+ + 2 pi q(z_i^+)/|ln eps| + a_i^+ g(z_i^+, z_i^+)/L_i^+
            - sum_{al != i} a_al^+ barG(z_i^+, z_al^+)/L_al^+
            + sum_l a_l^- barG(z_i^+, z_l^-)/L_l^-,       L = ln(bigR/s),

with the minus family the exact +/- mirror (the sign of the q term flips and
the roles of the two families swap).  For fixed core radii these equations
are linear in the plateau levels, so the solver alternates 1D gluing-root
solves with a linear update until both residual families sit at rounding
level.
"""

import warnings

import numpy as np
from dataclasses import dataclass, field
from scipy.optimize import brentq

from .errors import DomainError, SolvabilityError, ConvergenceError

TWO_PI = 2.0 * np.pi


def delta_from_eps(eps, p):
    """delta = eps (2 pi / |ln eps|)^((p-1)/2)."""
    return eps * (TWO_PI / abs(np.log(eps)))**((p - 1.0) / 2.0)


def eps_log(eps):
    return abs(np.log(eps))


# ---------------------------------------------------------------------- #
#  single-core machinery
# ---------------------------------------------------------------------- #


def w_delta_eval(delta, a, s, z, rp, big_r, x):
    """The truncated bump W_{delta,a}(x - z); defined for |x - z| <= bigR."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    r = np.hypot(pts[..., 0] - z[0], pts[..., 1] - z[1])
    if np.any(r > big_r * (1.0 + 1e-12)):
        raise DomainError("evaluation point outside B_bigR(z)")
    amp = delta**(2.0 / (rp.p - 1.0)) * s**(-2.0 / (rp.p - 1.0))
    inner = a + amp * rp.phi_at(np.minimum(r / s, 1.0))
    outer = a * np.log(np.maximum(r, 1e-300) / big_r) / np.log(s / big_r)
    out = np.where(r <= s, inner, outer)
    return float(out[0]) if single else out


def w_delta_grad(delta, a, s, z, rp, big_r, x):
    """Gradient of the bump in x (radially symmetric)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = pts - np.asarray(z, dtype=float)[None, :]
    r = np.hypot(d[..., 0], d[..., 1])
    rs = np.maximum(r, 1e-300)
    amp = delta**(2.0 / (rp.p - 1.0)) * s**(-2.0 / (rp.p - 1.0))
    dr_inner = amp * rp.dphi_at(np.minimum(r / s, 1.0)) / s
    dr_outer = a / (np.log(s / big_r) * rs)
    dr = np.where(r <= s, dr_inner, dr_outer)
    out = dr[..., None] * d / rs[..., None]
    return out[0] if single else out


def glue_residual(delta, a, s, rp, big_r):
    """Residual of the C^1 gluing equation in its printed form."""
    lhs = delta**(2.0 / (rp.p - 1.0)) * s**(-2.0 / (rp.p - 1.0)) * rp.slope_at_one
    return lhs - a / np.log(s / big_r)


def solve_s(delta, a, big_r, rp):
    """Unique core radius in (0, bigR) solving the gluing equation.

    Brackets the root on a log grid (the rescaled residual
    (delta/s)^(2/(p-1)) |phi'(1)| ln(bigR/s) - a decreases in s), then
    refines with Brent plus a Newton polish in log s.
    """
    if delta <= 0 or a <= 0:
        raise SolvabilityError("solve_s needs delta > 0 and a > 0")
    al = 2.0 / (rp.p - 1.0)
    c = abs(rp.slope_at_one)

    def f(ls):
        s = np.exp(ls)
        return (delta / s)**al * c * np.log(big_r / s) - a

    lo = np.log(delta) - 60.0
    hi = np.log(big_r) - 1e-12
    grid = np.linspace(lo, hi, 200)
    vals = np.array([f(g) for g in grid])
    sign = np.sign(vals)
    idx = np.nonzero(np.diff(sign) < 0)[0]
    if len(idx) == 0:
        raise SolvabilityError(
            "no admissible core radius: the gluing equation has no sign change "
            f"in (0, bigR) for delta={delta:.3e}; use a smaller delta")
    ls = brentq(f, grid[idx[0]], grid[idx[0] + 1], xtol=1e-15, rtol=8.9e-16)
    # Newton polish in log s: d/dls f = -(al (delta/s)^al c ln(bigR/s) + (delta/s)^al c)
    for _ in range(3):
        s = np.exp(ls)
        df = -(al * (delta / s)**al * c * np.log(big_r / s) + (delta / s)**al * c)
        if df == 0:
            break
        ls -= f(ls) / df
    s = float(np.exp(ls))
    res = abs(glue_residual(delta, a, s, rp, big_r))
    if res > 1e-12 * max(1.0, a / abs(np.log(s / big_r))):
        raise SolvabilityError(f"gluing root refinement stalled at residual {res:.2e}")
    return s


# ---------------------------------------------------------------------- #
#  coupled core system
# ---------------------------------------------------------------------- #


@dataclass
class CoreParameters:
    eps: float
    delta: float
    p: float
    big_r: float
    s_plus: np.ndarray
    a_plus: np.ndarray
    s_minus: np.ndarray
    a_minus: np.ndarray
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def s_all(self):
        return np.concatenate([self.s_plus, self.s_minus])

    @property
    def a_all(self):
        return np.concatenate([self.a_plus, self.a_minus])

    def to_dict(self):
        return {
            "eps": self.eps, "delta": self.delta, "p": self.p, "big_r": self.big_r,
            "s_plus": self.s_plus.tolist(), "a_plus": self.a_plus.tolist(),
            "s_minus": self.s_minus.tolist(), "a_minus": self.a_minus.tolist(),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "iterations": self.iterations,
        }


def _interaction_tables(vs, green):
    """g(z_i, z_i) and barG(z_i, z_j) for all vortices (sign-agnostic)."""
    Z = vs.positions
    k = vs.m + vs.n
    g_diag = np.array([green.g(Z[i], Z[i]) for i in range(k)])
    bar = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                bar[i, j] = green.bar_g(Z[i], Z[j])
    return g_diag, bar


def core_residuals(cores, vs, green, q, rp):
    """Residual families of the gluing equations and the plateau balances."""
    m, n = vs.m, vs.n
    Z = vs.positions
    lg = eps_log(cores.eps)
    g_diag, bar = _interaction_tables(vs, green)
    s = cores.s_all
    a = cores.a_all
    L = np.log(cores.big_r / s)
    glue = np.array([glue_residual(cores.delta, a[i], s[i], rp, cores.big_r)
                     for i in range(m + n)])
    bal = np.zeros(m + n)
    for i in range(m + n):
        sign = 1.0 if i < m else -1.0
        rhs = (vs.kappas[i] + sign * TWO_PI * q.value(Z[i]) / lg
               + a[i] * g_diag[i] / L[i])
        for j in range(m + n):
            if j == i:
                continue
            same = (j < m) == (i < m)
            rhs += (-1.0 if same else 1.0) * a[j] * bar[i, j] / L[j]
        bal[i] = a[i] - rhs
    return {"glue_plus": np.abs(glue[:m]), "glue_minus": np.abs(glue[m:]),
            "balance_plus": np.abs(bal[:m]), "balance_minus": np.abs(bal[m:])}


def solve_core_system(vs, green, q, eps, rp, big_r=None, max_iter=200,
                      tol=1e-12, check_multiplicity=True):
    """Solve the coupled (s_i, a_i) system at parameter eps.

    Alternates the 1D gluing solves (given plateau levels) with the linear
    plateau balance (given core radii), damping the plateau update by 0.5
    when it starts oscillating.  All four residual families must land below
    tol; divergence and negative plateau values raise with diagnostics.
    """
    big_r = green.big_r if big_r is None else big_r
    delta = delta_from_eps(eps, rp.p)
    a = _iterate_cores(vs, green, q, eps, delta, rp, big_r, vs.kappas.copy(),
                       max_iter, tol)
    if check_multiplicity:
        try:
            a_alt = _iterate_cores(vs, green, q, eps, delta, rp, big_r,
                                   1.5 * vs.kappas, max_iter, tol)
            if np.max(np.abs(a_alt[0] - a[0])) > 1e-9 * np.max(np.abs(a[0])):
                warnings.warn(
                    "core system admits multiple fixed points at this eps; "
                    "reporting the branch seeded at a = kappa", stacklevel=2)
        except (SolvabilityError, ConvergenceError):
            pass

    a_vec, s_vec, iters = a
    m = vs.m
    cores = CoreParameters(eps=float(eps), delta=float(delta), p=rp.p,
                           big_r=float(big_r),
                           s_plus=s_vec[:m].copy(), a_plus=a_vec[:m].copy(),
                           s_minus=s_vec[m:].copy(), a_minus=a_vec[m:].copy(),
                           iterations=iters)
    res = core_residuals(cores, vs, green, q, rp)
    cores.residuals = {k: float(np.max(v)) if len(v) else 0.0 for k, v in res.items()}
    worst = max(cores.residuals.values())
    if worst > tol:
        raise ConvergenceError(
            f"core system residual {worst:.2e} above tol {tol:.1e} at eps={eps:.3e}",
            best=cores)
    return cores


def _iterate_cores(vs, green, q, eps, delta, rp, big_r, a_init, max_iter, tol):
    m, n = vs.m, vs.n
    k = m + n
    Z = vs.positions
    lg = eps_log(eps)
    g_diag, bar = _interaction_tables(vs, green)
    qz = np.array([q.value(Z[i]) for i in range(k)])
    signs = np.concatenate([np.ones(m), -np.ones(n)])

    a = a_init.astype(float).copy()
    prev_step = None
    damping = 1.0
    kappa_scale = float(np.max(vs.kappas))
    for it in range(1, max_iter + 1):
        s = np.array([solve_s(delta, a[i], big_r, rp) for i in range(k)])
        L = np.log(big_r / s)
        # linear balance for the plateau levels at frozen radii
        A = np.eye(k)
        rhs = vs.kappas + signs * TWO_PI * qz / lg
        for i in range(k):
            A[i, i] -= g_diag[i] / L[i]
            for j in range(k):
                if j == i:
                    continue
                same = (j < m) == (i < m)
                A[i, j] += (1.0 if same else -1.0) * bar[i, j] / L[j]
        a_new = np.linalg.solve(A, rhs)
        step = a_new - a
        if prev_step is not None and np.dot(step, prev_step) < 0:
            damping = 0.5
        a_next = a + damping * step
        if np.any(a_next <= 0):
            raise SolvabilityError(
                f"negative plateau level encountered at eps={eps:.3e}; "
                "the vortex interactions are too strong at this scale")
        if not np.all(np.isfinite(a_next)) or np.max(a_next) > 1e6 * kappa_scale:
            raise ConvergenceError(
                f"core-system iteration diverged at eps={eps:.3e}")
        delta_a = float(np.max(np.abs(a_next - a)))
        a = a_next
        prev_step = step
        if delta_a <= 1e-15 * max(1.0, float(np.max(a))):
            s = np.array([solve_s(delta, a[i], big_r, rp) for i in range(k)])
            return a, s, it
    raise ConvergenceError(
        f"core system did not settle in {max_iter} iterations at eps={eps:.3e}")


# ---------------------------------------------------------------------- #
#  composite field
# ---------------------------------------------------------------------- #


def ansatz_tilt(cores, vs, green, q):
    """First-order tilt of the composite field at each vortex center.

    Inside core i the composite field minus its activation level is the pure
    bump plus a linear term <t_i, x - z_i> with

        t_i = sign_i (2 pi/|ln eps|) grad q(z_i) + (a_i/L_i) grad_x g(z_i, z_i)
              - sum_{same sign, k != i} (a_k/L_k) grad_x barG(z_i, z_k)
              + sum_{opposite l} (a_l/L_l) grad_x barG(z_i, z_l).

    Zeroing all t_i places the configuration at the finite-eps equilibrium of
    the reduced energy; at that point the near-solution has no first-order
    defect and the vorticity supports stay concentric with their vortices.
    """
    Z = vs.positions
    k = vs.m + vs.n
    lg = eps_log(cores.eps)
    a = cores.a_all
    L = np.log(cores.big_r / cores.s_all)
    t = np.zeros((k, 2))
    for i in range(k):
        sign_i = 1.0 if i < vs.m else -1.0
        t[i] = sign_i * (TWO_PI / lg) * q.grad(Z[i])
        t[i] += (a[i] / L[i]) * green.g_grad_x(Z[i], Z[i])
        for j in range(k):
            if j == i:
                continue
            same = (j < vs.m) == (i < vs.m)
            coef = a[j] / L[j]
            gb = green.bar_g_grad_x(Z[i], Z[j])
            t[i] += (-coef if same else coef) * gb
    return t


def refine_positions(vs, green, q, eps, rp, big_r=None, tol=None, max_iter=40):
    """Move the vortex positions to the finite-eps reduced equilibrium.

    Newton (finite-difference Jacobian) on the tilt balance of ansatz_tilt,
    re-solving the core system at every evaluation.  Seeded at a critical
    point of the interaction energy this converges in a few steps and shifts
    each center by O(1/|ln eps|); the shift vanishes in the limit.
    """
    big_r = green.big_r if big_r is None else big_r
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(vs.kappas)))
    Z = vs.positions.copy()
    k = vs.m + vs.n

    def tilt_of(Zflat):
        work = vs.with_positions(Zflat.reshape(k, 2))
        cores = solve_core_system(work, green, q, eps, rp, big_r=big_r,
                                  check_multiplicity=False)
        return ansatz_tilt(cores, work, green, q).ravel(), cores

    zf = Z.ravel()
    f, cores = tilt_of(zf)
    step_fd = 1e-7 * green.domain.diameter
    for _ in range(max_iter):
        if np.max(np.abs(f)) <= tol:
            break
        J = np.zeros((2 * k, 2 * k))
        for c in range(2 * k):
            zp = zf.copy()
            zp[c] += step_fd
            J[:, c] = (tilt_of(zp)[0] - f) / step_fd
        try:
            d = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            try:
                f_new, cores_new = tilt_of(zf + lam * d)
            except (SolvabilityError, ConvergenceError, DomainError):
                lam *= 0.5
                continue
            if np.max(np.abs(f_new)) < np.max(np.abs(f)):
                zf = zf + lam * d
                f, cores = f_new, cores_new
                break
            lam *= 0.5
        else:
            break
    else:
        raise ConvergenceError(
            f"position refinement stalled at tilt {np.max(np.abs(f)):.3e}")
    return vs.with_positions(zf.reshape(k, 2)), cores


class AnsatzField:
    """The composite projected field P^+ - P^- and its pieces.

    Immutable after construction; evaluation is pure and vectorized over
    batches of points.
    """

    def __init__(self, cores, vs, rp, green, q):
        self.cores = cores
        self.vs = vs
        self.rp = rp
        self.green = green
        self.q = q
        self.big_r = cores.big_r

    def _params(self, idx):
        s = self.cores.s_all[idx]
        a = self.cores.a_all[idx]
        z = self.vs.positions[idx]
        return s, a, z

    def pw_eval(self, idx, x):
        """One projected bump PW for vortex idx (sign not applied)."""
        s, a, z = self._params(idx)
        w = w_delta_eval(self.cores.delta, a, s, z, self.rp, self.big_r, x)
        return w - a / np.log(self.big_r / s) * self.green.g(x, z)

    def pw_grad(self, idx, x):
        s, a, z = self._params(idx)
        gw = w_delta_grad(self.cores.delta, a, s, z, self.rp, self.big_r, x)
        return gw - a / np.log(self.big_r / s) * self.green.g_grad_x(x, z)

    def evaluate(self, x, require_inside=True):
        """P^+(x) - P^-(x)."""
        if require_inside:
            if not np.all(self.green.domain.contains(np.asarray(x, dtype=float))):
                raise DomainError("ansatz evaluation point outside the domain")
        total = None
        for idx in range(self.vs.m + self.vs.n):
            sign = 1.0 if idx < self.vs.m else -1.0
            term = sign * np.asarray(self.pw_eval(idx, x))
            total = term if total is None else total + term
        return float(total) if np.ndim(total) == 0 else total

    def gradient(self, x):
        total = None
        for idx in range(self.vs.m + self.vs.n):
            sign = 1.0 if idx < self.vs.m else -1.0
            term = sign * np.asarray(self.pw_grad(idx, x))
            total = term if total is None else total + term
        return total

    def summands(self, x):
        """List of per-vortex signed contributions at x."""
        out = []
        for idx in range(self.vs.m + self.vs.n):
            sign = 1.0 if idx < self.vs.m else -1.0
            out.append(sign * np.asarray(self.pw_eval(idx, x)))
        return out

    def threshold(self, idx, x):
        """kappa_idx (+/-) 2 pi q(x)/|ln eps|: the local activation level."""
        sign = 1.0 if idx < self.vs.m else -1.0
        return self.vs.kappas[idx] + sign * TWO_PI * self.q.value(x) / eps_log(self.cores.eps)

    def translation_modes(self, x):
        """Columns of d(composite field)/d(z_{i,h}) at frozen (a, s).

        These span the almost-null directions of the linearized problem; the
        solver uses them to take the slow core-translation motion out of the
        Newton loop.  Shape (npts, 2(m+n)).
        """
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        k = self.vs.m + self.vs.n
        cols = np.zeros((pts.shape[0], 2 * k))
        for idx in range(k):
            sign = 1.0 if idx < self.vs.m else -1.0
            s, a, z = self._params(idx)
            gw = w_delta_grad(self.cores.delta, a, s, z, self.rp, self.big_r, pts)
            # d/dz_h g(x, z) = -2 pi [d_y H](x, z)
            dz_g = -TWO_PI * self.green.H_grad_y(pts, z)
            for h in range(2):
                cols[:, 2 * idx + h] = sign * (-gw[:, h]
                                               - a / np.log(self.big_r / s) * dz_g[:, h])
        return cols

    def excess(self, idx, x):
        """Signed field minus the activation level near vortex idx."""
        sign = 1.0 if idx < self.vs.m else -1.0
        return sign * self.evaluate(x, require_inside=False) - self.threshold(idx, x)


def support_predict(af, T=10.0, sigma=0.1, check=True, n_angles=32):
    """Bracketing radii s(1 - T s) and s(1 + s^sigma) for each vortex.

    With check=True the ansatz is sampled on circles strictly inside/outside
    the bracket and the predicted sign of (field - activation level) is
    verified; failures raise with the measured bracket.
    """
    cores = af.cores
    k = af.vs.m + af.vs.n
    inner = np.empty(k)
    outer = np.empty(k)
    for idx in range(k):
        s = cores.s_all[idx]
        z = af.vs.positions[idx]
        inner[idx] = s * (1.0 - T * s)
        outer[idx] = s * (1.0 + s**sigma)
        if inner[idx] <= 0:
            raise SolvabilityError(
                f"support bracket degenerate for vortex {idx}: T*s = {T * s:.3e} >= 1")
        if not check:
            continue
        r_sub = _subdomain_radius(af, idx)
        r_check = min(2.0 * s, 0.5 * (outer[idx] + r_sub))
        if r_check <= outer[idx]:
            raise SolvabilityError(
                f"support bracket for vortex {idx} exceeds its subdomain "
                f"(outer {outer[idx]:.3e} vs subdomain radius {r_sub:.3e})")
        th = TWO_PI * np.arange(n_angles) / n_angles
        ex_in = af.excess(idx, _ring(z, 0.5 * s, th))
        ex_out = af.excess(idx, _ring(z, r_check, th))
        if not np.all(ex_in > 0):
            raise SolvabilityError(
                f"support bracket failed inside vortex {idx}: min excess {ex_in.min():.3e}")
        if not np.all(ex_out < 0):
            raise SolvabilityError(
                f"support bracket failed outside vortex {idx}: max excess {ex_out.max():.3e}")
    return inner, outer


def _ring(z, r, angles):
    return z + r * np.column_stack((np.cos(angles), np.sin(angles)))


def _subdomain_radius(af, idx):
    subs = af.vs.default_subdomains(af.green.domain)
    return subs[idx][1]
