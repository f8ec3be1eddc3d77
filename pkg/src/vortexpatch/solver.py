"""Newton and Picard solves of the gated semilinear free-boundary problem.

Two equivalent variable forms share the machinery:

    w-form:  -delta^2 lap w = sum_i X_i (w - k_i^+ - 2 pi q/|ln eps|)_+^p
                            - sum_j X_j (2 pi q/|ln eps| - k_j^- - w)_+^p
    u-form:  -eps^2  lap u  = sum_i X_i (u - q - k_i^+ |ln eps|/(2 pi))_+^p
                            - sum_j X_j (q - k_j^- |ln eps|/(2 pi) - u)_+^p

with w = 2 pi u / |ln eps| and delta = eps (2 pi/|ln eps|)^((p-1)/2).  Each
gate X_i is the indicator of the vortex subdomain.  Newton uses the
semismooth derivative p(.)_+^(p-1), a sparse LU of the Jacobian (refreshed
only when the observed contraction degrades), and a backtracking line search
on the residual norm.  Picard iterates the bare fixed-point map
w <- (-coef lap)^{-1} rhs(w) and reports the observed contraction or growth
factor; it is a fallback and a cross-check, not the workhorse.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import dataclass, field

from .ansatz import delta_from_eps, eps_log
from .errors import ConfigError, ConvergenceError
from .grid import GridField, discretize

TWO_PI = 2.0 * np.pi


@dataclass
class ProblemSetup:
    """Node-level data of the gated problem on one grid."""
    spec: object
    A: object                   # sparse -lap_h
    coef: float                 # delta^2 (w-form) or eps^2 (u-form)
    p: float
    eps: float
    variable: str
    masks: np.ndarray           # (k, N) gates
    thresholds: np.ndarray      # (k, N) activation levels
    signs: np.ndarray           # (k,)
    q_nodes: np.ndarray = None

    def operator(self):
        return self.coef * self.A


def setup_problem(spec, vs, q, eps, p, variable="w", A=None, subdomains=None):
    """Precompute gates, thresholds and the scaled operator for one grid."""
    if variable not in ("w", "u"):
        raise ConfigError("variable must be 'w' or 'u'")
    pts = spec.points
    k = vs.m + vs.n
    subs = subdomains if subdomains is not None else vs.default_subdomains(spec.domain)
    if len(subs) != k:
        raise ConfigError("need one subdomain per vortex")
    masks = np.zeros((k, spec.n_interior), dtype=bool)
    for i, (c, r) in enumerate(subs):
        c = np.asarray(c, dtype=float)
        masks[i] = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) < r
    overlap = masks.sum(axis=0) > 1
    if np.any(overlap):
        bad = [tuple(np.nonzero(masks[:, nid])[0]) for nid in np.nonzero(overlap)[0][:1]]
        raise ConfigError(f"vortex subdomains overlap on the grid: pair {bad[0]}")

    lg = eps_log(eps)
    q_nodes = q.value(pts)
    if np.ndim(q_nodes) == 0:
        q_nodes = np.full(spec.n_interior, float(q_nodes))
    signs = vs.signs
    kap = vs.kappas
    if variable == "w":
        coef = delta_from_eps(eps, p)**2
        thr = kap[:, None] + signs[:, None] * (TWO_PI / lg) * q_nodes[None, :]
    else:
        coef = eps**2
        thr = kap[:, None] * (lg / TWO_PI) + signs[:, None] * q_nodes[None, :]
    A = discretize(spec) if A is None else A
    return ProblemSetup(spec=spec, A=A, coef=coef, p=p, eps=float(eps),
                        variable=variable, masks=masks, thresholds=thr,
                        signs=signs, q_nodes=q_nodes)


def rhs_eval(field_or_values, setup):
    """Gated nonlinearity at the nodes; returns the same kind as the input."""
    values = field_or_values.values if isinstance(field_or_values, GridField) \
        else np.asarray(field_or_values, dtype=float)
    out = np.zeros_like(values)
    for i in range(setup.masks.shape[0]):
        arg = setup.signs[i] * values - setup.thresholds[i]
        np.maximum(arg, 0.0, out=arg)
        arg[~setup.masks[i]] = 0.0
        out += setup.signs[i] * arg**setup.p
    if isinstance(field_or_values, GridField):
        return field_or_values.copy(values=out)
    return out


def rhs_derivative(values, setup, cap=None):
    """d rhs / d field, a nonnegative diagonal: p sum_i X_i (arg_i)_+^(p-1)."""
    out = np.zeros_like(values)
    for i in range(setup.masks.shape[0]):
        arg = setup.signs[i] * values - setup.thresholds[i]
        np.maximum(arg, 0.0, out=arg)
        arg[~setup.masks[i]] = 0.0
        out += arg**(setup.p - 1.0)
    out *= setup.p
    if cap is not None:
        np.minimum(out, cap, out=out)
    return out


@dataclass
class SolveReport:
    method: str
    iterations: int = 0
    converged: bool = False
    residual_history: list = field(default_factory=list)   # (l2, max) pairs
    damping_history: list = field(default_factory=list)
    correction_max_norm: float = 0.0
    contraction_factor: float = None
    notes: str = ""

    def to_dict(self):
        return {
            "method": self.method, "iterations": self.iterations,
            "converged": self.converged,
            "residual_history": [[float(a), float(b)] for a, b in self.residual_history],
            "damping_history": [float(d) for d in self.damping_history],
            "correction_max_norm": float(self.correction_max_norm),
            "contraction_factor": None if self.contraction_factor is None
            else float(self.contraction_factor),
            "notes": self.notes,
        }


def _res_norms(r):
    if len(r) == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(r)), float(np.max(np.abs(r)))


def _subspace_refine(w, Ac, setup, Q, f_scale, max_steps=8, growth_cap=100.0):
    """Nonlinear Gauss-Newton solve of the residual inside span(Q).

    The near-null directions of the linearization (core translations) carry
    a residual component whose removal is nonlinear at the relevant step
    size; plain Newton creeps along them.  This zeroes the projected system
    Q^T F(w + Q beta) = 0 with finite-difference Jacobians.  The orthogonal
    residual is allowed to grow (bounded by growth_cap) - the quadratic
    spill-over into the well-conditioned complement is cheap for the next
    Newton step to remove, whereas the projected component is what stalls
    the outer iteration.
    """
    k = Q.shape[1]
    beta = np.zeros(k)
    db = 1e-4 * f_scale

    def resid(b):
        return Ac @ (w + Q @ b) - rhs_eval(w + Q @ b, setup)

    r = resid(beta)
    full0 = np.linalg.norm(r)
    m = Q.T @ r
    m0 = np.linalg.norm(m)
    for _ in range(max_steps):
        if np.linalg.norm(m) <= 1e-12 * max(1.0, m0):
            break
        Jm = np.empty((k, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = db
            Jm[:, j] = (Q.T @ resid(beta + e) - m) / db
        try:
            step = np.linalg.solve(Jm, -m)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        improved = False
        base = np.linalg.norm(m)
        while lam > 1e-4:
            cand = beta + lam * step
            r_try = resid(cand)
            m_try = Q.T @ r_try
            if np.linalg.norm(m_try) < base and \
               np.linalg.norm(r_try) <= growth_cap * max(full0, 1e-300):
                beta, m = cand, m_try
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        db = max(1e-9 * f_scale,
                 min(db, 0.5 * float(np.max(np.abs(lam * step))) + 1e-300))
    return w + Q @ beta


def _near_null_basis(J, lu, k):
    """Orthonormal basis of the k eigenvectors of J nearest zero, via
    shift-invert Arnoldi reusing the existing LU factorization.

    These are the core-translation modes of the linearization; resolving
    them exactly (rather than through the sampled ansatz derivatives) keeps
    the subspace refinement from leaking into the orthogonal complement.
    """
    n = J.shape[0]
    op = spla.LinearOperator((n, n), matvec=lu.solve)
    try:
        vals, vecs = spla.eigs(J, k=k, sigma=0.0, OPinv=op, which="LM",
                               tol=1e-8, maxiter=200)
    except (spla.ArpackNoConvergence, RuntimeError):
        return None
    basis = np.real(vecs)
    return np.linalg.qr(basis)[0]


def solve_newton(setup, initial, tol=1e-10, max_iter=60, jac_cap=None,
                 null_fields=None, min_damping=2.0**-20):
    """Damped semismooth Newton from the given initial grid field.

    tol is relative to the max norm of the active nonlinearity.  The line
    search backtracks on the l2 residual and proposed steps are capped at a
    fraction of the field range (crossing the free boundary by many cells in
    one shot invalidates the local model).  When null_fields is given (the
    sampled vortex-translation modes of the initial guess), slow progress
    triggers a nonlinear refinement inside that subspace, which removes the
    near-null creep without extra factorizations.  The Jacobian LU is reused
    while contraction stays strong.
    """
    w = initial.values.copy() if isinstance(initial, GridField) else np.asarray(initial, dtype=float).copy()
    Ac = setup.operator()
    report = SolveReport(method="newton")

    n_null = 0
    if null_fields is not None and np.size(null_fields):
        n_null = 1 if np.ndim(null_fields) == 1 else np.shape(null_fields)[1]
    Q = None

    rhs = rhs_eval(w, setup)
    r = Ac @ w - rhs
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    rn = float(np.max(np.abs(r)))
    rl2 = float(np.linalg.norm(r))
    report.residual_history.append(_res_norms(r))
    lu = None
    last_ratio = 1.0
    field_range = max(float(np.max(w) - np.min(w)), 1e-12)
    slow = 0
    since_refine = 99
    for it in range(1, max_iter + 1):
        if rn <= tol * scale:
            report.converged = True
            break
        if lu is None or last_ratio > 0.2:
            dr = rhs_derivative(w, setup, cap=jac_cap)
            J = (Ac - _diag(dr, setup)).tocsc()
            try:
                lu = spla.splu(J)
            except RuntimeError as exc:
                raise ConvergenceError(
                    f"Newton Jacobian factorization failed ({exc}); "
                    "consider the Picard fallback", report=report)
            if n_null and Q is None and slow >= 1:
                Q = _near_null_basis(J, lu, n_null)
        step = lu.solve(-r)
        sn = float(np.max(np.abs(step)))
        if sn > 0.3 * field_range:
            step *= 0.3 * field_range / sn
        lam = 1.0
        while lam >= min_damping:
            w_try = w + lam * step
            rhs_try = rhs_eval(w_try, setup)
            r_try = Ac @ w_try - rhs_try
            rl2_try = float(np.linalg.norm(r_try))
            if rl2_try <= (1.0 - 1e-4 * lam) * rl2 or \
               np.max(np.abs(r_try)) <= tol * scale:
                break
            lam *= 0.5
        else:
            if not n_null:
                raise ConvergenceError(
                    f"Newton stagnated at residual {rn:.3e} (iteration {it})",
                    best=GridField(setup.spec, w, initial.variable if isinstance(initial, GridField) else "w"),
                    report=report)
            w_try = w
            rhs_try = rhs
            r_try = r
            rl2_try = rl2
            lam = 0.0
            slow = max(slow, 2)
        # creep detected: the residual component along the near-null modes
        # must be removed nonlinearly, not by damped linear steps
        since_refine += 1
        if n_null:
            if lam < 0.5 or rl2_try > 0.5 * rl2:
                slow += 1
            else:
                slow = 0
            if slow >= 2 and since_refine >= 2:
                if Q is None:
                    dr = rhs_derivative(w_try, setup, cap=jac_cap)
                    J = (Ac - _diag(dr, setup)).tocsc()
                    lu = spla.splu(J)
                    Q = _near_null_basis(J, lu, n_null)
                if Q is not None:
                    w_ref = _subspace_refine(w_try, Ac, setup, Q, field_range)
                    moved = bool(np.any(w_ref != w_try))
                    if moved:
                        w_try = w_ref
                        rhs_try = rhs_eval(w_try, setup)
                        r_try = Ac @ w_try - rhs_try
                        rl2_try = float(np.linalg.norm(r_try))
                        lu = None
                        slow = 0
                        since_refine = 0
                    elif lam == 0.0:
                        raise ConvergenceError(
                            f"Newton stagnated at residual {rn:.3e} despite "
                            f"subspace refinement (iteration {it})",
                            best=GridField(setup.spec, w, "w"), report=report)
                elif lam == 0.0:
                    raise ConvergenceError(
                        f"Newton stagnated at residual {rn:.3e} "
                        f"(near-null basis unavailable, iteration {it})",
                        best=GridField(setup.spec, w, "w"), report=report)
        last_ratio = rl2_try / max(rl2, 1e-300)
        w, rhs, r = w_try, rhs_try, r_try
        rn = float(np.max(np.abs(r)))
        rl2 = rl2_try
        scale = max(float(np.max(np.abs(rhs))), 1e-300)
        report.iterations = it
        report.residual_history.append(_res_norms(r))
        report.damping_history.append(lam)
    else:
        raise ConvergenceError(
            f"Newton did not converge in {max_iter} iterations "
            f"(residual {rn:.3e})",
            best=GridField(setup.spec, w, "w"), report=report)
    if rn <= tol * scale:
        report.converged = True
    init_vals = initial.values if isinstance(initial, GridField) else np.asarray(initial)
    report.correction_max_norm = float(np.max(np.abs(w - init_vals)))
    var = initial.variable if isinstance(initial, GridField) else setup.variable
    out = GridField(setup.spec, w, var, {"eps": setup.eps, "p": setup.p})
    return out, report


def solve_picard(setup, initial, tol=1e-10, max_iter=400, relax=1.0,
                 divergence_window=5):
    """Bare fixed-point iteration w <- (1-relax) w + relax (-coef lap)^{-1} rhs(w).

    Reports the observed contraction factor.  Residual growth over
    `divergence_window` consecutive steps raises with the best iterate, since
    the desingularized solution is an unstable fixed point of this map
    whenever the core nonlinearity is active (Newton is the workhorse; this
    map is the independent cross-check).
    """
    w = initial.values.copy() if isinstance(initial, GridField) else np.asarray(initial, dtype=float).copy()
    Ac = setup.operator().tocsc()
    lu = spla.splu(Ac)
    report = SolveReport(method="picard")

    rhs = rhs_eval(w, setup)
    r = Ac @ w - rhs
    rn = float(np.max(np.abs(r)))
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    report.residual_history.append(_res_norms(r))
    grow = 0
    best = w.copy()
    best_rn = rn
    ratios = []
    for it in range(1, max_iter + 1):
        if rn <= tol * scale:
            report.converged = True
            break
        w = (1.0 - relax) * w + relax * lu.solve(rhs)
        rhs = rhs_eval(w, setup)
        r = Ac @ w - rhs
        rn_new = float(np.max(np.abs(r)))
        report.iterations = it
        report.residual_history.append(_res_norms(r))
        if rn > 0 and rn_new > 0:
            ratios.append(rn_new / rn)
        grow = grow + 1 if rn_new > rn else 0
        if rn_new < best_rn:
            best_rn, best = rn_new, w.copy()
        rn = rn_new
        scale = max(float(np.max(np.abs(rhs))), 1e-300)
        if grow >= divergence_window:
            report.contraction_factor = float(np.exp(np.mean(np.log(ratios[-divergence_window:]))))
            report.notes = "diverged: residual grew over consecutive steps"
            raise ConvergenceError(
                f"Picard map diverged (growth factor ~ {report.contraction_factor:.3f})",
                best=GridField(setup.spec, best, "w"), report=report)
    else:
        raise ConvergenceError(
            f"Picard did not converge in {max_iter} iterations (residual {rn:.3e})",
            best=GridField(setup.spec, best, "w"), report=report)
    if ratios:
        report.contraction_factor = float(np.exp(np.mean(np.log(ratios))))
    init_vals = initial.values if isinstance(initial, GridField) else np.asarray(initial)
    report.correction_max_norm = float(np.max(np.abs(w - init_vals)))
    var = initial.variable if isinstance(initial, GridField) else setup.variable
    return GridField(setup.spec, w, var, {"eps": setup.eps, "p": setup.p}), report


def picard_gap(setup, field):
    """Max-norm distance between a field and one application of the Picard
    map; a solver-independent fixed-point check."""
    Ac = setup.operator().tocsc()
    lu = spla.splu(Ac)
    mapped = lu.solve(rhs_eval(field.values, setup))
    return float(np.max(np.abs(mapped - field.values)))


def solve_linear(setup, rhs_values):
    """Solve (-coef lap_h) w = rhs for a prescribed right-hand side."""
    Ac = setup.operator().tocsc()
    lu = spla.splu(Ac)
    return lu.solve(np.asarray(rhs_values, dtype=float))


def _diag(d, setup):
    return sp.diags(d, 0, format="csc")


def u_from_w(field):
    """Convert the rescaled solution to the physical one: u = |ln eps| w / 2 pi."""
    eps = field.params["eps"]
    vals = field.values * (eps_log(eps) / TWO_PI)
    return GridField(field.spec, vals, "u", dict(field.params))


def w_from_u(field):
    eps = field.params["eps"]
    vals = field.values * (TWO_PI / eps_log(eps))
    return GridField(field.spec, vals, "w", dict(field.params))
