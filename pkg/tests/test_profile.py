"""Radial ground-state profile: Pohozaev identities, independent integrator
oracle, scaling consistency, glued whole-plane profile."""

import numpy as np
import pytest

from vortexpatch import limit_profile_eval, solve_profile
from vortexpatch.errors import SolvabilityError
from vortexpatch.profile import _ode_residual


def rk4_shoot(p, h=2e-4, alpha=1.0):
    """Independent fixed-step RK4 shoot from psi(0) = alpha; the crossing is
    re-integrated with a 256x finer step so the slope there is sharp."""
    def f(r, y):
        return np.array([y[1], -y[1] / r - max(y[0], 0.0)**p])

    def rk4_until_crossing(r, y, h):
        prev_r, prev_y = r, y.copy()
        while y[0] > 0:
            prev_r, prev_y = r, y.copy()
            k1 = f(r, y)
            k2 = f(r + h / 2, y + h / 2 * k1)
            k3 = f(r + h / 2, y + h / 2 * k2)
            k4 = f(r + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            r += h
        return prev_r, prev_y, r, y

    r = 1e-6
    y = np.array([alpha - alpha**p * r**2 / 4.0, -alpha**p * r / 2.0])
    prev_r, prev_y, r, y = rk4_until_crossing(r, y, h)
    prev_r, prev_y, r, y = rk4_until_crossing(prev_r, prev_y.copy(), h / 256.0)
    t = prev_y[0] / (prev_y[0] - y[0])
    r0 = prev_r + t * (h / 256.0)
    dpsi0 = prev_y[1] + t * (y[1] - prev_y[1])
    return r0, dpsi0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_pohozaev_identities(profiles, p):
    rp = profiles[p]
    s = abs(rp.slope_at_one)
    assert abs(rp.int_phi_p - 2 * np.pi * s) / (2 * np.pi * s) < 1e-8
    expect = np.pi * (p + 1) / 2 * s**2
    assert abs(rp.int_phi_p1 - expect) / expect < 1e-8


def test_slope_against_independent_integrator(profiles):
    rp = profiles[2.0]
    r0, dpsi0 = rk4_shoot(2.0)
    alpha = 2.0 / (2.0 - 1.0)
    slope_oracle = r0**(alpha + 1.0) * dpsi0
    assert abs(rp.slope_at_one - slope_oracle) < 1e-9 * abs(slope_oracle) + 1e-9


def test_boundary_and_symmetry_conditions(profiles):
    for rp in profiles.values():
        assert rp.phi[-1] == 0.0
        assert abs(rp.dphi[0]) < 1e-12
        assert rp.phi0 > 0
        assert rp.slope_at_one < 0
        assert np.all(np.diff(rp.phi) <= 1e-12)  # strictly decreasing table


def test_ode_residual_small(profiles):
    for rp in profiles.values():
        assert _ode_residual(rp) < 1e-4


def test_scaling_consistency(profiles):
    # shooting from a different height and rescaling by the exact similarity
    # reproduces the same normalized profile
    rp = profiles[2.0]
    p = 2.0
    r0a, dpa = rk4_shoot(p, alpha=1.0)
    r0b, dpb = rk4_shoot(p, alpha=2.0)
    alpha_exp = 2.0 / (p - 1.0)
    slope_a = r0a**(alpha_exp + 1.0) * dpa
    slope_b = 2.0**((p + 1.0) / 2.0 / 1.0)  # alpha^( (p+1)(p-1)/... ) see below
    # similarity: psi_alpha(r) = alpha psi(alpha^{(p-1)/2} r), so both shoots
    # rescale to the same profile; compare the normalized slopes directly
    slope_b = r0b**(alpha_exp + 1.0) * dpb
    assert abs(slope_a - slope_b) < 1e-7 * abs(slope_a)
    assert abs(slope_a - rp.slope_at_one) < 1e-7 * abs(slope_a)


def test_slope_continuity_in_p(profiles):
    slopes = [abs(profiles[p].slope_at_one) for p in (1.5, 2.0, 3.0)]
    # no wild jumps between tabulated exponents (monotone decreasing here)
    assert slopes[0] > slopes[1] > slopes[2]


def test_parameter_errors():
    with pytest.raises(SolvabilityError):
        solve_profile(1.0)
    with pytest.raises(SolvabilityError):
        solve_profile(0.5)
    with pytest.raises(SolvabilityError):
        solve_profile(2.0, tol=-1.0)


def test_limit_profile_gluing(profiles):
    rp = profiles[2.0]
    # zero at the gluing circle from both branches
    assert limit_profile_eval(rp, np.array([1.0, 0.0])) == 0.0
    assert abs(limit_profile_eval(rp, np.array([1.0 + 1e-12, 0.0]))) < 1e-10
    # one-sided radial derivatives both equal phi'(1)
    h = 1e-7
    inner = (limit_profile_eval(rp, np.array([1.0, 0.0]))
             - limit_profile_eval(rp, np.array([1.0 - h, 0.0]))) / h
    outer = (limit_profile_eval(rp, np.array([1.0 + h, 0.0]))
             - limit_profile_eval(rp, np.array([1.0, 0.0]))) / h
    assert abs(inner - rp.slope_at_one) < 1e-4
    assert abs(outer - rp.slope_at_one) < 1e-4
    # ln e = 1
    assert abs(limit_profile_eval(rp, np.array([np.e, 0.0])) - rp.slope_at_one) < 1e-13


def test_limit_profile_weak_equation(profiles):
    # -lap w = w_+^p on a grid away from the gluing circle
    rp = profiles[2.0]
    h = 2e-3
    for center in ((0.35, 0.2), (1.6, 0.9)):
        c = np.array(center)
        stencil = [c, c + (h, 0), c - (h, 0), c + (0, h), c - (0, h)]
        vals = [limit_profile_eval(rp, s) for s in stencil]
        lap = (sum(vals[1:]) - 4 * vals[0]) / h**2
        rhs = max(vals[0], 0.0)**2.0
        assert abs(-lap - rhs) < 1e-4 * max(1.0, abs(rhs))
