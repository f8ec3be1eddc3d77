"""Masked grids and the embedded-boundary Laplacian."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from vortexpatch import Domain, build_grid
from vortexpatch.errors import ResolutionError
from vortexpatch.grid import (cell_weights, check_resolution, discretize,
                              gradient, interpolate, GridField)


@pytest.fixture(scope="module")
def disk_grid(unit_disk):
    return build_grid(unit_disk, h=0.02)


def test_mask_and_arms(disk_grid):
    spec = disk_grid
    assert spec.n_interior > 0
    # all interior points are inside the domain
    assert np.all(np.hypot(spec.points[:, 0], spec.points[:, 1]) < 1.0)
    # arms are in (0, h]
    assert np.all(spec.arms > 0)
    assert np.all(spec.arms <= spec.h + 1e-15)
    # cut arms exactly where a neighbor is missing
    cut = spec.neighbors < 0
    assert np.all(spec.arms[cut] < spec.h)
    assert np.all(spec.arms[~cut] == spec.h)
    # boundary-adjacent flag matches
    assert np.array_equal(spec.is_adjacent, np.any(cut, axis=1))


def test_arm_crossing_on_disk(disk_grid):
    # the Shortley-Weller crossing lies on the circle to high accuracy
    spec = disk_grid
    k = np.nonzero(spec.is_adjacent)[0][0]
    d = np.nonzero(spec.neighbors[k] < 0)[0][0]
    direction = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], float)[d]
    crossing = spec.points[k] + spec.arms[k, d] * direction
    assert abs(np.hypot(*crossing) - 1.0) < 1e-10


def test_operator_polynomial_exactness(disk_grid):
    A = discretize(disk_grid)
    pts = disk_grid.points
    deep = ~disk_grid.is_adjacent
    quad = pts[:, 0]**2 + pts[:, 1]**2
    # A represents -lap: -lap(x^2 + y^2) = -4
    assert np.max(np.abs((A @ quad)[deep] + 4.0)) < 1e-8
    harm = pts[:, 0]**2 - pts[:, 1]**2
    assert np.max(np.abs((A @ harm)[deep])) < 1e-8
    lin = 2.0 * pts[:, 0] - 0.7 * pts[:, 1]
    assert np.max(np.abs((A @ lin)[deep])) < 1e-8


def test_manufactured_solution(disk_grid):
    # u* = 1 - |x|^2 solves -lap u = 4 with zero boundary data
    A = discretize(disk_grid).tocsc()
    pts = disk_grid.points
    ustar = 1.0 - pts[:, 0]**2 - pts[:, 1]**2
    u = spla.splu(A).solve(np.full(disk_grid.n_interior, 4.0))
    assert np.max(np.abs(u - ustar)) < 1e-10


def test_manufactured_solution_mask_only(unit_disk):
    # the mask-only treatment is first order at the boundary
    spec = build_grid(unit_disk, h=0.02, boundary="mask-only")
    assert np.all(spec.arms == spec.h)
    A = discretize(spec).tocsc()
    pts = spec.points
    ustar = 1.0 - pts[:, 0]**2 - pts[:, 1]**2
    u = spla.splu(A).solve(np.full(spec.n_interior, 4.0))
    err = np.max(np.abs(u - ustar))
    assert 1e-4 < err < 0.1    # O(h) boundary error, far worse than cut cells


def test_second_order_convergence(unit_disk):
    # smooth manufactured solution: u = sin(pi x) sin(pi y) restricted
    errs = []
    for h in (0.04, 0.02):
        spec = build_grid(unit_disk, h=h)
        A = discretize(spec).tocsc()
        pts = spec.points
        ustar = (1.0 - pts[:, 0]**2 - pts[:, 1]**2) * np.exp(pts[:, 0])
        # -lap u* computed symbolically
        x, y = pts[:, 0], pts[:, 1]
        lap = np.exp(x) * (1 - x**2 - y**2 - 4 * x - 4)
        u = spla.splu(A).solve(-lap)
        errs.append(np.max(np.abs(u - ustar)))
    rate = np.log2(errs[0] / errs[1])
    assert rate > 1.7


def test_discrete_maximum_principle(disk_grid):
    A = discretize(disk_grid).tocsc()
    rng = np.random.default_rng(0)
    rhs = rng.random(disk_grid.n_interior)
    u = spla.splu(A).solve(rhs)
    assert np.all(u > -1e-14)


def test_resolution_guard():
    with pytest.raises(ResolutionError):
        check_resolution(1.0e-2, 3.0e-2)   # h > s/4
    with pytest.warns(UserWarning):
        check_resolution(5.1e-3, 3.0e-2)   # s/8 < h <= s/4
    check_resolution(3.0e-3, 3.0e-2)       # fine


def test_gradient_exact_for_linear(disk_grid):
    pts = disk_grid.points
    lin = 3.0 * pts[:, 0] - 2.0 * pts[:, 1]
    g = gradient(GridField(disk_grid, lin))
    deep = ~disk_grid.is_adjacent
    assert np.max(np.abs(g[deep, 0] - 3.0)) < 1e-10
    assert np.max(np.abs(g[deep, 1] + 2.0)) < 1e-10


def test_interpolation_and_weights(disk_grid):
    pts = disk_grid.points
    lin = 1.0 + 0.5 * pts[:, 0] + 0.25 * pts[:, 1]
    fld = GridField(disk_grid, lin)
    probe = np.array([[0.111, 0.077], [-0.3, 0.22]])
    vals = interpolate(fld, probe)
    expect = 1.0 + 0.5 * probe[:, 0] + 0.25 * probe[:, 1]
    assert np.max(np.abs(vals - expect)) < 1e-12
    # cell weights sum to the disk area at the O(h) boundary-quadrature order
    assert abs(cell_weights(disk_grid).sum() - np.pi) < 3.0 * disk_grid.h
