import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perforated.domain import HoleSpec, build_grid, unit_ball, unit_square
from perforated.eigen import first_eigenpair, richardson, richardson_lambda, second_eigenvalue
from perforated.errors import NotConnected, ResolutionMismatch
from perforated.operator import assemble, l2_norm_sq

from oracles import DISK_LAMBDA, dense_laplacian, square_lambda


def test_h_third_exact():
    res = first_eigenpair(assemble(build_grid(unit_square(), 3)))
    assert abs(res.lambda1 - 18.0) <= 1e-12 * 18
    assert square_lambda(1 / 3) == pytest.approx(18.0, rel=1e-15)


@pytest.mark.parametrize("res", [8, 17, 32])
def test_square_matches_discrete_closed_form(res):
    r = first_eigenpair(assemble(build_grid(unit_square(), res)))
    assert r.lambda1 == pytest.approx(square_lambda(1 / res), rel=1e-10)


def test_result_invariants():
    grid = build_grid(unit_square([HoleSpec((0.3, 0.6), 0.1)]), 48)
    L = assemble(grid)
    r = first_eigenpair(L, tol=1e-8)
    assert r.residual <= 1e-8
    assert np.all(r.phi1 > 0)
    assert abs(l2_norm_sq(grid, r.phi1) - 1) < 1e-10
    rq = (r.phi1 @ (L.matrix @ r.phi1)) / (r.phi1 @ r.phi1)
    assert abs(rq - r.lambda1) <= 10 * 1e-8 * r.lambda1


def test_matches_dense_oracle():
    grid = build_grid(unit_square([HoleSpec((0.5, 0.5), 0.2, "cube")]), 20, 2.0)
    dense = np.linalg.eigvalsh(dense_laplacian(grid.mask, grid.h))
    r = first_eigenpair(assemble(grid), tol=1e-10)
    assert r.lambda1 == pytest.approx(dense[0], rel=1e-10)
    lam2 = second_eigenvalue(assemble(grid), r.phi1)
    assert lam2 == pytest.approx(dense[1], rel=1e-5)
    assert lam2 > r.lambda1


def test_not_connected():
    holes = [HoleSpec((0.1 + k * 0.1995, 0.5), 0.099) for k in range(5)]
    with pytest.raises(NotConnected):
        first_eigenpair(assemble(build_grid(unit_square(holes), 64)))


def test_degenerate_start_recovers():
    grid = build_grid(unit_square(), 16)
    x = np.zeros(grid.n_active)
    x[0], x[-1] = 1.0, -1.0  # antisymmetric, orthogonal to the Perron vector
    r = first_eigenpair(assemble(grid), x0=x)
    assert r.lambda1 == pytest.approx(square_lambda(1 / 16), rel=1e-10)


def test_richardson_fixed_point_and_mismatch():
    assert richardson(3.5, 3.5, 1) == 3.5
    assert richardson(3.5, 3.5, 2) == 3.5
    with pytest.raises(ResolutionMismatch):
        richardson_lambda(assemble(build_grid(unit_square(), 16)), assemble(build_grid(unit_square(), 24)))


def test_richardson_square_order2():
    lam = richardson_lambda(assemble(build_grid(unit_square(), 64)), assemble(build_grid(unit_square(), 128)), 2)
    assert abs(lam / (2 * math.pi**2) - 1) < 1e-4


def test_richardson_disk_improves():
    lc = first_eigenpair(assemble(build_grid(unit_ball(2), 64))).lambda1
    lf = first_eigenpair(assemble(build_grid(unit_ball(2), 128))).lambda1
    ext = richardson(lc, lf, 1)
    assert abs(ext - DISK_LAMBDA) < min(abs(lc - DISK_LAMBDA), abs(lf - DISK_LAMBDA))


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_domain_monotonicity(eps):
    base = first_eigenpair(assemble(build_grid(unit_square(), 64))).lambda1
    perf = first_eigenpair(assemble(build_grid(unit_square([HoleSpec((0.5, 0.5), eps)]), 64, 2.0))).lambda1
    assert perf >= base


@given(st.floats(0.25, 0.75), st.floats(0.25, 0.75), st.floats(0.04, 0.2))
def test_monotone_and_positive_random_hole(x, y, eps):
    grid = build_grid(unit_square([HoleSpec((x, y), eps)]), 32, 0)
    r = first_eigenpair(assemble(grid))
    assert r.lambda1 >= square_lambda(1 / 32) * (1 - 1e-12)
    assert np.all(r.phi1 > 0)
