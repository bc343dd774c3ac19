import numpy as np
import pytest

from plaplab import (
    FixedRHS,
    GradientForm,
    RadialGrid,
    RadialProblem,
    RadialSolution,
    Weight,
    catalog,
    first_eigenpair,
    green_apply,
    hardy_constant,
    norms,
    rayleigh,
    residual,
    shoot,
)
from plaplab.eigen import hardy_trial, trial_battery
from plaplab.exceptions import InvalidDomain, ZeroDenominator
from plaplab.radial import phi_p, phi_p_inv, sphere_area


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


def test_phi_inverse():
    s = np.linspace(-3, 3, 13)
    assert np.allclose(phi_p_inv(phi_p(s, 3.5), 3.5), s)


def test_poisson_closed_form(grid):
    sol = green_apply(RadialProblem(2, 3, grid=grid))
    r = grid.nodes
    assert np.allclose(sol.u, (1 - r * r) / 6, atol=1e-14)


def test_p_laplacian_torsion(grid):
    # -Delta_p u = 1: u = (p-1)/p N^(-1/(p-1)) (1 - r^(p/(p-1)))
    p, N = 3.0, 3
    sol = green_apply(RadialProblem(p, N, grid=grid))
    r = grid.nodes
    q = p / (p - 1)
    exact = (1 / q) * N ** (-1 / (p - 1)) * (1 - r ** q)
    assert np.allclose(sol.u, exact, atol=1e-12)


def test_atom_gives_fundamental_solution(grid):
    sol = green_apply(RadialProblem(2, 3, lam=0.0, atom_mass=4 * np.pi, grid=grid))
    r = grid.nodes
    assert np.allclose(sol.u[r > 1e-6], (1 / r - 1)[r > 1e-6], rtol=1e-10)
    assert norms(sol).cutoff_slope > 0.9  # gradient not in L^2


def test_power_weight_source(grid):
    # f = r^-1 in N = 3, p = 2: u = (1 - r) / 2
    sol = green_apply(RadialProblem(2, 3, weight=Weight.power(1.0), grid=grid))
    assert np.allclose(sol.u, (1 - grid.nodes) / 2, atol=1e-12)


def test_seminorm_of_quadratic(grid):
    sol = RadialSolution.from_profile(grid, lambda r: 1 - r * r, lambda r: -2 * r, 2, 3)
    assert norms(sol).seminorm == pytest.approx(16 * np.pi / 5, rel=1e-12)


def test_example_nine_shooting_and_residual(grid):
    e = catalog(9, 2.0, Q=1.0)
    pr = RadialProblem(2, 3, lam=2.0, source=GradientForm(e.beta), grid=grid)
    closed = RadialSolution.from_profile(grid, lambda r: (1 - r * r) / 2, lambda r: -r, 2, 3)
    assert residual(closed, pr) <= 1e-6
    shot = shoot(pr, 0.5)
    assert abs(shot.B) <= 1e-6
    assert residual(shot.solution, pr) <= 1e-6


def test_shoot_rejects_atom(grid):
    with pytest.raises(InvalidDomain):
        shoot(RadialProblem(2, 3, atom_mass=1.0, grid=grid), 1.0)


def test_problem_validation():
    with pytest.raises(InvalidDomain, match="p>1"):
        RadialProblem(0.5, 3)
    with pytest.raises(InvalidDomain):
        RadialProblem(4, 3)
    with pytest.raises(InvalidDomain):
        RadialProblem(2, 3, weight=Weight.power(3.0))


def test_p_equal_N_atom_is_flagged(small_grid):
    pr = RadialProblem(2, 2, atom_mass=1.0, source=FixedRHS(0.0), grid=small_grid)
    assert pr.log_branch
    assert green_apply(pr).meta["log_branch"]


@pytest.mark.parametrize("N", [2, 3, 4])
def test_eigenvalue_matches_bessel_zero(N, grid, bessel_zero):
    res = first_eigenpair(Weight.const(1.0), 2.0, N, grid)
    assert res.attained
    assert res.lambda1 == pytest.approx(bessel_zero(N / 2 - 1) ** 2, rel=1e-6)


def test_eigenvalue_p_not_two_bounds(grid):
    # Rayleigh quotients of positive trials bound lambda1 from above
    res = first_eigenpair(Weight.const(1.0), 3.0, 3, grid)
    for w in trial_battery(grid, 3.0, 3):
        assert rayleigh(w, Weight.const(1.0)) >= res.lambda1 * (1 - 1e-8)


def test_hardy_weight_not_attained(grid):
    f = Weight.power(2.0)
    res = first_eigenpair(f, 2.0, 5, grid)
    c = hardy_constant(2.0, 5)
    assert not res.attained
    assert min(res.rayleigh_history) >= c - 1e-6
    q = rayleigh(hardy_trial(grid, 2.0, 5, 0.005), f)
    assert c <= q <= 1.1 * c


def test_rayleigh_zero_denominator(small_grid):
    z = RadialSolution.zero(small_grid, 2.0, 3)
    with pytest.raises(ZeroDenominator):
        rayleigh(z, Weight.const(1.0))


def test_solution_csv(tmp_path, small_grid):
    sol = green_apply(RadialProblem(2, 3, grid=small_grid))
    path = tmp_path / "s.csv"
    sol.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u,u_prime,flux"
    assert len(lines) == small_grid.M + 1


def test_grid_refinement():
    g = RadialGrid.geometric(M=128)
    f = g.refined(2)
    assert f.M == 255 and f.eps0 == g.eps0
