import numpy as np
import pytest

from plaplab import (
    OrderZero,
    RadialProblem,
    RadialSolution,
    build_transform,
    catalog,
    correspondence_check,
    dirac_coefficient,
    energy,
    extremal_solution,
    find_lambda_star,
    green_apply,
    lambda_small,
    lookup,
    minimal_solution,
    regularity_prediction,
    shoot_sweep,
    solve_with_atom,
    stability_check,
    um_family,
)
from plaplab.branch import BranchDiagram, branch_diagram
from plaplab.exceptions import ParamOutOfRange, TransformDomainExceeded, UnsupportedP
from plaplab.growth import classify_growth
from plaplab.radial import norms
from plaplab.singular import family_residual

SQ2 = np.sqrt(2.0)


def bratu(grid, lam=1.0):
    return RadialProblem(2, 2, lam=lam, source=OrderZero(catalog(6, 2.0).g), grid=grid)


def bratu_profile(grid, b, lam):
    # u = ln(8b / (lam (1 + b r^2)^2)) with 8b = lam (1 + b)^2
    u = lambda r: np.log(8 * b / (lam * (1 + b * r * r) ** 2))
    du = lambda r: -4 * b * r / (1 + b * r * r)
    return RadialSolution.from_profile(grid, u, du, 2, 2)


def linear(grid, lam=1.0, atom=0.0):
    return RadialProblem(2, 3, lam=lam, atom_mass=atom, source=OrderZero(lookup("linear", 2).g),
                         grid=grid)


def test_zero_lambda_single_step(grid):
    v = minimal_solution(bratu(grid), 0.0)
    assert v.converged and v.iterations == 1 and v.sup == 0


def test_bratu_lower_branch(grid):
    v = minimal_solution(bratu(grid))
    assert v.converged
    assert v.central_value == pytest.approx(np.log(8 * (3 - 2 * SQ2)), rel=1e-8)
    exact = bratu_profile(grid, 3 - 2 * SQ2, 1.0)
    assert np.max(np.abs(v.u - exact.u)) <= 1e-8


def test_linear_threshold(grid):
    assert minimal_solution(linear(grid), 0.9 * np.pi ** 2).converged
    d = minimal_solution(linear(grid), 1.1 * np.pi ** 2)
    assert not d and d.reason in ("cap", "certificate")


def test_finite_lambda_divergence(small_grid):
    pr = RadialProblem(2, 3, source=OrderZero(catalog(9, 2.0).g), grid=small_grid)
    d = minimal_solution(pr, 100.0)
    assert not d and d.reason == "finite_lambda"


def test_lambda_small_is_convergent_lower_bound(grid):
    pr = bratu(grid)
    lo = lambda_small(pr)
    # w = G(1) = (1 - r^2)/4, so the bound is max_a a e^{-a/4} = 4/e
    assert lo == pytest.approx(4 / np.e, rel=1e-3)
    assert minimal_solution(pr, lo).converged


def test_lambda_star_bratu(grid):
    st = find_lambda_star(bratu(grid))
    assert st.lo < 2.0 <= st.hi * (1 + 1e-9)
    assert st.hi - st.lo <= 1e-4 * st.hi


def test_lambda_star_sublinear(grid):
    pr = RadialProblem(2, 3, source=OrderZero(lookup("power", 2, Q=0.5).g), grid=grid)
    st = find_lambda_star(pr)
    assert st.infinite
    assert {1.0, 10.0, 100.0} <= {lam for lam, ok in st.probes if ok}


def test_extremal_bratu(grid):
    pr = bratu(grid)
    ex = extremal_solution(pr, r=np.inf, growth=classify_growth(pr.source.g, 2, 2))
    assert ex.solution.central_value == pytest.approx(np.log(4), rel=0.02)
    assert ex.central_extrapolated == pytest.approx(np.log(4), rel=0.005)
    assert np.all(np.diff(ex.sups) > 0) and ex.bounded_trend
    assert ex.prediction.extremal_bounded == "bounded"


def test_energy_zero_and_linear_case(grid):
    pr = RadialProblem(2, 3, source=OrderZero(lookup("zero", 2).g), grid=grid)
    assert energy(RadialSolution.zero(grid, 2, 3), 1.0, pr) == 0.0
    v = green_apply(pr.with_(lam=2.0))
    # J = (1/2 - 1) lam int v with v = lam (1 - r^2)/6: int v = lam 4 pi / 45
    assert energy(v, 2.0, pr) == pytest.approx(-0.5 * 2.0 * 2.0 * 4 * np.pi / 45, rel=1e-10)


def test_stability_of_bratu_branches(grid):
    pr = bratu(grid)
    lower = minimal_solution(pr)
    assert stability_check(lower, 1.0, pr) > 0
    upper = bratu_profile(grid, 3 + 2 * SQ2, 1.0)
    assert stability_check(upper, 1.0, pr) < 0


def test_stability_linear_margin(grid):
    pr = linear(grid)
    lam = np.pi ** 2 / 2
    v = minimal_solution(pr, lam)
    # the form is psi'^2 - lam psi^2: its minimum over the span is close to lam1 - lam
    m = stability_check(v, lam, pr)
    assert m == pytest.approx(np.pi ** 2 - lam, rel=0.05)


def test_stability_boundary_layer_needs_graded_grid():
    from plaplab import RadialGrid

    lam = 22992.465073215146
    g = lookup("bounded", 2).g
    for grid in (RadialGrid.geometric(M=4096), RadialGrid.geometric(M=256, grade_to_one=True)):
        pr = RadialProblem(2, 2, source=OrderZero(g), grid=grid)
        v = minimal_solution(pr, lam)
        assert stability_check(v, lam, pr) == pytest.approx(5.7832, rel=1e-3)


def test_stability_needs_p_at_least_two(small_grid):
    pr = RadialProblem(1.5, 3, source=OrderZero(lookup("linear", 1.5).g), grid=small_grid)
    v = minimal_solution(pr, 0.1)
    with pytest.raises(UnsupportedP):
        stability_check(v, 0.1, pr)


def test_sweep_bratu_two_roots(grid):
    curve = shoot_sweep(bratu(grid), 1.0)
    assert len(curve.roots) == 2
    assert curve.roots[0] == pytest.approx(np.log(8 * (3 - 2 * SQ2)), rel=1e-6)
    assert curve.roots[1] == pytest.approx(np.log(8 * (3 + 2 * SQ2)), rel=1e-6)
    assert max(abs(b) for b in curve.root_B) <= 1e-6


def test_sweep_zero_lambda_and_linear(grid):
    assert shoot_sweep(bratu(grid), 0.0).roots == [0.0]
    assert len(shoot_sweep(linear(grid), 5.0, a_max=100.0).roots) == 1


def test_regularity_prediction_numbers():
    pred = regularity_prediction(2, 3)
    assert (pred.N0, pred.N1) == (4.0, 6.0)
    assert pred.extremal_bounded == "bounded" and pred.extremal_in_W1p == "W0^{1,p}"
    far = regularity_prediction(2, 10)
    assert far.extremal_bounded != "bounded"
    assert far.sigma_bar == pytest.approx(1 / (1 - 4 / 10))
    assert np.isinf(regularity_prediction(3, 3).Q1)
    # finite r lowers both thresholds; boot exponents with m = r
    p, N, r = 3.0, 5, 4.0
    pred = regularity_prediction(p, N, r)
    pp = p / (p - 1)
    assert pred.N0 == pytest.approx(p * pp / (1 + 1 / ((p - 1) * r)))
    assert pred.N1 == pytest.approx(p * (1 + pp) / (1 + pp / r))
    assert pred.boot["k_value"] == np.inf  # r > N/p
    assert pred.boot["k_gradient"] == pytest.approx(N * r / (N - r))


def test_regularity_growth_cases():
    rep = classify_growth(lookup("power", 2, Q=1.5).g, 2, 3)
    pred = regularity_prediction(2, 3, np.inf, rep)
    assert pred.growth_case == "i" and pred.growth_bounded
    rep = classify_growth(lookup("power", 2, Q=0.5).g, 2, 3)
    assert regularity_prediction(2, 3, 2.0, rep).growth_case == "iv"


def test_branch_diagram_invariants(small_grid):
    pr = bratu(small_grid)
    diag = branch_diagram(pr, samples=6)
    assert isinstance(diag, BranchDiagram)
    assert np.all(np.diff(diag.sup) >= 0)
    assert np.all(diag.energy < 0)
    assert np.all(diag.margin >= -1e-6)
    assert diag.lambda_samples[-1] <= diag.lambda_star.hi


# singular family and atoms

def test_um_family_values(grid):
    fam = um_family(0.5, 2, 3, grid)
    assert fam.u(1.0) == 0 and fam.v(1.0) == 0
    assert fam.u(0.5) == pytest.approx(np.log(3))
    assert np.allclose(fam.v_sol.u, np.expm1(fam.u_sol.u), rtol=1e-12)
    res_u, res_v = family_residual(fam)
    assert res_u <= 1e-6 and res_v <= 1e-6


@pytest.mark.parametrize("m", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("p,N", [(2.0, 3), (2.5, 4)])
def test_seminorm_dichotomy(m, p, N, grid):
    fam = um_family(m, p, N, grid)
    assert norms(fam.u_sol).seminorm_converged
    assert norms(fam.v_sol).cutoff_slope >= 0.1


def test_dirac_coefficient(grid):
    K = dirac_coefficient(0.5, 2, 3)
    assert K.value == pytest.approx(8 * np.pi)
    assert K.max_rel_error <= 1e-3 and K.monotone_decay
    ks = [dirac_coefficient(m, 2, 3).value for m in (0.1, 0.5, 0.9)]
    assert ks[0] < ks[1] < ks[2]
    # m -> 0 limit: flux of 1/r in three dimensions
    assert dirac_coefficient(1e-12, 2, 3).value == pytest.approx(4 * np.pi)
    # flux of the sampled v_m at r = 1e-6
    fam = um_family(0.5, 2, 3, grid)
    i = np.searchsorted(grid.nodes, 1e-6)
    assert 4 * np.pi * fam.v_sol.flux[i] == pytest.approx(K.value, rel=1e-3)
    with pytest.raises(ParamOutOfRange):
        dirac_coefficient(1.5, 2, 3)


def test_atom_solution_dominates_pure_atom(grid):
    pr = linear(grid, np.pi ** 2 / 2, atom=1.0)
    v = solve_with_atom(pr)
    assert v.converged
    base = green_apply(pr.with_(lam=0.0))
    assert np.all(v.u >= base.u)


def test_atom_zero_reduces_to_minimal(small_grid):
    pr = bratu(small_grid)
    assert np.array_equal(solve_with_atom(pr).u, minimal_solution(pr).u)


def test_large_atom_superlinear_diverges(small_grid):
    pr = RadialProblem(2, 3, lam=20.0, atom_mass=50.0,
                       source=OrderZero(lookup("power", 2, Q=2.0).g), grid=small_grid)
    assert not solve_with_atom(pr)


def test_correspondence_bratu(grid):
    pr = bratu(grid)
    v = minimal_solution(pr)
    rep = correspondence_check(v, build_transform(catalog(6, 2.0).beta, 2.0), pr)
    assert rep.pu_residual <= 1e-5 and abs(rep.alpha_num) <= 1e-5
    assert rep.roundtrip <= 1e-7
    assert np.allclose(rep.u.u, -np.expm1(-v.u))


def test_correspondence_unbounded_g_kills_atom(grid):
    pr = linear(grid, 1.0, atom=1.0)
    v = solve_with_atom(pr)
    rep = correspondence_check(v, build_transform(catalog(1, 2.0).beta, 2.0), pr)
    assert abs(rep.alpha_num) <= 1e-2 and rep.alpha_predicted == 0


def test_correspondence_domain_exceeded(small_grid):
    e = catalog(9, 2.0)
    pr = RadialProblem(2, 3, source=OrderZero(e.g), grid=small_grid)
    bad = RadialSolution.from_profile(small_grid, lambda r: 2 * (1 - r), lambda r: -2 + 0 * r,
                                      2, 3)
    with pytest.raises(TransformDomainExceeded):
        correspondence_check(bad, build_transform(e.beta, 2.0), pr)
