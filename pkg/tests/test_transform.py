import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from plaplab import EXAMPLE_IDS, GridSpec, build_transform, catalog, g_to_beta, lookup
from plaplab.estimators import ChangeOfUnknown
from plaplab.exceptions import ParamOutOfRange, TransformDomainExceeded, UnknownExample
from plaplab.nonlinearity import from_config, piecewise_linear, sampled
from plaplab.transform import graded_grid, tail_limit


def _probe_points(entry, n=9):
    top = entry.L * 0.9 if np.isfinite(entry.L) else 3.0
    return np.linspace(0.05, top, n)


@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("ident", EXAMPLE_IDS)
def test_catalog_closed_forms_match_quadrature(ident, p):
    # gamma from an adaptive quadrature of beta against the closed-form g(Psi)
    e = catalog(ident, p)
    for t in _probe_points(e, 5):
        gam, _ = quad(lambda s: float(e.beta(s)), 0, t, epsabs=1e-13, epsrel=1e-12)
        lhs = (p - 1) * np.log1p(float(e.g(e.psi(t))))
        assert abs(lhs - gam) <= 1e-9 * (1 + abs(gam))
        psi, _ = quad(lambda s: np.exp(quad(lambda q: float(e.beta(q)), 0, s)[0] / (p - 1)),
                      0, t, epsrel=1e-11)
        assert abs(float(e.psi(t)) - psi) <= 1e-8 * (1 + psi)


@pytest.mark.parametrize("ident", EXAMPLE_IDS)
def test_catalog_inverse_pair(ident):
    e = catalog(ident, 2.0)
    t = _probe_points(e)
    assert np.allclose(e.H(e.psi(t)), t, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("ident", EXAMPLE_IDS)
def test_numerical_tables_match_closed_form(ident):
    e = catalog(ident, 2.0)
    tb = build_transform(e.beta, 2.0)
    t = _probe_points(e)
    t = t[t <= tb.t_max]
    assert np.allclose(tb.psi_at(t), e.psi(t), rtol=1e-8)
    v = e.psi(t)
    assert np.allclose(tb.g_at(v), e.g(v), rtol=1e-7)


def test_endpoint_values():
    assert build_transform(catalog(9, 2.0).beta, 2.0).Lambda == pytest.approx(1.0, abs=1e-6)
    assert build_transform(catalog(10, 2.0).beta, 2.0).Lambda == pytest.approx(np.pi / 2, rel=1e-6)
    tb6 = build_transform(catalog(6, 2.0).beta, 2.0)
    assert tb6.L == 1.0 and np.isinf(tb6.Lambda)


def test_growth_dictionary_flags():
    bounded = build_transform(lookup("bounded", 2.0).beta, 2.0)
    assert bounded.g_bounded
    assert bounded.g_limit == pytest.approx(np.e - 1, rel=1e-6)
    assert not build_transform(catalog(1, 2.0).beta, 2.0).g_bounded


def test_g_to_beta_recovers_beta():
    e = catalog(4, 2.0)
    tb = g_to_beta(e.g, 2.0)
    t = np.linspace(0.1, 2.0, 7)
    assert np.allclose(tb.H(e.psi(t)), t, rtol=1e-9)


def test_round_trip_both_directions():
    e = catalog(5, 3.0)
    fwd = build_transform(e.beta, 3.0)
    back = g_to_beta(e.g, 3.0)
    v = np.geomspace(1e-3, 1e3, 25)
    assert np.allclose(fwd.H(v), back.H(v), rtol=1e-8)


def test_transform_csv_header(tmp_path):
    tb = build_transform(catalog(1, 2.0).beta, 2.0, GridSpec(n=200))
    path = tmp_path / "t.csv"
    tb.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,gamma,psi,g,beta"


def test_psi_beyond_table_raises():
    tb = build_transform(catalog(6, 2.0).beta, 2.0, GridSpec(n=500))
    with pytest.raises(TransformDomainExceeded):
        tb.psi_at(2.0)


def test_catalog_errors():
    with pytest.raises(UnknownExample):
        catalog(11)
    with pytest.raises(ParamOutOfRange):
        catalog(2, 2.0, Q=3.0)
    with pytest.raises(ParamOutOfRange, match="p>1"):
        lookup("linear", 1.0)


def test_nonlinearity_config_round_trip():
    g = piecewise_linear([0.0, 1.0, 3.0], [0.0, 2.0, 5.0])
    again = from_config(g.to_config(), 2.0)
    x = np.linspace(0, 5, 11)
    assert np.allclose(again(x), g(x))
    s = sampled("g", [0.0, 1.0, 2.0], [0.0, 1.0, 4.0])
    assert np.allclose(from_config(s.to_config(), 2.0)(x), s(x))


def test_graded_grid_and_tail_limit():
    x, origin = graded_grid(1.0, 50, endpoint=1.0)
    assert x[0] == 0 and np.all(np.diff(x) > 0) and x[-1] < 1
    partial = np.cumsum(0.5 ** np.arange(60))
    lim, ok = tail_limit(partial)
    assert ok and lim == pytest.approx(2.0, rel=1e-12)
    lim, ok = tail_limit(np.cumsum(1.0 / np.arange(1, 400)))
    assert not ok and np.isinf(lim)


def test_estimator_wrapper():
    est = ChangeOfUnknown("6", p=2.0).fit()
    u = np.array([[0.1, 0.5], [0.7, 0.9]])
    v = est.transform(u)
    assert np.allclose(v, -np.log1p(-u), rtol=1e-9)
    assert np.allclose(est.inverse_transform(v), u, rtol=1e-9)
    assert est.get_params()["p"] == 2.0


@given(st.floats(0.2, 3.0), st.floats(1.2, 4.0), st.floats(0.0, 0.99))
def test_property_power_family_round_trip(Q, p, frac):
    e = lookup("power", p, Q=Q)
    top = e.L * 0.99 if np.isfinite(e.L) else 50.0
    t = frac * top
    assert abs(float(e.H(e.psi(t))) - t) <= 1e-9 * (1 + t)
