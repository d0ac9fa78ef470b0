import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate

from gumbel_stein.errors import NonConvergence
from gumbel_stein.quad import CutoffPolicy, QuadConfig, integrate_halfline, integrate_interval, integrate_line
from gumbel_stein.rng import RngStream, uniform


def gumbel_pdf(x):
    with np.errstate(over="ignore"):
        return np.exp(-(x + np.exp(-x)))


# --- random streams

def test_same_seed_and_stream_repeat():
    assert uniform(RngStream(42, 0)) == uniform(RngStream(42, 0))


def test_uniform_mean():
    u = RngStream(3, 0).uniforms(10 ** 6)
    assert abs(u.mean() - 0.5) < 0.002


def test_streams_uncorrelated():
    a = RngStream(7, 0).uniforms(10 ** 5)
    b = RngStream(7, 1).uniforms(10 ** 5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_uniforms_strictly_inside_unit_interval():
    u = RngStream(11, 5).uniforms(10 ** 6)
    assert u.min() > 0.0 and u.max() < 1.0


def test_spawn_keeps_master_seed():
    r = RngStream(99, 2).spawn(8)
    assert (r.master_seed, r.stream_id) == (99, 8)
    np.testing.assert_array_equal(r.uniforms(5), RngStream(99, 8).uniforms(5))


def test_negative_stream_rejected():
    with pytest.raises(ValueError):
        RngStream(1, -1)


# --- quadrature

def test_config_validation():
    with pytest.raises(ValueError):
        QuadConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadConfig(rel_tol=-1.0)
    with pytest.raises(ValueError):
        QuadConfig(max_subdivisions=0)
    assert QuadConfig(halfline_cutoff_policy="fixed_window").halfline_cutoff_policy is CutoffPolicy.FIXED_WINDOW


def test_halfline_exponential():
    assert integrate_halfline(lambda x: np.exp(-x), 0.0) == pytest.approx(1.0, abs=1e-12)


def test_halfline_double_exponential_kernel():
    v = integrate_halfline(lambda z: np.exp(-z) * np.exp(-np.exp(-z)), 0.0)
    assert v == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert v == pytest.approx(0.632121, abs=1e-6)


def test_halfline_gumbel_pdf():
    assert integrate_halfline(gumbel_pdf, 0.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)


def test_line_normalisation_and_moments():
    assert integrate_line(gumbel_pdf) == pytest.approx(1.0, abs=1e-12)
    assert integrate_line(lambda x: x * gumbel_pdf(x)) == pytest.approx(np.euler_gamma, abs=1e-10)
    assert integrate_line(lambda x: np.exp(-x) * gumbel_pdf(x)) == pytest.approx(1.0, abs=1e-10)


def test_line_mean_against_sampling():
    u = RngStream(5, 0).uniforms(10 ** 6)
    mc = float(np.mean(-np.log(-np.log(u))))
    assert integrate_line(lambda x: x * gumbel_pdf(x)) == pytest.approx(mc, abs=5 * math.pi / math.sqrt(6) / 1000)


def test_closed_form_family_batch():
    gam = np.geomspace(1e-3, 1e3, 41)
    x = np.linspace(-10, 10, 40)
    G, X = np.meshgrid(gam, x)
    got = integrate_halfline(lambda z, g: np.exp(-z) * np.exp(-g * np.exp(-z)), X.ravel(), args=(G.ravel(),))
    want = -np.expm1(-G.ravel() * np.exp(-X.ravel())) / G.ravel()
    cfg = QuadConfig()
    assert np.all(np.abs(got - want) <= cfg.abs_tol + cfg.rel_tol * np.abs(want))


def test_against_scipy_quad():
    g = lambda z: np.cos(z) * gumbel_pdf(z)
    ref, _ = sp_integrate.quad(lambda z: float(g(np.array(z))), -8, 60, epsabs=1e-13, epsrel=1e-13, limit=400)
    assert integrate_line(g) == pytest.approx(ref, abs=1e-10)


def test_interval():
    assert integrate_interval(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_vector_valued_integrand():
    v = integrate_halfline(lambda x: np.stack([np.exp(-x), x * np.exp(-x)], axis=-1), 0.0)
    np.testing.assert_allclose(v, [1.0, 1.0], atol=1e-12)


def test_fixed_window_policy_truncates():
    cfg = QuadConfig(halfline_cutoff_policy="fixed_window", window=10.0)
    assert integrate_halfline(lambda x: np.exp(-x), 0.0, cfg) == pytest.approx(1 - math.exp(-10), abs=1e-12)


def test_budget_exhaustion_raises():
    cfg = QuadConfig(abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=3)
    with pytest.raises(NonConvergence):
        integrate_interval(lambda x: np.sqrt(np.abs(x - 0.3)), 0.0, 1.0, cfg)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-10, 10))
def test_closed_form_family_property(gam, x):
    got = integrate_halfline(lambda z: np.exp(-z) * np.exp(-gam * np.exp(-z)), x)
    want = -math.expm1(-gam * math.exp(-x)) / gam
    assert abs(got - want) <= 1e-10 + 1e-10 * abs(want)
