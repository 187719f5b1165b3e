import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import least_squares as scipy_lsq

from he2coherence.fitting import FitConfig, FitError, FitProblem, Parameter, least_squares, numeric_jacobian


def decay(x, p):
    return p[0] * np.exp(-x / p[1]) + p[2]


def decay_jac(x, p):
    e = np.exp(-x / p[1])
    return np.column_stack([e, p[0] * e * x / p[1] ** 2, np.ones_like(x)])


def _data(seed=0, noise=0.01):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 10, 60)
    return x, decay(x, [2.0, 3.0, 0.5]) + rng.normal(0, noise, x.size)


PARAMS = [Parameter("a", 1.0, 0, 10), Parameter("tau", 1.0, 0.1, 50), Parameter("c", 0.0, -5, 5)]


def test_matches_scipy_oracle():
    x, y = _data()
    ours = least_squares(FitProblem(decay, x, y, PARAMS))
    ref = scipy_lsq(lambda p: decay(x, p) - y, [1.0, 1.0, 0.0], bounds=([0, 0.1, -5], [10, 50, 5]), xtol=1e-14, ftol=1e-14)
    assert np.allclose(ours.values, ref.x, rtol=1e-6)
    assert ours.converged


def test_uncertainties_match_scipy_covariance():
    x, y = _data(1)
    res = least_squares(FitProblem(decay, x, y, PARAMS))
    J = decay_jac(x, res.values)
    s2 = np.sum((decay(x, res.values) - y) ** 2) / (x.size - 3)
    cov = np.linalg.inv(J.T @ J) * s2
    assert np.allclose(res.uncertainties, np.sqrt(np.diag(cov)), rtol=1e-4)


def test_cost_history_non_increasing():
    x, y = _data(2, 0.05)
    res = least_squares(FitProblem(decay, x, y, PARAMS))
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))


def test_analytic_and_numeric_jacobian_agree():
    x, y = _data()
    prob = FitProblem(decay, x, y, PARAMS)
    p = np.array([1.5, 2.0, 0.1])
    assert np.allclose(numeric_jacobian(prob, p), decay_jac(x, p), rtol=1e-5, atol=1e-7)
    with_jac = least_squares(FitProblem(decay, x, y, PARAMS, jacobian=decay_jac))
    without = least_squares(FitProblem(decay, x, y, PARAMS))
    assert np.allclose(with_jac.values, without.values, rtol=1e-6)


def test_parameter_order_does_not_matter():
    x, y = _data(3)
    a = least_squares(FitProblem(decay, x, y, PARAMS))
    perm = [2, 0, 1]
    model = lambda x, q: decay(x, [q[1], q[2], q[0]])  # noqa: E731
    b = least_squares(FitProblem(model, x, y, [PARAMS[i] for i in perm]))
    assert np.allclose([b["a"], b["tau"], b["c"]], [a["a"], a["tau"], a["c"]], rtol=1e-6)


def test_bounds_respected():
    x, y = _data()
    params = [Parameter("a", 1.0, 0, 1.5), PARAMS[1], PARAMS[2]]
    res = least_squares(FitProblem(decay, x, y, params))
    assert res["a"] == pytest.approx(1.5)


def test_fixed_parameter_untouched():
    x, y = _data()
    params = [PARAMS[0], PARAMS[1], Parameter("c", 0.5, fixed=True)]
    res = least_squares(FitProblem(decay, x, y, params))
    assert res["c"] == 0.5 and res.sigma("c") == 0.0


def test_redundant_parameters_flagged():
    x, y = _data()
    model = lambda x, p: p[0] * p[1] * np.exp(-x / p[2]) + p[3]  # noqa: E731
    params = [Parameter("a", 1.0, 0.1, 10), Parameter("b", 1.0, 0.1, 10), PARAMS[1], PARAMS[2]]
    res = least_squares(FitProblem(model, x, y, params))
    assert any(f.startswith("non-identifiable") for f in res.flags)


def test_input_errors():
    x, y = _data()
    with pytest.raises(FitError):
        FitProblem(decay, x[:3], y[:3], PARAMS)
    with pytest.raises(FitError):
        FitProblem(decay, x, y, [Parameter("a", 5.0, 0, 1)] + PARAMS[1:])
    with pytest.raises(FitError, match="non-finite"), np.errstate(invalid="ignore"):
        least_squares(FitProblem(lambda x, p: np.log(p[0] - 5) + 0 * x, x, y, [Parameter("a", 1.0)]))


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_multistart_deterministic(seed):
    x, y = _data()
    cfg = FitConfig(restarts=3, seed=seed)
    a = least_squares(FitProblem(decay, x, y, PARAMS), cfg)
    b = least_squares(FitProblem(decay, x, y, PARAMS), cfg)
    assert np.array_equal(a.values, b.values)


def test_multistart_escapes_bad_start():
    x = np.linspace(0, 20, 200)
    y = np.sin(1.3 * x)
    model = lambda x, p: np.sin(p[0] * x)  # noqa: E731
    single = least_squares(FitProblem(model, x, y, [Parameter("w", 0.3, 0.1, 3.0)]))
    multi = least_squares(FitProblem(model, x, y, [Parameter("w", 0.3, 0.1, 3.0)]), FitConfig(restarts=20, seed=1))
    assert multi.cost <= single.cost
    assert multi["w"] == pytest.approx(1.3, rel=1e-8)


def test_sigma_weights_residuals():
    x, y = _data()
    sig = np.full_like(y, 0.01)
    res = least_squares(FitProblem(decay, x, y, PARAMS, sigma=sig))
    assert res.cost == pytest.approx(0.5 * np.sum(((decay(x, res.values) - y) / sig) ** 2))
