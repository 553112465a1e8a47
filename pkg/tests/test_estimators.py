import numpy as np
import pytest
from hypothesis import given, strategies as st

from svolterra.errors import InvalidArgument, UnsupportedScheme
from svolterra.estimators import Accumulator, AsianCall, Moment, TerminalCall, evaluate_payoff, mc_estimate
from svolterra.euler import SchemePath
from svolterra.grid import uniform_grid
from svolterra.models import mech_langevin, volterra_ou


def _const_path(value, n=4, d=1):
    g = uniform_grid(1.0, n)
    return SchemePath(g, np.full((n + 1, d), value))


def test_payoff_examples():
    assert evaluate_payoff(TerminalCall(1.0), _const_path(1.5)) == pytest.approx(0.5)
    assert evaluate_payoff(AsianCall(1.0), _const_path(2.0)) == pytest.approx(1.0)
    assert evaluate_payoff(Moment(3), _const_path(-2.0)) == -8.0
    p = _const_path(1.0, d=3)
    p.values[-1] = [0.0, 5.0, 0.0]
    assert evaluate_payoff(TerminalCall(1.0, component=1), p) == 4.0


def test_asian_right_endpoint():
    g = uniform_grid(2.0, 4)
    vals = np.array([100.0, 1.0, 2.0, 3.0, 4.0])[:, None]
    assert AsianCall(0.0)(vals, g) == pytest.approx(0.5 * 10.0)


def test_payoff_validation():
    with pytest.raises(InvalidArgument):
        evaluate_payoff(TerminalCall(1.0, component=1), _const_path(1.0))
    with pytest.raises(InvalidArgument):
        Moment(0)
    p = _const_path(1.0)
    p.values[2, 0] = np.nan
    assert np.isnan(evaluate_payoff(TerminalCall(), p))


def test_deterministic_model():
    m = volterra_ou(sigma0=0.0, b0=0.0, b1=0.0)
    est = mc_estimate(m, "euler", uniform_grid(1.0, 10), TerminalCall(0.5), 50)
    assert est.stat_error == 0.0 and est.mean == pytest.approx(0.5)
    assert est.cost_units == 50 * 100 and est.diverged_count == 0


def test_worker_invariance_bit_exact():
    m = volterra_ou(H=0.3)
    g = uniform_grid(1.0, 20)
    a = mc_estimate(m, "euler", g, TerminalCall(), 30000, seed=4, workers=1)
    b = mc_estimate(m, "euler", g, TerminalCall(), 30000, seed=4, workers=3)
    assert a.mean == b.mean and a.stat_error == b.stat_error


def test_multiple_payoffs_share_paths():
    m = volterra_ou(H=0.3)
    g = uniform_grid(1.0, 10)
    both = mc_estimate(m, "euler", g, [TerminalCall(), Moment(1)], 2000, seed=1)
    one = mc_estimate(m, "euler", g, Moment(1), 2000, seed=1)
    assert both[1].mean == one.mean


def test_chebyshev_coverage():
    # Euler is exact in mean for the driftless Gaussian case: E[X_T] = x0
    m = volterra_ou(b0=0.0, b1=0.0, H=0.3)
    g = uniform_grid(1.0, 8)
    hits = 0
    for seed in range(50):
        e = mc_estimate(m, "euler", g, Moment(1), 1000, seed=seed)
        hits += abs(e.mean - 1.0) <= 3 * e.stat_error
    assert hits >= 45


def test_scheme_dispatch():
    g = uniform_grid(2.0, 5)
    with pytest.raises(UnsupportedScheme):
        mc_estimate(mech_langevin(), "milstein", g, Moment(1), 10)
    with pytest.raises(InvalidArgument):
        mc_estimate(volterra_ou(), "runge-kutta", g, Moment(1), 10)
    with pytest.raises(InvalidArgument):
        mc_estimate(volterra_ou(), "euler", g, Moment(1), 1)
    e = mc_estimate(volterra_ou(H=0.3), "milstein-auto", uniform_grid(1.0, 5), Moment(1), 100)
    assert np.isfinite(e.mean)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.integers(0, 40), st.integers(0, 40))
def test_accumulator_merge(xs, i, j):
    x = np.array(xs)
    i, j = sorted((min(i, len(x)), min(j, len(x))))
    parts = [Accumulator.of(x[:i]), Accumulator.of(x[i:j]), Accumulator.of(x[j:])]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    whole = Accumulator.of(x)
    for acc in (left, right):
        assert acc.count == whole.count
        assert acc.mean == pytest.approx(whole.mean, rel=1e-9, abs=1e-9)
        assert acc.variance == pytest.approx(whole.variance, rel=1e-7, abs=1e-6)


def test_accumulator_counts_invalid():
    acc = Accumulator.of(np.array([1.0, np.nan, 3.0, np.inf]))
    assert acc.count == 2 and acc.invalid == 2 and acc.mean == 2.0
