import math

import numpy as np
import pytest

from ricsense.errors import EmptyMaskError, GridMismatchError, NotConvergedError, ValidationError
from ricsense.ovf import (
    STATE_BOUNDS,
    TARGET_BOUNDS,
    ReactorParams,
    TransitionTable,
    ValueGrid,
    additive_fit,
    bellman_sweeps,
    bilinear_stencil,
    cell_centers,
    compare_ovf,
    control_set,
    map_coupling_constant,
    mixed_difference_ratio,
    q_c,
    reactor_rhs,
    rk4,
    time_T_map,
    value_iteration,
)

TARGET_CENTER = np.array([(295.03 + 299.71) / 2, (304.40 + 308.15) / 2])


# -- model ----------------------------------------------------------------------


def test_qc_branch():
    assert q_c(0.15) == 0 and q_c(0.10) == 0
    assert q_c(1.0) == pytest.approx(8.3e-5 * (1 - math.exp(-8.5)), rel=1e-12)
    assert q_c(1.0) == pytest.approx(8.2983e-5, rel=1e-4)


def test_reference_controls():
    p = ReactorParams()
    assert p.u_bar1 == pytest.approx(0.36, abs=0.005)
    assert p.u_bar2 == 1.0
    p0 = ReactorParams(k2=0.0)
    assert reactor_rhs([297.37, 306.28], [p0.u_bar1, 0.5], p0)[0] == pytest.approx(0.0, abs=1e-15)


def test_params_validation():
    with pytest.raises(ValidationError):
        ReactorParams(k1=-0.1)
    assert ReactorParams().uncoupled().k1 == 0 and ReactorParams().uncoupled().k2 == 0


def test_rhs_broadcasts():
    p = ReactorParams()
    x = np.full((3, 4, 2), 300.0)
    u = np.full((3, 4, 2), 0.5)
    assert reactor_rhs(x, u, p).shape == (3, 4, 2)


# -- integrator ------------------------------------------------------------------


def test_rk4_exponential():
    x, _ = rk4(lambda x: -x, np.array([2.0]), 1.0, 0.01)
    assert x[0] == pytest.approx(2 * math.exp(-1), abs=1e-8)


def test_rk4_fourth_order():
    errs = []
    for h in (4.0, 2.0, 1.0):
        x, _ = rk4(lambda x: -0.05 * x, np.array([1.0]), 200.0, h)
        errs.append(abs(x[0] - math.exp(-10)))
    for a, b in zip(errs, errs[1:]):
        assert 8 <= a / b <= 32


def test_rk4_trapezoid_cost():
    # cost x along x' = 0 is integrated exactly
    _, c = rk4(lambda x: 0 * x, np.array([3.0]), 10.0, 0.5, cost=lambda x: x[0])
    assert c == pytest.approx(30.0)
    with pytest.raises(ValidationError):
        rk4(lambda x: x, np.array([1.0]), 1.0, 0.3)


def test_time_map_equilibrium_uncoupled():
    p = ReactorParams().uncoupled()
    xT, cost = time_T_map(TARGET_CENTER, np.array(p.u_bar), p)
    assert abs(xT[0] - TARGET_CENTER[0]) <= 1e-3
    # reactor 2 cannot be held with u2 in [0, 1]; it relaxes linearly towards
    # its clamped equilibrium, which RK4 reproduces to high accuracy
    rate = p.loss2 / p.heat_cap2
    x_inf = p.ambient_temp + p.heater2 * p.u_bar2 / p.loss2
    exact = x_inf + (TARGET_CENTER[1] - x_inf) * math.exp(-rate * 200.0)
    assert xT[1] == pytest.approx(exact, abs=1e-6)
    assert cost >= 0


def test_time_map_equilibrium_full_state():
    # stated requirement on the whole state; fails while u2 is clamped
    p = ReactorParams().uncoupled()
    xT, _ = time_T_map(TARGET_CENTER, np.array(p.u_bar), p)
    assert np.linalg.norm(xT - TARGET_CENTER) <= 1e-3


def test_time_map_step_halving():
    p = ReactorParams()
    x0, u = np.array([300.0, 310.0]), np.array([0.4, 0.7])
    a, _ = time_T_map(x0, u, p, h=2.0)
    b, _ = time_T_map(x0, u, p, h=1.0)
    assert np.linalg.norm(a - b) <= 1e-6


# -- grid machinery --------------------------------------------------------------


def test_cell_centers():
    g1, g2 = cell_centers(((0.0, 1.0), (0.0, 2.0)), (2, 4))
    assert np.allclose(g1, [0.25, 0.75]) and np.allclose(g2, [0.25, 0.75, 1.25, 1.75])


def test_bilinear_reproduces_linear_functions(rng):
    bounds, cells = ((0.0, 1.0), (0.0, 2.0)), (5, 7)
    g1, g2 = cell_centers(bounds, cells)
    F = 3 * g1[:, None] - 2 * g2[None, :] + 1
    y = np.stack([rng.uniform(g1[0], g1[-1], 50), rng.uniform(g2[0], g2[-1], 50)], axis=-1)
    idx, w = bilinear_stencil(y, bounds, cells)
    vals = np.sum(F.ravel()[idx] * w, axis=-1)
    assert np.allclose(vals, 3 * y[:, 0] - 2 * y[:, 1] + 1)
    assert np.allclose(w.sum(axis=-1), 1)


def test_control_set():
    U = control_set((3, 2))
    assert U.shape == (6, 2) and U.min() == 0 and U.max() == 1


def _toy_table(cost):
    # one cell, one control, landing in the target
    return TransitionTable(
        cost=np.array([[cost]]),
        index=np.zeros((1, 1, 4), int),
        weight=np.array([[[1.0, 0, 0, 0]]]),
        lands_in_target=np.array([[True]]),
        leaves_domain=np.array([[False]]),
    )


def test_one_cell_toy():
    V, sweeps, res, hist = bellman_sweeps(_toy_table(2.5), np.array([False]))
    assert V[0] == 2.5
    assert hist[0] == math.inf and sweeps == 2 and res == 0


def test_not_converged_reports_residual():
    t = TransitionTable(
        cost=np.array([[1.0], [1.0]]),
        index=np.array([[[1, 1, 1, 1]], [[0, 0, 0, 0]]]),
        weight=np.array([[[0.5, 0, 0, 0]], [[0.5, 0, 0, 0]]]),
        lands_in_target=np.array([[False], [True]]),
        leaves_domain=np.array([[False], [False]]),
    )
    with pytest.raises(NotConvergedError) as ei:
        bellman_sweeps(t, np.array([False, False]), tol=0.0, max_sweeps=5)
    assert ei.value.residual is not None


# -- additive fit ----------------------------------------------------------------------


def test_additive_fit_oracles():
    x = np.linspace(-1, 1, 21)
    _, _, e = additive_fit(x[:, None] ** 2 + x[None, :] ** 2)
    assert e < 1e-9
    _, _, e = additive_fit(np.full((5, 6), 3.0))
    assert e < 1e-9
    _, _, e = additive_fit(x[:, None] * x[None, :])
    assert e == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(EmptyMaskError):
        additive_fit(np.full((2, 2), np.inf))


def test_additive_fit_anova_oracle(rng):
    # full-mask least squares fit equals the two-way ANOVA main effects
    V = rng.standard_normal((7, 9))
    a, b, e = additive_fit(V)
    mu = V.mean()
    fit = (V.mean(axis=1) - mu)[:, None] + (V.mean(axis=0) - mu)[None, :] + mu
    assert np.allclose(a[:, None] + b[None, :], fit, atol=1e-8)
    assert e == pytest.approx(np.linalg.norm(V - fit) / np.linalg.norm(V), rel=1e-8)


def test_additive_fit_masked_matches_lstsq(rng):
    V = rng.standard_normal((6, 5))
    mask = rng.uniform(size=V.shape) > 0.3
    mask[:, 0] = mask[0, :] = True
    a, b, e = additive_fit(V, mask)
    rows, cols = np.nonzero(mask)
    X = np.zeros((len(rows), 11))
    X[np.arange(len(rows)), rows] = 1
    X[np.arange(len(rows)), 6 + cols] = 1
    coef, *_ = np.linalg.lstsq(X, V[mask], rcond=None)
    res = np.linalg.norm(V[mask] - X @ coef) / np.linalg.norm(V[mask])
    assert e == pytest.approx(res, rel=1e-6)


def _grid(values):
    values = np.asarray(values, float)
    return ValueGrid(STATE_BOUNDS, values.shape, values, np.zeros(values.shape, bool))


def test_compare_identical_and_mismatch():
    V = _grid(np.arange(12.0).reshape(3, 4) + 1)
    r = compare_ovf(V, V)
    assert r.relative_l2 == 0 and r.relative_sup == 0
    with pytest.raises(GridMismatchError):
        compare_ovf(V, _grid(np.ones((4, 3))))


def test_mixed_difference_ratio():
    x = np.linspace(0, 1, 10)
    assert mixed_difference_ratio(_grid(x[:, None] + x[None, :] ** 2 + 1)) < 1e-12
    assert mixed_difference_ratio(_grid(x[:, None] * x[None, :] + 1)) > 0


def test_grid_exports():
    V = _grid([[0.0, np.inf], [1.5, 2.0]])
    csv = V.to_csv().splitlines()
    assert csv[0] == "x1,x2,V" and csv[2].endswith(",inf") and len(csv) == 5
    js = V.to_json()
    assert js["values"][0][1] is None


# -- full pipeline on a coarse grid ----------------------------------------------------


@pytest.fixture(scope="module")
def coarse():
    return value_iteration(coupled=True, cells=(24, 24), controls=(5, 5))


def test_value_iteration_invariants(coarse):
    V = coarse
    assert np.all(V.values[V.target] == 0)
    assert np.all(V.values[~V.target] > 0)
    assert np.all(V.values >= 0)
    t1, t2 = TARGET_BOUNDS
    assert STATE_BOUNDS[0][0] < t1[0] < t1[1] < STATE_BOUNDS[0][1]
    assert STATE_BOUNDS[1][0] < t2[0] < t2[1] < STATE_BOUNDS[1][1]


def test_residual_non_increasing(coarse):
    h = coarse.residual_history
    assert all(b <= a for a, b in zip(h[1:], h[2:]))
    assert h[-1] < 1e-6


def test_value_iteration_deterministic(coarse):
    again = value_iteration(coupled=True, cells=(24, 24), controls=(5, 5))
    assert np.array_equal(again.values, coarse.values)


@pytest.mark.slow
def test_uncoupled_separability_default_grid():
    Vu = value_iteration(coupled=False)
    assert mixed_difference_ratio(Vu) <= 0.05


@pytest.mark.slow
def test_map_coupling_constant():
    assert map_coupling_constant(ReactorParams().uncoupled(), cells=(8, 8)) == 0
    eps = map_coupling_constant()
    # published figure is "approximately 0.1", read at one significant digit
    assert 0.05 <= eps < 0.15
