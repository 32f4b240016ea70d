"""Two-reactor thermofluid experiment: time-T map, grid value iteration and
additive (uncoupled) approximation of the optimal value function."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import EmptyMaskError, GridMismatchError, NonFiniteError, NotConvergedError, ValidationError

STATE_BOUNDS = ((285.65, 323.15), (293.15, 323.15))
TARGET_BOUNDS = ((295.03, 299.71), (304.40, 308.15))
SETPOINT = (297.37, 306.28)


@dataclass(frozen=True)
class ReactorParams:
    k1: float = 0.1
    k2: float = 0.2
    heat_cap1: float = 0.0261
    exchange12: float = 2.133e-6
    coolant_temp: float = 285.65
    heat_in1: float = 8.535e-4
    heat_cap2: float = 0.0207
    loss2: float = 1.795e-5
    ambient_temp: float = 293.15
    exchange21: float = 177.6e-6
    heater2: float = 7.622e-5
    qc_gain: float = 83e-6
    qc_threshold: float = 0.15
    qc_scale: float = 0.1
    cost_weight: float = 0.01
    setpoint: tuple[float, float] = SETPOINT
    u_bar1: float | None = None
    u_bar2: float | None = None

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0:
            raise ValidationError("coupling strengths must be nonnegative")
        if self.u_bar1 is None:
            object.__setattr__(self, "u_bar1", equilibrium_control1(self))
        if self.u_bar2 is None:
            object.__setattr__(self, "u_bar2", equilibrium_control2(self))

    def uncoupled(self) -> "ReactorParams":
        return replace(self, k1=0.0, k2=0.0)

    @property
    def u_bar(self) -> tuple[float, float]:
        return (self.u_bar1, self.u_bar2)


def q_c(u1, p: ReactorParams | None = None):
    """Cooling coefficient; zero below the valve threshold."""
    p = p or _DEFAULT_CONSTANTS
    u1 = np.asarray(u1, dtype=float)
    on = u1 >= p.qc_threshold
    val = p.qc_gain * (1.0 - np.exp(-(u1 - p.qc_threshold) / p.qc_scale))
    return np.where(on, val, 0.0)


def equilibrium_control1(p: ReactorParams) -> float:
    """u1 holding reactor 1 at its setpoint without coupling."""
    need = p.heat_in1 / (p.setpoint[0] - p.coolant_temp)
    if not 0 < need < p.qc_gain:
        raise ValidationError("no cooling level holds reactor 1 at the setpoint")
    u = p.qc_threshold - p.qc_scale * math.log(1.0 - need / p.qc_gain)
    return min(max(u, 0.0), 1.0)


def equilibrium_control2(p: ReactorParams) -> float:
    """u2 holding reactor 2 at its setpoint without coupling, clamped to [0, 1]."""
    u = p.loss2 * (p.setpoint[1] - p.ambient_temp) / p.heater2
    return min(max(u, 0.0), 1.0)


def reactor_rhs(x, u, p: ReactorParams) -> np.ndarray:
    """Temperature derivatives; x and u have trailing dimension 2."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    u1, u2 = u[..., 0], u[..., 1]
    d1 = (p.exchange12 * p.k2 * (x2 - x1) + q_c(u1, p) * (p.coolant_temp - x1) + p.heat_in1) / p.heat_cap1
    d2 = (p.loss2 * (p.ambient_temp - x2) + p.exchange21 * p.k1 * (x1 - x2) + p.heater2 * u2) / p.heat_cap2
    return np.stack([d1, d2], axis=-1)


def running_cost(x, u, p: ReactorParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = p.cost_weight
    c1 = w * np.abs(x[..., 0] - p.setpoint[0]) + (u[..., 0] - p.u_bar1) ** 2
    c2 = w * np.abs(x[..., 1] - p.setpoint[1]) + (u[..., 1] - p.u_bar2) ** 2
    return c1 + c2


def rk4(f: Callable, x0, T: float, h: float, cost: Callable | None = None):
    """Classical RK4 over [0, T] with fixed step h.

    ``cost(x)`` is integrated by the trapezoidal rule on the RK4 nodes.
    Returns (x_T, accumulated cost).
    """
    steps = int(round(T / h))
    if steps <= 0 or abs(steps * h - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"step {h} does not divide horizon {T}")
    x = np.asarray(x0, dtype=float)
    acc = 0.5 * h * cost(x) if cost is not None else 0.0
    for s in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if cost is not None:
            acc = acc + (0.5 * h if s == steps - 1 else h) * cost(x)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("trajectory left the finite range")
    return x, acc


def time_T_map(x0, u, p: ReactorParams, T: float = 200.0, h: float = 2.0):
    """State after holding u constant for T seconds, and the cost incurred."""
    u = np.asarray(u, dtype=float)
    return rk4(lambda x: reactor_rhs(x, u, p), x0, T, h, lambda x: running_cost(x, u, p))


# -- grid --------------------------------------------------------------------


@dataclass
class ValueGrid:
    """Values at the centres of a rectangular cell grid."""

    bounds: tuple[tuple[float, float], tuple[float, float]]
    cells: tuple[int, int]
    values: np.ndarray
    target: np.ndarray
    sweeps: int = 0
    residual: float = 0.0
    residual_history: list = field(default_factory=list)

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return cell_centers(self.bounds, self.cells)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "V"])
        g1, g2 = self.axes
        for i, a in enumerate(g1):
            for j, b in enumerate(g2):
                v = self.values[i, j]
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v)) if np.isfinite(v) else "inf"])
        return buf.getvalue()

    def to_json(self) -> dict:
        g1, g2 = self.axes
        return {
            "bounds": [list(b) for b in self.bounds],
            "cells": list(self.cells),
            "x1": g1.tolist(),
            "x2": g2.tolist(),
            "values": [[float(v) if np.isfinite(v) else None for v in row] for row in self.values],
            "target": self.target.astype(int).tolist(),
            "sweeps": self.sweeps,
            "residual": self.residual,
        }


def cell_centers(bounds, cells) -> tuple[np.ndarray, np.ndarray]:
    out = []
    for (lo, hi), n in zip(bounds, cells):
        out.append(lo + (np.arange(n) + 0.5) * (hi - lo) / n)
    return out[0], out[1]


def _in_box(y: np.ndarray, box) -> np.ndarray:
    return (
        (y[..., 0] >= box[0][0])
        & (y[..., 0] <= box[0][1])
        & (y[..., 1] >= box[1][0])
        & (y[..., 1] <= box[1][1])
    )


@dataclass
class TransitionTable:
    """Per (cell, control) data for the Bellman operator on a grid.

    index/weight hold the bilinear stencil (4 corners) into the flattened grid.
    """

    cost: np.ndarray  # (ncell, nctrl)
    index: np.ndarray  # (ncell, nctrl, 4)
    weight: np.ndarray  # (ncell, nctrl, 4)
    lands_in_target: np.ndarray  # (ncell, nctrl)
    leaves_domain: np.ndarray  # (ncell, nctrl)


def bilinear_stencil(y: np.ndarray, bounds, cells):
    """Corner indices and weights for interpolating centre values at y.

    Points between the outermost centres and the domain edge are clamped.
    """
    g = cell_centers(bounds, cells)
    idx, frac = [], []
    for d in range(2):
        step = g[d][1] - g[d][0] if cells[d] > 1 else 1.0
        f = (y[..., d] - g[d][0]) / step
        f = np.clip(f, 0.0, max(cells[d] - 1, 0))
        i = np.minimum(np.floor(f).astype(int), max(cells[d] - 2, 0))
        idx.append(i)
        frac.append(f - i if cells[d] > 1 else np.zeros_like(f))
    i1, i2 = idx
    w1, w2 = frac
    n2 = cells[1]
    j1 = np.minimum(i1 + 1, cells[0] - 1)
    j2 = np.minimum(i2 + 1, cells[1] - 1)
    index = np.stack([i1 * n2 + i2, j1 * n2 + i2, i1 * n2 + j2, j1 * n2 + j2], axis=-1)
    weight = np.stack([(1 - w1) * (1 - w2), w1 * (1 - w2), (1 - w1) * w2, w1 * w2], axis=-1)
    return index, weight


def control_set(controls: tuple[int, int]) -> np.ndarray:
    u1 = np.linspace(0.0, 1.0, controls[0])
    u2 = np.linspace(0.0, 1.0, controls[1])
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    return np.stack([U1.ravel(), U2.ravel()], axis=-1)


def build_transitions(
    p: ReactorParams,
    cells=(64, 64),
    controls=(9, 9),
    T: float = 200.0,
    h: float = 2.0,
    bounds=STATE_BOUNDS,
    target=TARGET_BOUNDS,
) -> TransitionTable:
    g1, g2 = cell_centers(bounds, cells)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    xs = np.stack([X1.ravel(), X2.ravel()], axis=-1)  # (ncell, 2)
    us = control_set(controls)  # (nctrl, 2)
    x0 = np.broadcast_to(xs[:, None, :], (xs.shape[0], us.shape[0], 2))
    uu = np.broadcast_to(us[None, :, :], x0.shape)
    y, cost = time_T_map(x0, uu, p, T, h)
    index, weight = bilinear_stencil(y, bounds, cells)
    return TransitionTable(cost, index, weight, _in_box(y, target), ~_in_box(y, bounds))


def bellman_sweeps(
    table: TransitionTable,
    target_mask: np.ndarray,
    *,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
) -> tuple[np.ndarray, int, float, list]:
    """Jacobi value iteration V <- min_u [cost + V(successor)] from V = +inf
    off the target.

    Returns (flat values, sweeps, final residual, residual history).
    """
    tmask = np.asarray(target_mask, bool).ravel()
    V = np.where(tmask, 0.0, np.inf)
    history = []
    used = table.weight > 0
    for sweep in range(1, max_sweeps + 1):
        corner = V[table.index]
        corner = np.where(used, corner, 0.0)
        # a successor touching an unreachable corner is unreachable
        nxt = np.sum(np.where(used, table.weight * corner, 0.0), axis=-1)
        nxt = np.where(np.any(used & np.isinf(corner), axis=-1), np.inf, nxt)
        nxt = np.where(table.lands_in_target, 0.0, nxt)
        nxt = np.where(table.leaves_domain, np.inf, nxt)
        Vn = np.min(table.cost + nxt, axis=-1)
        Vn[tmask] = 0.0
        # sup |Vn - V| with inf - finite = inf: infinite while the reachable set grows
        if np.any(np.isfinite(Vn) != np.isfinite(V)):
            res = math.inf
        else:
            both = np.isfinite(V)
            res = float(np.max(np.abs(Vn[both] - V[both]), initial=0.0))
        history.append(res)
        V = Vn
        if res < tol:
            return V, sweep, res, history
    raise NotConvergedError(f"value iteration did not converge in {max_sweeps} sweeps", residual=res)


def value_iteration(
    p: ReactorParams | None = None,
    *,
    coupled: bool = True,
    cells=(64, 64),
    controls=(9, 9),
    T: float = 200.0,
    h: float = 2.0,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
) -> ValueGrid:
    """Optimal value function of the time-T map on a cell grid.

    ``coupled=False`` uses k1 = k2 = 0 with the same reference controls.
    """
    p = p or ReactorParams()
    if not coupled:
        p = p.uncoupled()
    cells = tuple(int(c) for c in cells)
    g1, g2 = cell_centers(STATE_BOUNDS, cells)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    tmask = _in_box(np.stack([X1, X2], axis=-1), TARGET_BOUNDS)
    table = build_transitions(p, cells, controls, T, h)
    V, sweeps, res, hist = bellman_sweeps(table, tmask, tol=tol, max_sweeps=max_sweeps)
    return ValueGrid(STATE_BOUNDS, cells, V.reshape(cells), tmask, sweeps, res, hist)


def additive_fit(V, mask=None, *, tol: float = 1e-10, max_iter: int = 100_000):
    """Best L2 fit V1(x1) + V2(x2) on the finite (or given) mask by
    alternating row/column projections.

    Returns (V1, V2, relative error ||V - fit|| / ||V||).
    """
    vals = V.values if isinstance(V, ValueGrid) else np.asarray(V, dtype=float)
    m = np.isfinite(vals) if mask is None else (np.asarray(mask, bool) & np.isfinite(vals))
    if not m.any():
        raise EmptyMaskError("no finite cells to fit")
    W = np.where(m, vals, 0.0)
    rows = m.sum(axis=1)
    cols = m.sum(axis=0)
    a = np.zeros(vals.shape[0])
    b = np.zeros(vals.shape[1])
    scale = max(np.sqrt(np.sum(W**2) / m.sum()), 1e-300)
    for _ in range(max_iter):
        a_new = np.where(rows > 0, ((W - b[None, :]) * m).sum(axis=1) / np.maximum(rows, 1), 0.0)
        b_new = np.where(cols > 0, ((W - a_new[:, None]) * m).sum(axis=0) / np.maximum(cols, 1), 0.0)
        change = max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b)))
        a, b = a_new, b_new
        if change <= tol * scale:
            break
    fit = a[:, None] + b[None, :]
    num = np.sqrt(np.sum(np.where(m, (vals - fit) ** 2, 0.0)))
    den = np.sqrt(np.sum(W**2))
    err = num / den if den > 0 else 0.0
    return np.where(rows > 0, a, np.nan), np.where(cols > 0, b, np.nan), float(err)


def mixed_difference_ratio(V: ValueGrid) -> float:
    """max |second mixed difference| over fully finite 2x2 stencils, relative to max V."""
    v = V.values
    with np.errstate(invalid="ignore"):
        d = v[1:, 1:] - v[1:, :-1] - v[:-1, 1:] + v[:-1, :-1]
    ok = np.isfinite(d)
    vmax = np.max(v[np.isfinite(v)], initial=0.0)
    if not ok.any() or vmax == 0:
        return 0.0
    return float(np.max(np.abs(d[ok])) / vmax)


@dataclass
class ComparisonReport:
    relative_l2: float
    relative_sup: float
    additive_fit_error: float
    common_cells: int
    coupled: ValueGrid
    uncoupled: ValueGrid

    def to_json(self, include_grids: bool = True) -> dict:
        out = {
            "relative_l2": self.relative_l2,
            "relative_sup": self.relative_sup,
            "additive_fit_error": self.additive_fit_error,
            "common_cells": self.common_cells,
            "cells": list(self.coupled.cells),
        }
        if include_grids:
            out["coupled"] = self.coupled.to_json()
            out["uncoupled"] = self.uncoupled.to_json()
        return out


def compare_ovf(V_coupled: ValueGrid, V_uncoupled: ValueGrid) -> ComparisonReport:
    """Relative L2 / sup differences of the coupled OVF to the uncoupled one
    on the cells where both are finite."""
    if V_coupled.cells != V_uncoupled.cells or V_coupled.bounds != V_uncoupled.bounds:
        raise GridMismatchError("value grids differ in shape or bounds")
    m = V_coupled.finite & V_uncoupled.finite
    if not m.any():
        raise EmptyMaskError("no common finite cells")
    c, u = V_coupled.values[m], V_uncoupled.values[m]
    nu2 = np.linalg.norm(u)
    nsup = np.max(np.abs(u))
    l2 = float(np.linalg.norm(c - u) / nu2) if nu2 > 0 else 0.0
    sup = float(np.max(np.abs(c - u)) / nsup) if nsup > 0 else 0.0
    _, _, fit = additive_fit(V_coupled)
    return ComparisonReport(l2, sup, fit, int(m.sum()), V_coupled, V_uncoupled)


def reactor_jacobian(x, u, p: ReactorParams, eps: float = 1e-4) -> np.ndarray:
    """d(rhs)/dx by central differences."""
    x = np.asarray(x, dtype=float)
    J = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        J[:, j] = (reactor_rhs(x + e, u, p) - reactor_rhs(x - e, u, p)) / (2 * eps)
    return J


def map_coupling_constant(
    p: ReactorParams | None = None,
    *,
    cells=(64, 64),
    controls=(9, 9),
    T: float = 200.0,
    h: float = 2.0,
    eps: float = 1e-3,
) -> float:
    """Coupling constant of the time-T map: the largest ratio
    |d Phi_i / d x_j| / |d Phi_i / d x_i| (i != j) over the cell centres and the
    control set, derivatives by central differences."""
    p = p or ReactorParams()
    g1, g2 = cell_centers(STATE_BOUNDS, cells)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    xs = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    us = control_set(controls)
    x0 = np.broadcast_to(xs[:, None, :], (xs.shape[0], us.shape[0], 2))
    uu = np.broadcast_to(us[None, :, :], x0.shape)
    J = np.empty(x0.shape + (2,))
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        fp, _ = time_T_map(x0 + e, uu, p, T, h)
        fm, _ = time_T_map(x0 - e, uu, p, T, h)
        J[..., j] = (fp - fm) / (2 * eps)
    r12 = np.abs(J[..., 0, 1]) / np.abs(J[..., 0, 0])
    r21 = np.abs(J[..., 1, 0]) / np.abs(J[..., 1, 1])
    return float(max(r12.max(), r21.max()))


_DEFAULT_CONSTANTS = ReactorParams(u_bar1=0.0, u_bar2=0.0)
