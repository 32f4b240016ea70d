"""Regression fixtures for the three destabilization examples and the
replicated-subsystem scaling experiment."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from typing import Any

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .linalg import BlockPartition, eigenvalues, matrix_from_json, matrix_to_json
from .riccati import SystemLQ, mixed_coupling_indicator, solve_care
from .sensitivity import blockwise_constants, frobenius_bound
from .stability import destabilization_check, sep, stability_radius_continuous

EXAMPLE_IDS = (1, 2, 3)


@dataclass(frozen=True)
class ExampleFixture:
    id: int
    title: str
    system: SystemLQ
    deltaA: np.ndarray
    expected: dict


def load_fixture(example_id: int) -> ExampleFixture:
    if example_id not in EXAMPLE_IDS:
        raise ValidationError(f"unknown example id {example_id!r}; choose from {EXAMPLE_IDS}")
    text = resources.files("ricsense").joinpath("data").joinpath(f"example{example_id}.json").read_text()
    raw = json.loads(text)
    return ExampleFixture(
        raw["id"],
        raw["title"],
        SystemLQ.from_json(raw["system"]),
        matrix_from_json(raw["deltaA"], "deltaA"),
        raw["expected"],
    )


# -- printed-precision comparisons ------------------------------------------


def printed_unit(s: str) -> float:
    """One unit in the last printed digit of a decimal string.

    Trailing zeros of an integer are not significant ("130" -> 10).
    """
    d = Decimal(s.strip().lstrip("+-"))
    if "." in s:
        return 10.0 ** d.as_tuple().exponent
    digits = s.strip().lstrip("+-")
    if set(digits) == {"0"}:
        return 1.0
    return 10.0 ** (len(digits) - len(digits.rstrip("0")))


def matches_printed(value: float, s: str, scale: float = 1.0) -> bool:
    """|value - printed| within one unit of the last printed digit.

    Published reference values mix rounding and truncation, so a one-unit window
    is the tightest rule consistent with both.
    """
    return abs(value - float(s) * scale) <= printed_unit(s) * scale * (1 + 1e-12)


@dataclass
class Check:
    name: str
    passed: bool
    computed: Any
    expected: Any
    tolerance: str

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "computed": self.computed,
            "expected": self.expected,
            "tolerance": self.tolerance,
        }


def _cplx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _match_eigs(computed: np.ndarray, printed: list[list[str]]) -> tuple[bool, list]:
    target = np.array([float(re) + 1j * float(im) for re, im in printed])
    if len(target) != len(computed):
        return False, []
    cost = np.abs(computed[:, None] - target[None, :])
    rows, cols = linear_sum_assignment(cost)
    ok = True
    pairs = []
    for r, c in zip(rows, cols):
        re_s, im_s = printed[c]
        good = matches_printed(computed[r].real, re_s) and matches_printed(computed[r].imag, im_s)
        ok &= good
        pairs.append({"computed": _cplx(computed[r]), "printed": [re_s, im_s], "ok": bool(good)})
    return bool(ok), pairs


def _check_eigs(name: str, computed: np.ndarray, want: dict) -> Check:
    if "printed" in want:
        ok, pairs = _match_eigs(computed, want["printed"])
        return Check(name, ok, pairs, want["printed"], "one unit in last printed digit")
    target = np.array([re + 1j * im for re, im in want["values"]])
    cost = np.abs(computed[:, None] - target[None, :])
    rows, cols = linear_sum_assignment(cost)
    err = float(np.max(cost[rows, cols]))
    return Check(
        name,
        err <= want["abs_tol"],
        [_cplx(z) for z in computed],
        want["values"],
        f"abs {want['abs_tol']:g} (max err {err:.3e})",
    )


def _check_matrix(name: str, M: np.ndarray, want: dict) -> Check:
    scale = float(want.get("scale", "1"))
    printed = want["printed"]
    bad = []
    for i, row in enumerate(printed):
        for j, s in enumerate(row):
            if not matches_printed(M[i, j], s, scale):
                bad.append([i + 1, j + 1, float(M[i, j] / scale), s])
    return Check(
        name,
        not bad,
        {"scale": want.get("scale", "1"), "mismatches": bad, "matrix": (M / scale).tolist()},
        printed,
        "one unit in last printed digit (entries scaled by %s)" % want.get("scale", "1"),
    )


def _check_rel(name: str, value: float, want: dict) -> Check:
    ref = want["value"]
    if "factor" in want:
        f = want["factor"]
        ok = ref / f <= value <= ref * f
        tol = f"within factor {f:g}"
    else:
        ok = abs(value - ref) <= want["rel_tol"] * abs(ref)
        tol = f"rel {want['rel_tol']:g}"
    return Check(name, bool(ok), value, ref, tol)


@dataclass
class ExampleReport:
    id: int
    title: str
    P: np.ndarray
    P_perturbed: np.ndarray
    closed_loop_eigenvalues: np.ndarray
    perturbed_eigenvalues: np.ndarray
    sep: float
    radius: float
    radius_frequency: float
    indicator_base: float
    indicator_perturbed: float
    verdict: dict
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "P": matrix_to_json(self.P),
            "P_perturbed": matrix_to_json(self.P_perturbed),
            "closed_loop_eigenvalues": [_cplx(z) for z in self.closed_loop_eigenvalues],
            "perturbed_eigenvalues": [_cplx(z) for z in self.perturbed_eigenvalues],
            "sep": self.sep,
            "radius": self.radius,
            "radius_frequency": self.radius_frequency,
            "mixed_coupling_indicator": {"base": self.indicator_base, "perturbed": self.indicator_perturbed},
            "destabilization": self.verdict,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }

    def to_text(self) -> str:
        lines = [f"Example {self.id}: {self.title}"]
        lines.append(f"  sep(A_cl, -A_cl^T) = {self.sep:.6g}")
        lines.append(f"  r(A_cl)            = {self.radius:.6g}  (at w = {self.radius_frequency:.6g})")
        lines.append(f"  indicator P / P+dP = {self.indicator_base:.3g} / {self.indicator_perturbed:.3g}")
        lines.append(f"  naive closed loop + dA: {self.verdict['verdict']}")
        width = max(len(c.name) for c in self.checks)
        for c in self.checks:
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name:<{width}}  {c.tolerance}")
        return "\n".join(lines) + "\n"


def run_example(example_id: int) -> ExampleReport:
    fx = load_fixture(example_id)
    sys, dA, exp = fx.system, fx.deltaA, fx.expected
    sol = solve_care(sys)
    sol_p = solve_care(sys.with_A(sys.A + dA))
    A_cl = sol.A_cl
    lam_cl = eigenvalues(A_cl)
    lam_p = eigenvalues(A_cl + dA)
    s = sep(A_cl, -A_cl.T)
    rad = stability_radius_continuous(A_cl)
    part = sys.partition
    ind0 = mixed_coupling_indicator(sol.P, part)
    ind1 = mixed_coupling_indicator(sol_p.P, part)
    verdict = destabilization_check(A_cl, dA)

    checks = [
        _check_eigs("closed_loop_eigenvalues", lam_cl, exp["closed_loop_eigenvalues"]),
        _check_eigs("perturbed_eigenvalues", lam_p, exp["perturbed_eigenvalues"]),
    ]
    if "P" in exp:
        checks.append(_check_matrix("P", sol.P, exp["P"]))
    if "P_perturbed" in exp:
        checks.append(_check_matrix("P_perturbed", sol_p.P, exp["P_perturbed"]))
    checks.append(_check_rel("sep", s, exp["sep"]))
    checks.append(_check_rel("radius", rad.radius, exp["radius"]))
    if "destabilized" in exp:
        got = verdict.verdict == "unstable"
        checks.append(Check("destabilized", got == exp["destabilized"], verdict.verdict, exp["destabilized"], "exact"))
    if "indicator_perturbed_min" in exp:
        checks.append(
            Check("indicator_perturbed", ind1 > exp["indicator_perturbed_min"], ind1, exp["indicator_perturbed_min"], "greater than")
        )
    if "indicator_base_max" in exp:
        checks.append(Check("indicator_base", ind0 < exp["indicator_base_max"], ind0, exp["indicator_base_max"], "less than"))

    return ExampleReport(
        fx.id, fx.title, sol.P, sol_p.P, lam_cl, lam_p, s, rad.radius, rad.witness_frequency,
        ind0, ind1, verdict.to_json(), checks,
    )


# -- scaling experiment ---------------------------------------------------------


@dataclass
class ScalingRow:
    k: int
    frobenius_bound: float
    blockwise_max: float
    frobenius_ratio: float
    blockwise_ratio: float

    def to_json(self) -> dict:
        return self.__dict__.copy()


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    passed: bool

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows], "passed": self.passed}

    def to_text(self) -> str:
        lines = ["    k   F-bound        C-bound        F-ratio   C-ratio"]
        for r in self.rows:
            lines.append(
                f"{r.k:5d}   {r.frobenius_bound:<13.6g}  {r.blockwise_max:<13.6g}  {r.frobenius_ratio:<8.6g}  {r.blockwise_ratio:.6g}"
            )
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def replicate(base: SystemLQ, k: int) -> SystemLQ:
    """k identical copies of a single-subsystem system."""
    I = np.eye(k)
    return SystemLQ(
        np.kron(I, base.A),
        np.kron(I, base.B),
        np.kron(I, base.Q),
        np.kron(I, base.R),
        BlockPartition([base.n] * k),
        base.time_kind,
    )


def run_scaling(base: SystemLQ, ks=(1, 4, 9), *, rtol: float = 1e-9) -> ScalingReport:
    """Frobenius vs block-wise bound growth for k replicated subsystems.

    Both bounds are evaluated per unit perturbation: ||dA||_F = 1 for the
    Frobenius bound and max_ij ||dA_ij||_F = 1 for the block-wise one.
    """
    if base.time_kind != "continuous" or base.partition.k != 1:
        raise ValidationError("scaling base must be a single continuous-time subsystem")
    n0 = base.n
    unit = np.ones((n0, n0)) / n0
    rows = []
    for k in ks:
        sys = replicate(base, int(k))
        sol = solve_care(sys)
        dA = np.zeros((sys.n, sys.n))
        dA[:n0, :n0] = unit
        fb = frobenius_bound(sol, dA)
        cb = float(np.max(blockwise_constants(sol, sys.partition)))
        rows.append(ScalingRow(int(k), fb, cb, math.nan, math.nan))
    f1, c1 = rows[0].frobenius_bound, rows[0].blockwise_max
    k1 = rows[0].k
    ok = True
    for r in rows:
        r.frobenius_ratio = r.frobenius_bound / f1
        r.blockwise_ratio = r.blockwise_max / c1
        ok &= abs(r.frobenius_ratio - math.sqrt(r.k / k1)) <= rtol * math.sqrt(r.k / k1)
        ok &= abs(r.blockwise_ratio - 1.0) <= rtol
    return ScalingReport(rows, bool(ok))
