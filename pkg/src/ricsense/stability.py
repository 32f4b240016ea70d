"""Separation operators and stability radii.

``sep(X, Y)`` is the smallest singular value of ``I (x) X - Y^T (x) I``; the
continuous stability radius is ``min_w sigma_min(A - iwI)`` and its discrete
analogue replaces the imaginary axis by the unit circle.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import NotBlockDiagonalError, NotStableError, NumericalFailureError, RhoViolatedError, ValidationError
from .linalg import (
    BlockPartition,
    as_matrix,
    eigenvalues,
    frobenius_norm,
    matrix_to_json,
    smallest_singular_value,
    spectral_norm,
)

DEFAULT_SEED = 20240611
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def sep(X, Y) -> float:
    """sigma_min(I_q (x) X - Y^T (x) I_p)."""
    X, Y = np.asarray(X), np.asarray(Y)
    p, q = X.shape[0], Y.shape[0]
    K = np.kron(np.eye(q), X) - np.kron(Y.T, np.eye(p))
    return smallest_singular_value(K)


def sep_sharp(M1, M2) -> float:
    """sigma_min(I - M1^T (x) M2^T)."""
    M1, M2 = np.asarray(M1), np.asarray(M2)
    K = np.eye(M1.shape[0] * M2.shape[0]) - np.kron(M1.T, M2.T)
    return smallest_singular_value(K)


@dataclass
class RadiusResult:
    radius: float
    witness_frequency: float
    witness_perturbation: np.ndarray | None = None
    kind: Literal["continuous", "discrete"] = "continuous"

    def boundary_point(self) -> complex:
        if self.kind == "continuous":
            return 1j * self.witness_frequency
        return complex(np.exp(1j * self.witness_frequency))

    def to_json(self, include_witness: bool = True) -> dict:
        out = {
            "radius": self.radius,
            "witness_frequency": self.witness_frequency,
            "kind": self.kind,
        }
        if include_witness and self.witness_perturbation is not None:
            out["witness_perturbation"] = matrix_to_json(self.witness_perturbation)
        return out


def _is_hurwitz(A) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def _is_schur(A) -> bool:
    return bool(np.all(np.abs(np.linalg.eigvals(A)) < 1))


def _golden_min(f: Callable[[float], float], a: float, b: float, rtol: float) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rtol * max(1.0, abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _scan_refine(f, lo: float, hi: float, extra, npts: int, rtol: float, n_refine: int = 5):
    grid = np.union1d(np.linspace(lo, hi, npts), np.clip(np.asarray(extra, float), lo, hi))
    vals = np.array([f(w) for w in grid])
    # candidate brackets: the lowest local minima of the scan
    is_min = np.ones(len(grid), bool)
    is_min[1:] &= vals[1:] <= vals[:-1]
    is_min[:-1] &= vals[:-1] <= vals[1:]
    cand = np.flatnonzero(is_min)
    cand = cand[np.argsort(vals[cand])][:n_refine]
    best_w, best_v = grid[int(np.argmin(vals))], float(vals.min())
    for i in cand:
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, len(grid) - 1)]
        if b > a:
            w, v = _golden_min(f, a, b, rtol)
            # keep a scanned point unless refinement beats it by more than rounding
            if v < best_v * (1.0 - 1e-12):
                best_w, best_v = w, v
    return best_w, best_v, grid


def _witness(M: np.ndarray) -> tuple[float, np.ndarray]:
    U, s, Vh = np.linalg.svd(M)
    u, v = U[:, -1], Vh[-1].conj()
    return float(s[-1]), -s[-1] * np.outer(u, v.conj())


def stability_radius_continuous(A, *, npts: int = 2000, rtol: float = 1e-9) -> RadiusResult:
    """Complex stability radius of a Hurwitz matrix."""
    A = as_matrix(A, "A")
    if not _is_hurwitz(A):
        raise NotStableError("matrix is not Hurwitz")
    n = A.shape[0]
    eye = np.eye(n)

    def f(w):
        return smallest_singular_value(A - 1j * w * eye)

    extra = np.abs(np.linalg.eigvals(A).imag)
    hi = 2.0 * spectral_norm(A)
    w, _, grid = _scan_refine(f, 0.0, hi, extra, npts, rtol)
    if w >= grid[-2]:
        w, _, grid = _scan_refine(f, 0.0, 2.0 * hi, extra, npts, rtol)
    r, dA = _witness(A - 1j * w * eye)
    return RadiusResult(r, float(w), dA, "continuous")


def stability_radius_discrete(A, *, npts: int = 2000, rtol: float = 1e-9) -> RadiusResult:
    """Complex stability radius of a Schur-stable matrix (unit circle boundary)."""
    A = as_matrix(A, "A")
    if not _is_schur(A):
        raise NotStableError("matrix is not Schur stable")
    n = A.shape[0]
    eye = np.eye(n)

    def f(t):
        return smallest_singular_value(A - np.exp(1j * t) * eye)

    extra = np.abs(np.angle(np.linalg.eigvals(A)))
    t, _, _ = _scan_refine(f, 0.0, math.pi, extra, npts, rtol)
    r, dA = _witness(A - np.exp(1j * t) * eye)
    return RadiusResult(r, float(t), dA, "discrete")


def he_lower_bound(A) -> float:
    """Lower bound on sep(A, -A^T) in terms of r(A) and ||A||_2."""
    A = as_matrix(A, "A")
    r = stability_radius_continuous(A).radius
    nA = spectral_norm(A)
    return math.pi * r * r * nA / (2.0 * nA * nA + math.pi * r * r)


def robust_sensitivity_bound(sol, deltaA, rho: float) -> float:
    """Leading-order bound on ||dP||_F / ||P||_F for a closed loop with
    r(A_cl) >= rho * ||A_cl||_2."""
    if not 0.0 < rho <= 1.0:
        raise RhoViolatedError(f"rho must lie in (0, 1], got {rho}")
    A_cl = sol.A_cl
    nA = spectral_norm(A_cl)
    r = stability_radius_continuous(A_cl).radius
    if r < rho * nA * (1 - 1e-12):
        raise RhoViolatedError(f"r(A_cl) = {r:.6g} < rho * ||A_cl||_2 = {rho * nA:.6g}")
    return 2.0 * (2.0 / rho**2 + math.pi) * frobenius_norm(deltaA) / (math.pi * nA)


def blockwise_sep(A, part: BlockPartition, *, verify: bool = True) -> float:
    """sep(A, -A^T) of a block-diagonal A from its diagonal blocks."""
    A = as_matrix(A, "A")
    part.check(A)
    if part.off_diagonal_norm(A) > 1e-12 * max(1.0, frobenius_norm(A)):
        raise NotBlockDiagonalError("matrix is not block diagonal with respect to the partition")
    s = part.slices()
    value = min(sep(A[s[i], s[i]], -A[s[j], s[j]].T) for i in range(part.k) for j in range(part.k))
    if verify:
        full = sep(A, -A.T)
        if abs(full - value) > 1e-8 * max(full, value):
            raise NumericalFailureError(f"block-wise sep {value:.6g} disagrees with full sep {full:.6g}")
    return value


@dataclass
class CouplingRadiusBounds:
    lower: float
    upper: float
    directions: int
    best_direction: np.ndarray | None = None

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "directions": self.directions}


def _c_normalize(D: np.ndarray, part: BlockPartition) -> np.ndarray:
    c = max(frobenius_norm(b) for _, _, b in part.blocks(D))
    return D / c


def _crossing_scale(A: np.ndarray, D: np.ndarray, t_cap: float, rtol: float = 1e-10) -> float:
    """Smallest t (by bisection) with A + tD not Hurwitz; inf if none up to t_cap."""
    hi = min(1.0, t_cap)
    while _is_hurwitz(A + hi * D):
        if hi >= t_cap:
            return math.inf
        hi = min(2.0 * hi, t_cap)
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _is_hurwitz(A + mid * D):
            lo = mid
        else:
            hi = mid
    return hi


def coupling_radius_bounds(
    A, part: BlockPartition, *, n_directions: int = 500, seed: int | None = None, workers: int = 1
) -> CouplingRadiusBounds:
    """Bracket the stability radius restricted to coupling perturbations.

    The lower bound is sep(A, -A^T) / (2(k-1)); the upper bound is the smallest
    C-norm of a destabilizing perturbation found along sampled directions with
    zero diagonal blocks.
    """
    A = as_matrix(A, "A")
    part.check(A)
    if part.k < 2:
        raise ValidationError("coupling radius needs at least two blocks")
    if not _is_hurwitz(A):
        raise NotStableError("matrix is not Hurwitz")
    lower = sep(A, -A.T) / (2.0 * (part.k - 1))
    mask = np.ones(A.shape, bool)
    for s in part.slices():
        mask[s, s] = False

    dirs = []
    # structured candidates: unstructured radius witness and block sign patterns
    wit = stability_radius_continuous(A).witness_perturbation
    if np.any(wit[mask] != 0):
        dirs.append(np.where(mask, wit, 0))
    sl = part.slices()
    for i in range(part.k):
        for j in range(i + 1, part.k):
            for sgn in (1.0, -1.0):
                D = np.zeros(A.shape, complex)
                D[sl[i], sl[j]] = 1.0
                D[sl[j], sl[i]] = sgn
                dirs.append(D)
    rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    while len(dirs) < n_directions:
        D = rng.standard_normal(A.shape) + 1j * rng.standard_normal(A.shape)
        dirs.append(np.where(mask, D, 0))
    dirs = [_c_normalize(D, part) for D in dirs[:n_directions]]

    t_cap = 2.0 * part.k * (spectral_norm(A) + 1.0) + lower
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            ts = list(ex.map(lambda D: _crossing_scale(A, D, t_cap), dirs))
    else:
        ts = [_crossing_scale(A, D, t_cap) for D in dirs]
    i = int(np.argmin(ts))
    upper = float(ts[i])
    if upper < lower * (1 - 1e-9):
        raise NumericalFailureError(f"coupling radius bounds inconsistent: {lower:.6g} > {upper:.6g}")
    return CouplingRadiusBounds(lower, upper, len(dirs), dirs[i] if math.isfinite(upper) else None)


@dataclass
class DestabilizationVerdict:
    verdict: Literal["stable", "unstable"]
    base_stable: bool
    perturbed_eigenvalues: np.ndarray
    perturbation_norm_2: float
    radius: float | None
    bound_holds: bool | None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "base_stable": self.base_stable,
            "perturbed_eigenvalues": [[float(z.real), float(z.imag)] for z in self.perturbed_eigenvalues],
            "perturbation_norm_2": self.perturbation_norm_2,
            "radius": self.radius,
            "bound_holds": self.bound_holds,
        }


def destabilization_check(A, deltaA, time_kind: str = "continuous") -> DestabilizationVerdict:
    """Stability of A + deltaA and, if it is lost, the check ||deltaA||_2 >= r(A)."""
    A = as_matrix(A, "A")
    dA = as_matrix(deltaA, "deltaA")
    stable = _is_hurwitz if time_kind == "continuous" else _is_schur
    radius_fn = stability_radius_continuous if time_kind == "continuous" else stability_radius_discrete
    base = stable(A)
    pert = stable(A + dA)
    lam = eigenvalues(A + dA)
    nrm = spectral_norm(dA)
    r = radius_fn(A).radius if base else None
    holds = None
    if base and not pert:
        holds = bool(nrm >= r * (1 - 1e-9))
    return DestabilizationVerdict("stable" if pert else "unstable", base, lam, nrm, r, holds)
