"""First-order sensitivity of the Riccati solution with respect to A, and
the perturbation bounds built on it (Frobenius, block-wise, closed-loop,
non-local)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NearSingularError, NotUncoupledError, OutOfDomainError, ValidationError, ZeroDiagonalBlockError
from .linalg import (
    BlockPartition,
    as_matrix,
    frobenius_norm,
    matrix_to_json,
    solve_stein,
    solve_sylvester,
    symmetrize,
)
from .riccati import RiccatiSolution
from .stability import sep, sep_sharp

UNCOUPLED_RTOL = 1e-9


def _delta(sol: RiccatiSolution, deltaA) -> np.ndarray:
    dA = as_matrix(deltaA, "deltaA")
    if dA.shape != sol.P.shape:
        raise ValidationError(f"deltaA must be {sol.P.shape}, got {dA.shape}")
    return dA


def dp_continuous(sol: RiccatiSolution, deltaA) -> np.ndarray:
    """Directional derivative DP(A)·deltaA of the CARE solution.

    Solves X A_cl + A_cl^T X = -(P dA + dA^T P).
    """
    dA = _delta(sol, deltaA)
    P, Acl = sol.P, sol.A_cl
    X = solve_sylvester(Acl.T, Acl, -(P @ dA + dA.T @ P))
    return symmetrize(X)


def dp_discrete(sol: RiccatiSolution, deltaA) -> np.ndarray:
    """Directional derivative of the DARE solution.

    Solves X - A_cl^T X A_cl = A_cl^T P dA + dA^T P A_cl.
    """
    dA = _delta(sol, deltaA)
    P, Acl = sol.P, sol.A_cl
    X = solve_stein(Acl, Acl, Acl.T @ P @ dA + dA.T @ P @ Acl)
    return symmetrize(X)


def dp(sol: RiccatiSolution, deltaA) -> np.ndarray:
    return dp_continuous(sol, deltaA) if sol.time_kind == "continuous" else dp_discrete(sol, deltaA)


def frobenius_bound(sol: RiccatiSolution, deltaA) -> float:
    """2 ||P||_F ||dA||_F / sep(A_cl, -A_cl^T)."""
    dA = _delta(sol, deltaA)
    na = frobenius_norm(dA)
    if na == 0:
        return 0.0
    s = sep(sol.A_cl, -sol.A_cl.T)
    return 2.0 * frobenius_norm(sol.P) * na / s if s > 0 else math.inf


def check_uncoupled(sol: RiccatiSolution, part: BlockPartition) -> None:
    for name, M in (("A", sol.system.A), ("P", sol.P), ("A_cl", sol.A_cl)):
        part.check(M)
        scale = max(frobenius_norm(b) for i, j, b in part.blocks(M) if i == j)
        if part.off_diagonal_norm(M) > UNCOUPLED_RTOL * max(scale, 1e-300):
            raise NotUncoupledError(f"{name} is not block diagonal with respect to {list(part.sizes)}")


def _pair_max(dA: np.ndarray, part: BlockPartition, i: int, j: int) -> float:
    return max(frobenius_norm(part.block(dA, i, j)), frobenius_norm(part.block(dA, j, i)))


def _table(k: int) -> list[list[float | None]]:
    return [[None] * k for _ in range(k)]


def blockwise_constants(sol: RiccatiSolution, part: BlockPartition) -> np.ndarray:
    """Block-wise sensitivity constants, i.e. the block bounds per unit
    block perturbation, for every ordered pair (i, j) including i = j."""
    check_uncoupled(sol, part)
    P, Acl = sol.P, sol.A_cl
    k = part.k
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            Pii, Pjj = part.block(P, i, i), part.block(P, j, j)
            Aii, Ajj = part.block(Acl, i, i), part.block(Acl, j, j)
            if sol.time_kind == "continuous":
                num = frobenius_norm(Pii) + frobenius_norm(Pjj)
                den = sep(Ajj, -Aii.T)
            else:
                num = frobenius_norm(Pii @ Aii) + frobenius_norm(Ajj.T @ Pjj)
                den = sep_sharp(Aii, Ajj)
            out[i, j] = num / den if den > 0 else math.inf
    return out


def blockwise_bound_continuous(sol: RiccatiSolution, deltaA, part: BlockPartition) -> list[list[float | None]]:
    """k x k table of block bounds on ||(DP·dA)_ij||_F; diagonal is None."""
    if sol.time_kind != "continuous":
        raise ValidationError("continuous-time solution required")
    dA = _delta(sol, deltaA)
    c = blockwise_constants(sol, part)
    t = _table(part.k)
    for i in range(part.k):
        for j in range(part.k):
            if i != j:
                t[i][j] = float(c[i, j] * _pair_max(dA, part, i, j))
    return t


def blockwise_bound_discrete(sol: RiccatiSolution, deltaA, part: BlockPartition) -> list[list[float | None]]:
    if sol.time_kind != "discrete":
        raise ValidationError("discrete-time solution required")
    dA = _delta(sol, deltaA)
    c = blockwise_constants(sol, part)
    t = _table(part.k)
    for i in range(part.k):
        for j in range(part.k):
            if i != j:
                t[i][j] = float(c[i, j] * _pair_max(dA, part, i, j))
    return t


def closed_loop_coupling_bound(sol: RiccatiSolution, deltaA, part: BlockPartition) -> list[list[float | None]]:
    """First-order bound on the off-diagonal blocks of the closed-loop change."""
    if sol.time_kind != "continuous":
        raise ValidationError("continuous-time solution required")
    dA = _delta(sol, deltaA)
    c = blockwise_constants(sol, part)
    sys = sol.system
    cols = sys.input_slices() if part.k > 1 else [slice(0, sys.m)]
    rows = part.slices()
    t = _table(part.k)
    for i in range(part.k):
        Bii = sys.B[rows[i], cols[i]]
        Rii = sys.R[cols[i], cols[i]]
        g = frobenius_norm(Bii @ np.linalg.solve(Rii, Bii.T)) if Bii.size else 0.0
        for j in range(part.k):
            if i != j:
                t[i][j] = float((1.0 + g * c[i, j]) * _pair_max(dA, part, i, j))
    return t


def nonlocal_domain(s: float, d: float, p: float, *, rtol: float = 1e-12) -> float:
    """Positive root a* of 2a + 2 sqrt(2 d p a) - s = 0, by bisection on t = sqrt(a)."""
    if s <= 0 or d < 0 or p < 0:
        raise OutOfDomainError("need s > 0 and d, p >= 0")
    c = math.sqrt(2.0 * d * p)

    def h(t):
        return 2.0 * t * t + 2.0 * c * t - s

    lo, hi = 0.0, math.sqrt(s / 2.0)  # h(hi) >= 0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return t * t


def nonlocal_bound(s: float, d: float, p: float, a: float) -> tuple[float, float]:
    """Non-local bound g(a) on ||dP||_F for ||dA||_F = a; returns (g(a), a*)."""
    a_star = nonlocal_domain(s, d, p)
    if a < 0 or a >= a_star:
        raise OutOfDomainError(f"a = {a:.6g} outside [0, a* = {a_star:.6g})")
    disc = (s - 2.0 * a) ** 2 - 8.0 * p * d * a
    if disc < 0:
        raise OutOfDomainError("negative discriminant")
    if d == 0:
        return 2.0 * p * a / (s - 2.0 * a), a_star
    # rationalized form of (s - 2a - sqrt(disc)) / (2d), no cancellation at small a
    return 4.0 * p * a / (s - 2.0 * a + math.sqrt(disc)), a_star


def coupling_constant(A, part: BlockPartition) -> float:
    """max_{i != j} ||A_ij||_F / ||A_ii||_F."""
    A = as_matrix(A, "A")
    part.check(A)
    best = 0.0
    for i in range(part.k):
        dii = frobenius_norm(part.block(A, i, i))
        if dii == 0:
            raise ZeroDiagonalBlockError(f"diagonal block {i} is zero")
        for j in range(part.k):
            if i != j:
                best = max(best, frobenius_norm(part.block(A, i, j)) / dii)
    return best


@dataclass
class SensitivityReport:
    deltaP_first_order: np.ndarray | None
    frobenius_bound: float | None
    blockwise_bounds: list | None
    closed_loop_blockwise_bounds: list | None
    nonlocal_bound: float | None
    nonlocal_domain_a_star: float | None
    coupling_constant: float | None
    notes: list[str]

    def to_json(self) -> dict:
        return {
            "deltaP_first_order": None if self.deltaP_first_order is None else matrix_to_json(self.deltaP_first_order),
            "frobenius_bound": self.frobenius_bound,
            "blockwise_bounds": self.blockwise_bounds,
            "closed_loop_blockwise_bounds": self.closed_loop_blockwise_bounds,
            "nonlocal_bound": self.nonlocal_bound,
            "nonlocal_domain_a_star": self.nonlocal_domain_a_star,
            "coupling_constant": self.coupling_constant,
            "notes": self.notes,
        }


def sensitivity_report(sol: RiccatiSolution, deltaA, part: BlockPartition | None = None) -> SensitivityReport:
    """Evaluate every applicable bound for one (system, deltaA) pair.

    Bounds whose preconditions fail are left as None with a note.
    """
    dA = _delta(sol, deltaA)
    part = part or sol.system.partition
    notes = []
    cont = sol.time_kind == "continuous"
    try:
        X = dp(sol, dA)
    except NearSingularError as exc:
        X = None
        notes.append(f"first-order dP unavailable: {exc}")
    fb = frobenius_bound(sol, dA) if cont else None
    bw = clb = None
    if part.k >= 2:
        try:
            if cont:
                bw = blockwise_bound_continuous(sol, dA, part)
                clb = closed_loop_coupling_bound(sol, dA, part)
            else:
                bw = blockwise_bound_discrete(sol, dA, part)
        except NotUncoupledError as exc:
            notes.append(f"block-wise bounds skipped: {exc}")
    nl = a_star = None
    if cont:
        s = sep(sol.A_cl, -sol.A_cl.T)
        sys = sol.system
        d = frobenius_norm(sys.B @ np.linalg.solve(sys.R, sys.B.T))
        p = frobenius_norm(sol.P)
        if s > 0:
            a_star = nonlocal_domain(s, d, p)
            try:
                nl, _ = nonlocal_bound(s, d, p, frobenius_norm(dA))
            except OutOfDomainError as exc:
                notes.append(f"non-local bound undefined: {exc}")
    cc = None
    if part.k >= 2:
        try:
            cc = coupling_constant(sol.system.A + dA, part)
        except ZeroDiagonalBlockError as exc:
            notes.append(f"coupling constant undefined: {exc}")
    return SensitivityReport(X, fb, bw, clb, nl, a_star, cc, notes)
