"""Continuous and discrete algebraic Riccati equations.

CARE  P B R^-1 B^T P - P A - A^T P - Q = 0       (Newton-Kleinman)
DARE  P = A^T (P - P B (R + B^T P B)^-1 B^T P) A + Q   (recursion + Hewer/Newton)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from .errors import DimensionError, NearSingularError, NotStabilizableError, NumericalFailureError, ValidationError
from .linalg import (
    BlockPartition,
    as_matrix,
    eigenvalues,
    frobenius_norm,
    matrix_from_json,
    matrix_to_json,
    solve_stein,
    solve_sylvester,
    spectral_norm,
    symmetrize,
)

log = logging.getLogger(__name__)

TimeKind = Literal["continuous", "discrete"]


@dataclass
class SystemLQ:
    """Linear system with quadratic cost and a subsystem partition."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    partition: BlockPartition | None = None
    time_kind: TimeKind = "continuous"

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.B = as_matrix(self.B, "B")
        self.Q = as_matrix(self.Q, "Q")
        self.R = as_matrix(self.R, "R")
        n, m = self.A.shape[0], self.B.shape[1]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B has {self.B.shape[0]} rows, A is {n}x{n}")
        if self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise DimensionError(f"Q must be {n}x{n} and R {m}x{m}")
        if self.time_kind not in ("continuous", "discrete"):
            raise ValidationError(f"time_kind must be continuous|discrete, got {self.time_kind!r}")
        if self.partition is None:
            self.partition = BlockPartition.single(n)
        self.partition.check(self.A)
        for name, M in (("Q", self.Q), ("R", self.R)):
            if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14 * max(1.0, frobenius_norm(M))):
                raise ValidationError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(symmetrize(M))[0] <= 0:
                raise ValidationError(f"{name} must be positive definite")
        if self.partition.k >= 2:
            self._check_block_structure()

    def _check_block_structure(self):
        part = self.partition
        if part.off_diagonal_norm(self.Q) != 0.0:
            raise ValidationError("Q must be block diagonal with respect to the partition")
        # B and R are partitioned by input blocks: input block i acts on state block i only.
        rows = part.slices()
        cols = self.input_slices()
        if cols is None:
            raise ValidationError("B must be block diagonal: cannot assign inputs to subsystems")
        for i, ri in enumerate(rows):
            for j, cj in enumerate(cols):
                if i != j and np.any(self.B[ri, cj] != 0):
                    raise ValidationError("B must be block diagonal with respect to the partition")
                if i != j and np.any(self.R[cols[i], cj] != 0):
                    raise ValidationError("R must be block diagonal with respect to the partition")

    def input_slices(self) -> list[slice] | None:
        """Contiguous input-column ranges owned by each subsystem.

        Each input column is assigned to the subsystem whose rows it touches; a
        column touching no rows is attached to the preceding subsystem.
        Returns None when the inputs cannot be split into contiguous blocks.
        """
        owner = []
        rows = self.partition.slices()
        for c in range(self.B.shape[1]):
            hit = [i for i, r in enumerate(rows) if np.any(self.B[r, c] != 0)]
            if len(hit) > 1:
                return None
            owner.append(hit[0] if hit else (owner[-1] if owner else 0))
        if owner != sorted(owner):
            return None
        out = []
        for i in range(self.partition.k):
            idx = [c for c, o in enumerate(owner) if o == i]
            out.append(slice(idx[0], idx[-1] + 1) if idx else slice(0, 0))
        return out

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_A(self, A: np.ndarray) -> "SystemLQ":
        return SystemLQ(A, self.B, self.Q, self.R, self.partition, self.time_kind)

    def to_json(self) -> dict:
        return {
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "Q": matrix_to_json(self.Q),
            "R": matrix_to_json(self.R),
            "partition": self.partition.to_json(),
            "time_kind": self.time_kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SystemLQ":
        if not isinstance(obj, dict):
            raise ValidationError("system must be a JSON object")
        missing = [k for k in ("A", "B", "Q", "R") if k not in obj]
        if missing:
            raise ValidationError(f"system is missing {missing}")
        part = BlockPartition.from_json(obj["partition"]) if "partition" in obj else None
        return cls(
            matrix_from_json(obj["A"], "A"),
            matrix_from_json(obj["B"], "B"),
            matrix_from_json(obj["Q"], "Q"),
            matrix_from_json(obj["R"], "R"),
            part,
            obj.get("time_kind", "continuous"),
        )


@dataclass
class RiccatiSolution:
    P: np.ndarray
    A_cl: np.ndarray
    K: np.ndarray
    residual: float
    system: SystemLQ = field(repr=False)
    iterations: int = 0

    @property
    def time_kind(self) -> TimeKind:
        return self.system.time_kind


def is_stable(A: np.ndarray, time_kind: TimeKind, margin: float = 0.0) -> bool:
    lam = np.linalg.eigvals(A)
    if time_kind == "continuous":
        return bool(np.all(lam.real < -margin))
    return bool(np.all(np.abs(lam) < 1.0 - margin))


def care_residual(sys: SystemLQ, P: np.ndarray) -> float:
    A, B = sys.A, sys.B
    G = B @ np.linalg.solve(sys.R, B.T)
    return frobenius_norm(P @ G @ P - P @ A - A.T @ P - sys.Q)


def dare_residual(sys: SystemLQ, P: np.ndarray) -> float:
    A, B, R = sys.A, sys.B, sys.R
    M = R + B.T @ P @ B
    rhs = A.T @ (P - P @ B @ np.linalg.solve(M, B.T @ P)) @ A + sys.Q
    return frobenius_norm(P - rhs)


def _residual_tol(sys: SystemLQ, P: np.ndarray) -> float:
    return 1e-9 * max(frobenius_norm(P), 1e-300) * max(1.0, frobenius_norm(sys.A))


def closed_loop(sys: SystemLQ, P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (sys.n, sys.n):
        raise DimensionError(f"P must be {sys.n}x{sys.n}, got {P.shape}")
    return sys.A - sys.B @ feedback_gain(sys, P)


def feedback_gain(sys: SystemLQ, P: np.ndarray) -> np.ndarray:
    """u = -K x for the given value matrix."""
    B = sys.B
    if sys.time_kind == "continuous":
        return np.linalg.solve(sys.R, B.T @ P)
    return np.linalg.solve(sys.R + B.T @ P @ B, B.T @ P @ sys.A)


def value_at(P, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(x @ np.asarray(P) @ x)


def mixed_coupling_indicator(P, part: BlockPartition) -> float:
    """Largest off-diagonal block of P relative to the largest diagonal block."""
    P = np.asarray(P)
    part.check(P)
    if part.k < 2:
        raise ValidationError("mixed coupling indicator needs at least two blocks")
    diag = max(frobenius_norm(b) for i, j, b in part.blocks(P) if i == j)
    off = part.off_diagonal_norm(P)
    if diag == 0:
        return 0.0 if off == 0 else float("inf")
    return off / diag


# -- stabilizing initial gains ------------------------------------------------


def _mirror_gain(A: np.ndarray, B: np.ndarray, time_kind: TimeKind) -> np.ndarray | None:
    """Gain that reflects the unstable eigenvalues of A into the stable region.

    The unstable invariant subspace is isolated by an ordered real Schur form;
    on it a Bass-type Lyapunov solve gives the reflecting feedback.
    """
    n, m = B.shape
    if time_kind == "continuous":
        T, U, sdim = scipy.linalg.schur(A, output="real", sort=lambda re, im: re < -1e-9)
    else:
        T, U, sdim = scipy.linalg.schur(A, output="real", sort=lambda re, im: re * re + im * im < 1 - 1e-9)
    if sdim == n:
        return np.zeros((m, n))
    Uu = U[:, sdim:]
    Tu = T[sdim:, sdim:]
    Bu = Uu.T @ B
    nu = Tu.shape[0]
    if time_kind == "continuous":
        beta = 1e-3 * max(1.0, spectral_norm(Tu))
        F = Tu + beta * np.eye(nu)
        Z = solve_sylvester(F, F.T, 2.0 * Bu @ Bu.T, rcond_min=0.0)
        Z = symmetrize(Z)
        try:
            Ku = Bu.T @ np.linalg.inv(Z)
        except np.linalg.LinAlgError:
            return None
        return Ku @ Uu.T
    # discrete: feedback on the unstable part via continuous mirroring of log-map is
    # awkward; place the unstable part at the origin in the least-squares sense.
    Ku, *_ = np.linalg.lstsq(Bu, Tu, rcond=None)
    return Ku @ Uu.T


def stabilizing_gain(sys: SystemLQ) -> np.ndarray:
    A, B = sys.A, sys.B
    tk = sys.time_kind
    try:
        K = _mirror_gain(A, B, tk)
    except (np.linalg.LinAlgError, NearSingularError):
        K = None
    if K is not None and np.all(np.isfinite(K)) and is_stable(A - B @ K, tk):
        return K
    if tk == "continuous":
        for c in 10.0 ** np.arange(0, 9):
            K = c * B.T
            if is_stable(A - B @ K, tk):
                return K
    else:
        # deadbeat-ish least squares, then scaled variants
        K0, *_ = np.linalg.lstsq(B, A, rcond=None)
        for c in (1.0, 0.9, 0.5, 1.1):
            if is_stable(A - B @ (c * K0), tk):
                return c * K0
    raise NotStabilizableError("could not find a stabilizing initial feedback")


# -- CARE -----------------------------------------------------------------------


def solve_care(sys: SystemLQ, *, max_iter: int = 100) -> RiccatiSolution:
    """Stabilizing solution of the continuous algebraic Riccati equation."""
    if sys.time_kind != "continuous":
        raise ValidationError("solve_care needs a continuous-time system")
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    Rinv_Bt = np.linalg.solve(R, B.T)
    K = stabilizing_gain(sys)
    P = None
    best = (np.inf, None)
    prev = np.inf
    for it in range(1, max_iter + 1):
        Ak = A - B @ K
        if not is_stable(Ak, "continuous"):
            raise NotStabilizableError(f"Newton-Kleinman iterate {it} lost stability")
        W = Q + K.T @ R @ K
        P = symmetrize(solve_sylvester(Ak.T, Ak, -W, rcond_min=0.0))
        K = Rinv_Bt @ P
        res = care_residual(sys, P)
        if res < best[0]:
            best = (res, P)
        log.debug("care iter %d residual %.3e", it, res)
        if res <= 1e-3 * _residual_tol(sys, P) or (it > 3 and res <= _residual_tol(sys, P) and res >= 0.5 * prev):
            break
        prev = res
    res, P = best
    if P is None or not np.all(np.isfinite(P)):
        raise NumericalFailureError("Newton-Kleinman produced non-finite iterates")
    A_cl = A - B @ (Rinv_Bt @ P)
    if not is_stable(A_cl, "continuous"):
        raise NotStabilizableError("no stabilizing solution found")
    if res > _residual_tol(sys, P):
        raise NumericalFailureError(f"CARE residual stagnated at {res:.3e}")
    return RiccatiSolution(P, A_cl, Rinv_Bt @ P, res, sys, it)


# -- DARE -----------------------------------------------------------------------


def _dare_step(sys: SystemLQ, P: np.ndarray) -> np.ndarray:
    A, B = sys.A, sys.B
    M = sys.R + B.T @ P @ B
    return symmetrize(A.T @ (P - P @ B @ np.linalg.solve(M, B.T @ P)) @ A + sys.Q)


def solve_dare(sys: SystemLQ, *, max_iter: int = 200, damping: float = 1.0) -> RiccatiSolution:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Runs the Riccati recursion from P = Q until the induced gain stabilizes
    the system, then refines with Newton (Hewer) steps, each one Stein solve.
    """
    if sys.time_kind != "discrete":
        raise ValidationError("solve_dare needs a discrete-time system")
    A, B, Q, R = sys.A, sys.B, sys.Q, sys.R
    P = Q.copy()
    K = None
    it = 0
    for it in range(1, max_iter + 1):
        P = (1 - damping) * P + damping * _dare_step(sys, P)
        Kc = feedback_gain(sys, P)
        if is_stable(A - B @ Kc, "discrete"):
            K = Kc
            break
    if K is None:
        try:
            K = stabilizing_gain(sys)
        except NotStabilizableError:
            raise NotStabilizableError("Riccati recursion did not yield a stabilizing gain") from None
    best = (np.inf, None)
    prev = np.inf
    for it in range(it + 1, max_iter + 1):
        Ak = A - B @ K
        if not is_stable(Ak, "discrete"):
            raise NotStabilizableError(f"Newton iterate {it} lost stability")
        P = symmetrize(solve_stein(Ak, Ak, Q + K.T @ R @ K, rcond_min=0.0))
        K = feedback_gain(sys, P)
        res = dare_residual(sys, P)
        if res < best[0]:
            best = (res, P)
        if res <= 1e-11 * frobenius_norm(P) or (res <= _residual_tol(sys, P) and res >= 0.5 * prev):
            break
        prev = res
    res, P = best
    if P is None or not np.all(np.isfinite(P)):
        raise NumericalFailureError("DARE iteration produced non-finite iterates")
    K = feedback_gain(sys, P)
    A_cl = A - B @ K
    if not is_stable(A_cl, "discrete"):
        raise NotStabilizableError("no stabilizing solution found")
    if res > _residual_tol(sys, P):
        raise NumericalFailureError(f"DARE residual stagnated at {res:.3e}")
    return RiccatiSolution(P, A_cl, K, res, sys, it)


def solve(sys: SystemLQ) -> RiccatiSolution:
    return solve_care(sys) if sys.time_kind == "continuous" else solve_dare(sys)
