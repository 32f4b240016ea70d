"""Dense matrix primitives: norms, spectra, block partitions and the
Kronecker-vectorized Sylvester / Stein solvers.

Everything here works on plain ``numpy`` arrays. Matrices are small
(n <= ~30), so the linear matrix equations are solved by forming the
Kronecker system explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionError, NearSingularError, ValidationError

#: Relative threshold sigma_min / ||K||_2 below which a Kronecker system is
#: declared numerically singular.
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class BlockPartition:
    """Ordered subsystem dimensions ``n_1, ..., n_k``."""

    sizes: tuple[int, ...]

    def __init__(self, sizes: Sequence[int]):
        sizes = tuple(int(s) for s in sizes)
        if not sizes:
            raise ValidationError("partition needs at least one block")
        if any(s <= 0 for s in sizes):
            raise ValidationError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.concatenate([[0], np.cumsum(self.sizes)]).tolist())

    def slices(self) -> list[slice]:
        off = self.offsets
        return [slice(off[i], off[i + 1]) for i in range(self.k)]

    def block(self, M: np.ndarray, i: int, j: int) -> np.ndarray:
        s = self.slices()
        return M[s[i], s[j]]

    def blocks(self, M: np.ndarray) -> Iterator[tuple[int, int, np.ndarray]]:
        s = self.slices()
        for i in range(self.k):
            for j in range(self.k):
                yield i, j, M[s[i], s[j]]

    def check(self, M: np.ndarray) -> None:
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {M.shape}")
        if M.shape[0] != self.n:
            raise DimensionError(
                f"partition {list(self.sizes)} sums to {self.n}, matrix is {M.shape[0]}x{M.shape[1]}"
            )

    def block_diagonal(self, M: np.ndarray) -> np.ndarray:
        """Copy of ``M`` with every off-diagonal block zeroed."""
        out = np.zeros_like(M)
        for s in self.slices():
            out[s, s] = M[s, s]
        return out

    def off_diagonal_norm(self, M: np.ndarray) -> float:
        """Largest Frobenius norm over the off-diagonal blocks (0 when k = 1)."""
        vals = [frobenius_norm(b) for i, j, b in self.blocks(M) if i != j]
        return max(vals, default=0.0)

    def to_json(self) -> dict:
        return {"sizes": list(self.sizes)}

    @classmethod
    def from_json(cls, obj: dict) -> "BlockPartition":
        if not isinstance(obj, dict) or "sizes" not in obj:
            raise ValidationError("partition must be an object with a 'sizes' list")
        return cls(obj["sizes"])

    @classmethod
    def single(cls, n: int) -> "BlockPartition":
        return cls([n])


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a finite 2-D float (or complex) array."""
    arr = np.array(M, dtype=complex if np.iscomplexobj(M) else float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def matrix_to_json(M: np.ndarray) -> dict:
    M = np.asarray(M)
    if np.iscomplexobj(M):
        data = [[float(z.real), float(z.imag)] for z in M.ravel()]
    else:
        data = [float(x) for x in M.ravel()]
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": data}


def matrix_from_json(obj: dict | list, name: str = "matrix") -> np.ndarray:
    """Parse a {rows, cols, data} object (row-major) or a plain list of rows."""
    if isinstance(obj, list) and obj and all(isinstance(r, list) for r in obj):
        try:
            return as_matrix(np.array(obj, dtype=float), name)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{name}: rows must be equal-length lists of numbers") from exc
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: expected {{rows, cols, data}} object") from exc
    if len(data) != rows * cols:
        raise ValidationError(f"{name}: {len(data)} entries for a {rows}x{cols} matrix")
    if data and isinstance(data[0], (list, tuple)):
        arr = np.array([complex(re, im) for re, im in data]).reshape(rows, cols)
    else:
        arr = np.array(data, dtype=float).reshape(rows, cols)
    return as_matrix(arr, name)


def frobenius_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M), "fro")) if np.size(M) else 0.0


def spectral_norm(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def coupling_norm(M, part: BlockPartition) -> float:
    """max over all blocks of the block Frobenius norm."""
    M = np.asarray(M)
    part.check(M)
    return max(frobenius_norm(b) for _, _, b in part.blocks(M))


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues sorted by (real part, imaginary part)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"eigenvalues need a square matrix, got shape {M.shape}")
    lam = np.linalg.eigvals(M).astype(complex)
    return lam[np.lexsort((lam.imag, lam.real))]


def smallest_singular_value(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(x).reshape(rows, cols, order="F")


def sylvester_operator(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Matrix of X -> F X + X G acting on vec(X)."""
    p, q = F.shape[0], G.shape[0]
    return np.kron(np.eye(q), F) + np.kron(G.T, np.eye(p))


def stein_operator(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Matrix of X -> X - M1^T X M2 acting on vec(X)."""
    p, q = M1.shape[0], M2.shape[0]
    return np.eye(p * q) - np.kron(M2.T, M1.T)


def _solve_kron(K: np.ndarray, rhs: np.ndarray, rcond_min: float, what: str) -> np.ndarray:
    if rcond_min > 0:
        sv = np.linalg.svd(K, compute_uv=False)
        if sv[0] == 0 or sv[-1] < rcond_min * sv[0]:
            ratio = sv[-1] / sv[0] if sv[0] else 0.0
            raise NearSingularError(
                f"{what} operator is numerically singular (sigma_min/||K|| = {ratio:.3e})"
            )
    try:
        return np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NearSingularError(f"{what} operator is exactly singular") from exc


def solve_sylvester(F, G, C, *, rcond_min: float = SINGULAR_RTOL) -> np.ndarray:
    """Solve ``F X + X G = C`` for X.

    Parameters
    ----------
    F : (p, p) array
    G : (q, q) array
    C : (p, q) array
    rcond_min : float
        Raise :class:`NearSingularError` if sigma_min / ||K||_2 of the Kronecker
        operator falls below this. Pass 0 to rely on the residual check only.
    """
    F, G, C = (np.asarray(a) for a in (F, G, C))
    p, q = F.shape[0], G.shape[0]
    if F.shape != (p, p) or G.shape != (q, q) or C.shape != (p, q):
        raise DimensionError(f"incompatible shapes F{F.shape} G{G.shape} C{C.shape}")
    K = sylvester_operator(F, G)
    X = unvec(_solve_kron(K, vec(C), rcond_min, "Sylvester"), p, q)
    res = frobenius_norm(F @ X + X @ G - C)
    scale = (frobenius_norm(F) + frobenius_norm(G)) * frobenius_norm(X)
    if rcond_min > 0 and res > 1e-10 * max(scale, frobenius_norm(C)):
        raise NearSingularError(f"Sylvester residual {res:.3e} exceeds tolerance")
    return X


def solve_stein(M1, M2, S, *, rcond_min: float = SINGULAR_RTOL) -> np.ndarray:
    """Solve ``X - M1^T X M2 = S`` for X."""
    M1, M2, S = (np.asarray(a) for a in (M1, M2, S))
    p, q = M1.shape[0], M2.shape[0]
    if M1.shape != (p, p) or M2.shape != (q, q) or S.shape != (p, q):
        raise DimensionError(f"incompatible shapes M1{M1.shape} M2{M2.shape} S{S.shape}")
    K = stein_operator(M1, M2)
    X = unvec(_solve_kron(K, vec(S), rcond_min, "Stein"), p, q)
    res = frobenius_norm(X - M1.T @ X @ M2 - S)
    scale = (1.0 + frobenius_norm(M1) * frobenius_norm(M2)) * frobenius_norm(X)
    if rcond_min > 0 and res > 1e-10 * max(scale, frobenius_norm(S)):
        raise NearSingularError(f"Stein residual {res:.3e} exceeds tolerance")
    return X


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)
