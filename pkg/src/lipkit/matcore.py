"""Dense matrix primitives: column-major vectorization, Kronecker products,
full SVD with deterministic signs, and the CSV matrix format.

Every structure here is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence

DEFAULT_RANK_TOL = 1e-10


def _freeze(arr):
    arr = np.asarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DenseMatrix:
    """Real rectangular matrix; entries stored column-major.

    Public constructors reject NaN/Inf entries.
    """

    array: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        arr = np.asfortranarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "array", arr)

    @property
    def rows(self):
        return self.array.shape[0]

    @property
    def cols(self):
        return self.array.shape[1]

    @property
    def shape(self):
        return self.array.shape

    @classmethod
    def from_flat(cls, rows, cols, data):
        """Build from a flat column-major sequence of length rows*cols."""
        data = np.asarray(data, dtype=np.float64)
        if data.size != rows * cols:
            raise ValueError(
                f"need {rows * cols} entries for a {rows}x{cols} matrix, got {data.size}"
            )
        return cls(data.reshape((rows, cols), order="F"))

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros((rows, cols)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    def col(self, j):
        """0-based column as a 1-D copy."""
        return np.array(self.array[:, j])

    def __eq__(self, other):
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.array, other.array)


def vec(m: DenseMatrix) -> np.ndarray:
    """Column-major vectorization: entry (i, j) maps to index i + j*rows."""
    out = m.array.ravel(order="F")
    out.flags.writeable = False
    return out


def unvec(data, rows, cols) -> DenseMatrix:
    """Inverse of :func:`vec`."""
    data = np.asarray(data, dtype=np.float64)
    return DenseMatrix.from_flat(rows, cols, data)


def kron(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Kronecker product; block (i, j) of the result is a[i,j] * b."""
    return DenseMatrix(np.kron(a.array, b.array))


@dataclass(frozen=True)
class SvdTriple:
    """Full SVD U diag(s) V^T with rank and spectral-gap metadata.

    ``left`` is m x m, ``right`` is n x n, ``singulars`` has length
    min(m, n) sorted nonincreasing. ``rank`` counts singular values above
    rank_tol * sigma_1; ``min_gap`` is the smallest |s_i - s_j| over
    pairs of retained singular values.
    """

    left: DenseMatrix
    singulars: np.ndarray
    right: DenseMatrix
    rank: int
    min_gap: float
    rank_tol: float = field(default=DEFAULT_RANK_TOL)

    def __post_init__(self):
        object.__setattr__(self, "singulars", _freeze(self.singulars))

    @property
    def rows(self):
        return self.left.rows

    @property
    def cols(self):
        return self.right.rows

    def sigma(self, k):
        """k-th singular value, 1-based (sigma(1) is the largest)."""
        return float(self.singulars[k - 1])

    def u(self, k):
        """k-th left singular vector, 1-based; valid for k <= rows."""
        return self.left.col(k - 1)

    def v(self, k):
        """k-th right singular vector, 1-based; valid for k <= cols."""
        return self.right.col(k - 1)

    def reconstruct(self) -> DenseMatrix:
        m, n = self.rows, self.cols
        sig = np.zeros((m, n))
        r = min(m, n)
        sig[:r, :r] = np.diag(self.singulars)
        return DenseMatrix(self.left.array @ sig @ self.right.array.T)


def _fix_signs(u_full, vt_full):
    """Deterministic sign convention: first entry of each left singular
    vector with magnitude above a relative threshold is made nonnegative;
    the paired right vector flips with it. Unpaired null-space columns are
    normalized independently."""
    m = u_full.shape[0]
    n = vt_full.shape[1]
    paired = min(m, n)
    for k in range(m):
        col = u_full[:, k]
        idx = np.argmax(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))
        if col[idx] < 0:
            u_full[:, k] = -col
            if k < paired:
                vt_full[k, :] = -vt_full[k, :]
    for k in range(paired, n):
        row = vt_full[k, :]
        idx = np.argmax(np.abs(row) > 1e-12 * max(1.0, np.abs(row).max()))
        if row[idx] < 0:
            vt_full[k, :] = -row
    return u_full, vt_full


def full_svd(m: DenseMatrix, rank_tol: float = DEFAULT_RANK_TOL) -> SvdTriple:
    """Full SVD of a DenseMatrix.

    Raises NonConvergence when the underlying LAPACK iteration fails.
    """
    if rank_tol < 0:
        raise ValueError("rank_tol must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(m.array, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"SVD failed to converge on {m.rows}x{m.cols} input") from exc
    u, vt = _fix_signs(np.ascontiguousarray(u), np.ascontiguousarray(vt))
    if s.size and s[0] > 0:
        rank = int(np.sum(s > rank_tol * s[0]))
    else:
        rank = 0
    if s.size >= 2:
        diffs = np.abs(np.subtract.outer(s, s))
        min_gap = float(diffs[np.triu_indices(s.size, k=1)].min())
    else:
        min_gap = float("inf")
    return SvdTriple(
        left=DenseMatrix(u),
        singulars=s,
        right=DenseMatrix(vt.T),
        rank=rank,
        min_gap=min_gap,
        rank_tol=rank_tol,
    )


# ---------------------------------------------------------------------------
# matrix CSV format: one row per line, comma-separated decimals, no header
# ---------------------------------------------------------------------------

def save_matrix_csv(path, m: DenseMatrix):
    with open(path, "w") as fh:
        for i in range(m.rows):
            fh.write(",".join(format(x, ".17g") for x in m.array[i, :]))
            fh.write("\n")


def load_matrix_csv(path) -> DenseMatrix:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a comma-separated number row") from exc
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(f"{path}: row {lineno} has {len(row)} entries, expected {width}")
    return DenseMatrix(np.array(rows))
