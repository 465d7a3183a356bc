"""Singular-value perturbation calculus.

Closed-form first and second derivatives of singular values, the symmetric
embedding that turns singular-value problems into eigenvalue problems, the
reduced resolvent built from its eigenspaces, arbitrary-order expansion
coefficients, and a finite-difference oracle used to validate all of it.

All singular-value indices k are 1-based: sigma(1) is the largest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, OrderOverflow, ZeroSingular
from .matcore import DenseMatrix, SvdTriple, full_svd

GAP_TOL_REL = 1e-8
MAX_EXPANSION_ORDER = 6


def _gap_tol(svd: SvdTriple) -> float:
    top = svd.singulars[0] if svd.singulars.size else 0.0
    return GAP_TOL_REL * top


def _check_index(svd: SvdTriple, k: int):
    if not 1 <= k <= svd.rank:
        raise ZeroSingular(
            f"k={k} outside 1..rank={svd.rank}; derivative has 1/sigma_k terms"
        )


def _check_simple(svd: SvdTriple, k: int, require_all: bool = False):
    """Gap checks for derivative formulas.

    With ``require_all`` every pair of nonzero singular values must be
    separated (the Hessian's denominators run over the whole spectrum);
    otherwise only sigma_k's gaps matter.
    """
    s = svd.singulars
    tol = _gap_tol(svd)
    others = np.delete(s, k - 1)
    if others.size:
        gap = float(np.min(np.abs(others - s[k - 1])))
        if gap <= tol:
            raise DegenerateSpectrum(
                f"sigma_{k} within {gap:.3e} of a neighbor (tol {tol:.3e})", gap=gap
            )
    if require_all and svd.rank >= 2:
        nz = s[: svd.rank]
        pair_gap = float(np.min(np.abs(np.diff(nz))))
        if pair_gap <= tol:
            raise DegenerateSpectrum(
                f"nonzero singular values within {pair_gap:.3e} (tol {tol:.3e})",
                gap=pair_gap,
            )


def sv_jacobian(svd: SvdTriple, k: int) -> DenseMatrix:
    """d sigma_k / dA = u_k v_k^T, valid for simple sigma_k > 0."""
    _check_index(svd, k)
    _check_simple(svd, k)
    return DenseMatrix(np.outer(svd.u(k), svd.v(k)))


def sv_hessian(svd: SvdTriple, k: int) -> DenseMatrix:
    """Hessian of sigma_k in the column-major vec layout (mn x mn).

    Three-part assembly: a left sum over u_i directions (i <= m), a right
    sum over v_j directions (j <= n), and a left-right interaction over the
    nonzero spectrum; singular values beyond the rank count as zero, which
    contributes the 1/sigma_k null-space terms.
    """
    _check_index(svd, k)
    _check_simple(svd, k, require_all=True)
    m, n, r = svd.rows, svd.cols, svd.rank
    s = svd.singulars
    sk = svd.sigma(k)
    uk, vk = svd.u(k), svd.v(k)

    h = np.zeros((m * n, m * n))
    for i in range(1, m + 1):
        if i == k:
            continue
        si = s[i - 1] if i <= r else 0.0
        x = np.kron(vk, svd.u(i))
        h += (sk / (sk**2 - si**2)) * np.outer(x, x)
    for j in range(1, n + 1):
        if j == k:
            continue
        sj = s[j - 1] if j <= r else 0.0
        y = np.kron(svd.v(j), uk)
        h += (sk / (sk**2 - sj**2)) * np.outer(y, y)
    for l in range(1, r + 1):
        if l == k:
            continue
        sl = s[l - 1]
        x = np.kron(vk, svd.u(l))
        y = np.kron(svd.v(l), uk)
        h += (sl / (sk**2 - sl**2)) * (np.outer(x, y) + np.outer(y, x))
    return DenseMatrix(h)


@dataclass(frozen=True)
class JordanWielandt:
    """Symmetric embedding [[0, A], [A^T, 0]] with its eigenvector groups.

    Columns of ``pos_eigvecs``/``neg_eigvecs`` are (u_k; +-v_k)/sqrt(2) for
    the nonzero singular values; ``left_null``/``right_null`` hold (u_j; 0)
    and (0; v_j) spanning the kernel.
    """

    embedding: DenseMatrix
    pos_eigvecs: np.ndarray
    neg_eigvecs: np.ndarray
    left_null: np.ndarray
    right_null: np.ndarray
    sigmas: np.ndarray
    rows: int
    cols: int


def embed(a: DenseMatrix) -> DenseMatrix:
    """[[0, A], [A^T, 0]], the symmetric dilation of A."""
    m, n = a.rows, a.cols
    t = np.zeros((m + n, m + n))
    t[:m, m:] = a.array
    t[m:, :m] = a.array.T
    return DenseMatrix(t)


def jordan_wielandt(svd: SvdTriple) -> JordanWielandt:
    m, n, r = svd.rows, svd.cols, svd.rank
    u = svd.left.array
    v = svd.right.array
    pos = np.vstack([u[:, :r], v[:, :r]]) / np.sqrt(2.0)
    neg = np.vstack([u[:, :r], -v[:, :r]]) / np.sqrt(2.0)
    left_null = np.vstack([u[:, r:], np.zeros((n, m - r))])
    right_null = np.vstack([np.zeros((m, n - r)), v[:, r:]])
    return JordanWielandt(
        embedding=embed(svd.reconstruct()),
        pos_eigvecs=pos,
        neg_eigvecs=neg,
        left_null=left_null,
        right_null=right_null,
        sigmas=np.array(svd.singulars[:r]),
        rows=m,
        cols=n,
    )


@dataclass(frozen=True)
class ReducedResolvent:
    """Dense realization of the reduced resolvent at +sigma_k."""

    k: int
    matrix: DenseMatrix


def reduced_resolvent(jw: JordanWielandt, k: int) -> ReducedResolvent:
    """Spectral sum over every eigenvector of the embedding except
    (u_k; v_k)/sqrt(2): the remaining positive branch, the full negative
    branch (whose i = k term carries weight -1/(2 sigma_k)), and the two
    null groups with weight -1/sigma_k.
    """
    r = jw.sigmas.size
    if not 1 <= k <= r:
        raise ZeroSingular(f"k={k} outside 1..rank={r}")
    sk = jw.sigmas[k - 1]
    others = np.delete(jw.sigmas, k - 1)
    if others.size:
        gap = float(np.min(np.abs(others - sk)))
        tol = GAP_TOL_REL * jw.sigmas[0]
        if gap <= tol:
            raise DegenerateSpectrum(
                f"sigma_{k} within {gap:.3e} of a neighbor (tol {tol:.3e})", gap=gap
            )
    dim = jw.rows + jw.cols
    s_mat = np.zeros((dim, dim))
    for i in range(r):
        wi_pos = jw.pos_eigvecs[:, i]
        wi_neg = jw.neg_eigvecs[:, i]
        if i != k - 1:
            s_mat += np.outer(wi_pos, wi_pos) / (jw.sigmas[i] - sk)
        s_mat += np.outer(wi_neg, wi_neg) / (-jw.sigmas[i] - sk)
    for j in range(jw.left_null.shape[1]):
        a = jw.left_null[:, j]
        s_mat -= np.outer(a, a) / sk
    for j in range(jw.right_null.shape[1]):
        b = jw.right_null[:, j]
        s_mat -= np.outer(b, b) / sk
    return ReducedResolvent(k=k, matrix=DenseMatrix(s_mat))


@dataclass(frozen=True)
class PerturbationSeries:
    """A(x) = base + sum_j x^j terms[j-1]; terms share the base's shape."""

    base: DenseMatrix
    terms: tuple

    def __init__(self, base, terms):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "terms", tuple(terms))
        for t in self.terms:
            if t.shape != base.shape:
                raise ValueError(
                    f"perturbation term shape {t.shape} != base shape {base.shape}"
                )

    def evaluate(self, x: float) -> DenseMatrix:
        acc = np.array(self.base.array)
        for j, t in enumerate(self.terms, start=1):
            acc += (x**j) * t.array
        return DenseMatrix(acc)


def _compositions_positive(n, p):
    """Ordered tuples of p positive integers summing to n."""
    if p == 1:
        yield (n,)
        return
    for first in range(1, n - p + 2):
        for rest in _compositions_positive(n - first, p - 1):
            yield (first,) + rest


def _compositions_nonneg(n, p):
    """Ordered tuples of p nonnegative integers summing to n."""
    if p == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions_nonneg(n - first, p - 1):
            yield (first,) + rest


def sv_expansion_coeff(
    series: PerturbationSeries, k: int, n: int, max_order: int = MAX_EXPANSION_ORDER
) -> float:
    """Coefficient of x^n in the expansion of sigma_k along the series.

    Evaluates the trace form of the analytic expansion on the symmetric
    embedding: over p = 1..n, perturbation orders (nu_1, ..., nu_p) summing
    to n and resolvent exponents (k_1, ..., k_p) summing to p - 1,

        sum (-1)^p / p * tr(T_(nu_1) S^(k_1) ... T_(nu_p) S^(k_p)),

    where S^0 stands for minus the eigenprojection onto (u_k; v_k)/sqrt(2)
    and S^q is the q-th power of the reduced resolvent. The projector
    insertions carry the renormalization by lower-order coefficients; with
    them the values match the Taylor expansion of sigma_k(A(x)) at every
    order (n = 1 reduces to the Jacobian pairing, n = 2 to the Hessian
    quadratic form).
    """
    if n < 1:
        raise ValueError("order must be >= 1")
    if n > max_order:
        raise OrderOverflow(f"order {n} exceeds configured maximum {max_order}")
    svd = full_svd(series.base)
    _check_index(svd, k)
    _check_simple(svd, k)
    jw = jordan_wielandt(svd)
    s_mat = reduced_resolvent(jw, k).matrix.array
    w = jw.pos_eigvecs[:, k - 1]
    dim = s_mat.shape[0]
    s_pow = {0: -np.outer(w, w)}
    if n >= 2:
        s_pow[1] = s_mat
    for q in range(2, n):
        s_pow[q] = s_pow[q - 1] @ s_mat
    embedded = {j: embed(t).array for j, t in enumerate(series.terms, start=1)}
    total = 0.0
    for p in range(1, n + 1):
        for orders in _compositions_positive(n, p):
            if any(idx not in embedded for idx in orders):
                continue  # missing term means T^(j) = 0: the trace vanishes
            for exps in _compositions_nonneg(p - 1, p):
                chain = np.eye(dim)
                for order, exp in zip(orders, exps):
                    chain = chain @ embedded[order] @ s_pow[exp]
                total += ((-1.0) ** p / p) * float(np.trace(chain))
    return total


def fd_gradient_oracle(a: DenseMatrix, k: int, step: float = 1e-6) -> DenseMatrix:
    """Entrywise central-difference estimate of d sigma_k / dA.

    Independent of the closed forms above; values are untrustworthy near
    singular-value crossings (the caller is expected to gate on the gap).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    m, n = a.rows, a.cols
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} outside 1..min(m,n)={min(m, n)}")
    base = np.array(a.array)
    out = np.empty((m, n))
    for i, j in itertools.product(range(m), range(n)):
        bumped = base.copy()
        bumped[i, j] += step
        up = np.linalg.svd(bumped, compute_uv=False)[k - 1]
        bumped[i, j] -= 2 * step
        down = np.linalg.svd(bumped, compute_uv=False)[k - 1]
        out[i, j] = (up - down) / (2 * step)
    return DenseMatrix(out)
