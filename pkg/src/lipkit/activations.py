"""Lipschitz constants of standard activation functions.

Closed forms reproduce the exact suprema of |f'| (the spectral norm of the
Jacobian for the vector-valued case), and numerical maximizers provide an
independent check of each value.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.optimize
from scipy.special import erf, expit

from .errors import NotSimplex, UnknownActivation
from .matcore import DenseMatrix

ELEMENTWISE = ("relu", "leaky_relu", "sigmoid", "tanh", "softplus", "elu", "swish", "gelu")
NAMES = ELEMENTWISE + ("softmax",)

# probe points for the fn/derivative consistency check; none sits on the
# relu/elu kink at 0
_PROBE = np.linspace(-6.0, 6.0, 24)
_FD_STEP = 1e-5
_FD_TOL = 1e-6


@dataclass(frozen=True)
class ActivationSpec:
    """A named activation with scalar callbacks (softmax carries a dim instead)."""

    name: str
    alpha: float = 1.0
    dim: int = 0
    scalar_fn: Optional[Callable] = None
    scalar_derivative: Optional[Callable] = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise UnknownActivation(f"unknown activation {self.name!r}")
        if self.name == "softmax":
            if self.dim < 2:
                raise ValueError("softmax needs dim >= 2")
            return
        if self.scalar_fn is None or self.scalar_derivative is None:
            raise ValueError(f"{self.name} needs scalar_fn and scalar_derivative")
        fd = (self.scalar_fn(_PROBE + _FD_STEP) - self.scalar_fn(_PROBE - _FD_STEP)) / (
            2 * _FD_STEP
        )
        err = np.max(np.abs(fd - self.scalar_derivative(_PROBE)))
        if err > _FD_TOL:
            raise ValueError(
                f"derivative callback disagrees with fn (max dev {err:.2e} > {_FD_TOL})"
            )


def _phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _norm_cdf(x):
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def make_activation(name: str, alpha: float = 1.0, dim: int = 0) -> ActivationSpec:
    """Build the spec for a named activation from the supported table."""
    if name == "softmax":
        return ActivationSpec(name="softmax", dim=dim)
    if name == "relu":
        fn = lambda x: np.maximum(0.0, x)
        d = lambda x: np.where(x > 0, 1.0, 0.0)
    elif name == "leaky_relu":
        fn = lambda x: np.maximum(alpha * x, x)
        d = lambda x: np.where(alpha * x > x, alpha, 1.0)
    elif name == "sigmoid":
        fn = expit
        d = lambda x: expit(x) * (1.0 - expit(x))
    elif name == "tanh":
        fn = np.tanh
        d = lambda x: 1.0 - np.tanh(x) ** 2
    elif name == "softplus":
        fn = lambda x: np.logaddexp(0.0, x)
        d = expit
    elif name == "elu":
        fn = lambda x: np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))
        d = lambda x: np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))
    elif name == "swish":
        fn = lambda x: x * expit(x)
        d = lambda x: expit(x) + x * expit(x) * (1.0 - expit(x))
    elif name == "gelu":
        fn = lambda x: x * _norm_cdf(x)
        d = lambda x: _norm_cdf(x) + x * _phi(x)
    else:
        raise UnknownActivation(f"unknown activation {name!r}")
    return ActivationSpec(name=name, alpha=alpha, scalar_fn=fn, scalar_derivative=d)


@functools.lru_cache(maxsize=1)
def _swish_constant():
    # maximizer of d/dx [x*sigmoid(x)] solves x * tanh(x/2) = 2
    x_star = scipy.optimize.brentq(
        lambda x: x * math.tanh(0.5 * x) - 2.0, 2.0, 3.0, xtol=1e-14
    )
    return 0.5 + 0.25 * x_star


def closed_form_lipschitz(a: ActivationSpec) -> float:
    """Exact Lipschitz constant of the activation."""
    if a.name == "relu":
        return 1.0
    if a.name in ("leaky_relu", "elu"):
        return max(1.0, a.alpha)
    if a.name == "sigmoid":
        return 0.25
    if a.name in ("tanh", "softplus"):
        return 1.0
    if a.name == "swish":
        return _swish_constant()
    if a.name == "gelu":
        # value of Phi + x*phi at its critical point x = sqrt(2)
        return 0.5 * (1.0 + math.erf(1.0)) + math.exp(-1.0) / math.sqrt(math.pi)
    if a.name == "softmax":
        return 0.5
    raise UnknownActivation(f"unknown activation {a.name!r}")


@dataclass(frozen=True)
class NumericLipschitz:
    value: float
    attained: bool  # False when the grid max sits on the domain boundary
    argmax: float


def numeric_scalar_lipschitz(
    a: ActivationSpec, domain=(-20.0, 20.0), grid: int = 2048
) -> NumericLipschitz:
    """sup |f'| over a dense grid, refined by a bounded search in the
    bracketing cells. Suprema approached only at the boundary (softplus)
    are reported with attained=False rather than clamped."""
    if a.name == "softmax":
        raise UnknownActivation("softmax is not elementwise; use numeric_softmax_lipschitz")
    if grid < 64:
        raise ValueError("grid must be >= 64")
    lo, hi = float(domain[0]), float(domain[1])
    xs = np.linspace(lo, hi, grid)
    vals = np.abs(a.scalar_derivative(xs))
    idx = int(np.argmax(vals))
    best_x, best = float(xs[idx]), float(vals[idx])
    left = xs[max(0, idx - 1)]
    right = xs[min(grid - 1, idx + 1)]
    if right > left:
        res = scipy.optimize.minimize_scalar(
            lambda x: -abs(float(a.scalar_derivative(np.asarray(x)))),
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best:
            best, best_x = float(-res.fun), float(res.x)
    attained = not (idx == 0 or idx == grid - 1)
    return NumericLipschitz(value=best, attained=attained, argmax=best_x)


def softmax_jacobian(p) -> DenseMatrix:
    """diag(p) - p p^T for a probability vector p; symmetric PSD, rows sum to 0."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise NotSimplex("expected a 1-D probability vector")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-10:
        raise NotSimplex(
            f"entries must be >= 0 and sum to 1 (sum = {p.sum():.12g})"
        )
    return DenseMatrix(np.diag(p) - np.outer(p, p))


def _softmax(z):
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def numeric_softmax_lipschitz(dim: int, restarts: int = 10, seed: int = 0) -> float:
    """Maximize ||diag(p) - p p^T||_2 over logits by seeded multi-start
    simplex search. The supremum 1/2 is approached as the mass concentrates
    on two coordinates."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(seed)

    def objective(z):
        p = _softmax(z)
        return -float(np.linalg.eigvalsh(np.diag(p) - np.outer(p, p))[-1])

    best = 0.0
    for trial in range(restarts):
        if trial == 0:
            z0 = np.zeros(dim)
        elif trial % 2 == 1:
            z0 = rng.standard_normal(dim) * 3.0
        else:
            # two-coordinate head start: most of the mass on a random pair
            z0 = np.full(dim, -4.0)
            i, j = rng.choice(dim, size=2, replace=False)
            z0[i] = z0[j] = 4.0
        res = scipy.optimize.minimize(
            objective,
            z0,
            method="Nelder-Mead",
            options={"maxiter": 6000, "xatol": 1e-10, "fatol": 1e-12, "adaptive": True},
        )
        best = max(best, -float(res.fun))
    return best
