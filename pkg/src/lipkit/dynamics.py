"""Stochastic dynamics of the spectral-norm Lipschitz bound.

Per-layer driving forces extracted from the gradient and the noise
covariance (drift from gradient/principal-direction alignment, nonnegative
noise-curvature growth, and diffusion intensity), their network-level
aggregation, and an Euler-Maruyama simulator used to validate the
decomposition on synthetic matrix ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NotPSD
from .matcore import DenseMatrix, SvdTriple, full_svd, vec
from .svdcalc import _check_index, _check_simple, sv_hessian, sv_jacobian


def _psd_sqrt(cov: np.ndarray, floor: float = -1e-10) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues in [floor, 0) are clipped."""
    sym_defect = float(np.max(np.abs(cov - cov.T)))
    if sym_defect > 1e-10:
        raise NotPSD(f"covariance not symmetric (max asymmetry {sym_defect:.3e})")
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if vals.min() < floor:
        raise NotPSD(f"covariance has eigenvalue {vals.min():.3e} below {floor}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class LayerDynamicsState:
    """One layer's matrix, loss gradient, gradient-noise covariance and
    learning rate, with the SVD and covariance square root precomputed."""

    theta: DenseMatrix
    grad: np.ndarray
    noise_cov: DenseMatrix
    eta: float
    svd: SvdTriple
    sqrt_cov: np.ndarray

    @classmethod
    def create(cls, theta: DenseMatrix, grad, noise_cov: DenseMatrix, eta: float):
        if eta <= 0:
            raise ValueError("learning rate must be positive")
        d = theta.rows * theta.cols
        grad = np.asarray(grad, dtype=np.float64).reshape(-1)
        if grad.shape != (d,):
            raise ValueError(f"grad must have length {d}, got {grad.shape}")
        if noise_cov.shape != (d, d):
            raise ValueError(f"noise_cov must be {d}x{d}, got {noise_cov.shape}")
        sqrt_cov = _psd_sqrt(noise_cov.array)
        svd = full_svd(theta)
        _check_index(svd, 1)
        _check_simple(svd, 1)
        grad = grad.copy()
        grad.flags.writeable = False
        return cls(
            theta=theta, grad=grad, noise_cov=noise_cov, eta=eta, svd=svd, sqrt_cov=sqrt_cov
        )

    @property
    def sigma1(self) -> float:
        return self.svd.sigma(1)


@dataclass(frozen=True)
class NetworkDynamics:
    """Stack of layer states; Z is the summed log spectral norm, K = e^Z."""

    layers: tuple

    def __init__(self, layers):
        object.__setattr__(self, "layers", tuple(layers))
        if not self.layers:
            raise ValueError("need at least one layer")

    @property
    def log_bound(self) -> float:
        return float(sum(math.log(layer.sigma1) for layer in self.layers))

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)


def opnorm_jacobian(state: LayerDynamicsState) -> np.ndarray:
    """vec of the spectral-norm Jacobian u_1 v_1^T; unit l2 norm."""
    return vec(sv_jacobian(state.svd, 1))


@dataclass(frozen=True)
class DrivingForces:
    mu: float
    kappa: float
    lam: np.ndarray

    def __iter__(self):
        return iter((self.mu, self.kappa, self.lam))


def driving_forces(state: LayerDynamicsState) -> DrivingForces:
    """Decomposition of d sigma_1 / sigma_1:

      mu    = <J, -vec(grad)> / sigma_1          (gradient-alignment drift)
      kappa = eta/(2 sigma_1) * <H, Sigma>       (nonnegative noise-curvature term)
      lam   = sqrt(eta)/sigma_1 * Sigma^(1/2)^T J  (diffusion intensity)
    """
    j = opnorm_jacobian(state)
    s1 = state.sigma1
    mu = float(j @ (-state.grad)) / s1
    h = sv_hessian(state.svd, 1).array
    kappa = state.eta / (2.0 * s1) * float(np.sum(h * state.noise_cov.array))
    lam = (math.sqrt(state.eta) / s1) * (state.sqrt_cov.T @ j)
    return DrivingForces(mu=mu, kappa=kappa, lam=lam)


def aggregate(net: NetworkDynamics):
    """Network totals: sums for the drift terms, root-sum-square for the
    diffusion intensities."""
    forces = [driving_forces(layer) for layer in net.layers]
    mu_z = float(sum(f.mu for f in forces))
    kappa_z = float(sum(f.kappa for f in forces))
    lambda_z = math.sqrt(sum(float(f.lam @ f.lam) for f in forces))
    return mu_z, kappa_z, lambda_z


def _stream(seed):
    # counter-based generator: reproducible and cheap to advance
    return np.random.Generator(np.random.Philox(key=seed))


def stored_steps(steps: int, store_every: int = 1):
    """Step numbers kept by euler_maruyama: 0, every store_every-th, final."""
    return sorted(set(range(0, steps + 1, store_every)) | {steps})


def euler_maruyama(
    state: LayerDynamicsState,
    dt: float,
    steps: int,
    seed: int = 0,
    drift_fn=None,
    store_every: int = 1,
):
    """Simulate d vec(theta) = -vec(grad) dt + sqrt(eta) Sigma^(1/2) dB.

    Returns the trajectory as a list of DenseMatrix: the start, every
    store_every-th step, and the final step. ``drift_fn`` maps the current
    DenseMatrix to a gradient vector; when absent the state's constant
    gradient is used (and the stepping runs in the compiled kernel).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")
    m, n = state.theta.shape
    d = m * n
    rng = _stream(seed)
    noise = rng.standard_normal((steps, d))
    scale = math.sqrt(state.eta * dt)
    theta0 = vec(state.theta).copy()
    if drift_fn is None:
        traj = _kernels.em_path(
            theta0, np.asarray(state.grad), state.sqrt_cov, dt, scale, noise
        )
    else:
        traj = np.empty((steps + 1, d))
        traj[0] = theta0
        x = theta0.copy()
        for t in range(steps):
            g = np.asarray(drift_fn(DenseMatrix.from_flat(m, n, x)), dtype=np.float64)
            x = x - g.reshape(-1) * dt + scale * (state.sqrt_cov @ noise[t])
            traj[t + 1] = x
    return [DenseMatrix.from_flat(m, n, traj[t]) for t in stored_steps(steps, store_every)]


def simulate_ensemble(
    state: LayerDynamicsState, dt: float, steps: int, n_paths: int, seed: int = 0
) -> np.ndarray:
    """Final theta of ``n_paths`` independent constant-drift paths, stacked
    as (n_paths, m, n). The noise stream is drawn step-major from one
    counter-based generator, so runs are reproducible for a given seed."""
    if dt <= 0 or steps < 1 or n_paths < 1:
        raise ValueError("need dt > 0, steps >= 1, n_paths >= 1")
    m, n = state.theta.shape
    d = m * n
    rng = _stream(seed)
    scale = math.sqrt(state.eta * dt)
    thetas = np.tile(vec(state.theta), (n_paths, 1))
    sqrt_cov_t = np.ascontiguousarray(state.sqrt_cov.T)
    drift = np.asarray(state.grad)
    for _ in range(steps):
        noise = rng.standard_normal((n_paths, d))
        thetas = _kernels.em_ensemble_step(thetas, drift, sqrt_cov_t, dt, scale, noise)
    return thetas.reshape(n_paths, n, m).swapaxes(1, 2)


def log_lip_increment(state: LayerDynamicsState, d_theta: DenseMatrix) -> float:
    """Second-order proxy for log sigma_1(theta + d_theta) - log sigma_1:
    (<J, vec(d_theta)> + 1/2 vec^T H vec) / sigma_1."""
    if d_theta.shape != state.theta.shape:
        raise ValueError("d_theta shape mismatch")
    dv = vec(d_theta)
    j = opnorm_jacobian(state)
    h = sv_hessian(state.svd, 1).array
    return (float(j @ dv) + 0.5 * float(dv @ h @ dv)) / state.sigma1


def trajectory_stats(
    traj, steps: int, grad, noise_cov: DenseMatrix, eta: float, store_every: int = 1
):
    """Per-stored-step rows (step, sigma1, Z, mu, kappa, ||lambda||) for a
    trajectory produced by :func:`euler_maruyama` with the same steps and
    store_every arguments."""
    labels = stored_steps(steps, store_every)
    if len(labels) != len(traj):
        raise ValueError(
            f"trajectory length {len(traj)} does not match steps={steps}, "
            f"store_every={store_every}"
        )
    rows = []
    for step, theta in zip(labels, traj):
        st = LayerDynamicsState.create(theta, grad, noise_cov, eta)
        f = driving_forces(st)
        rows.append(
            (
                step,
                st.sigma1,
                math.log(st.sigma1),
                f.mu,
                f.kappa,
                float(np.linalg.norm(f.lam)),
            )
        )
    return rows
