"""Fourier-domain Lipschitz analysis on sampled 1-D/2-D signals.

The discrete transform is the plain unnormalized DFT; multiplying by the
grid spacing turns it into an approximation of the integral transform, and
every bound below works in those physical units. Frequency axes are
centered (negative and positive bins), with the spectrum exposed in the
same shifted layout.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import _kernels
from .errors import EmptyBand, GridMismatch, NotUnit

BAND_VALIDITY_DELTA = 1.0 / np.sqrt(np.pi)  # ~0.5642, small-ball validity threshold


class SpectralSignal:
    """Sampled real signal on a uniform 1-D or 2-D grid plus its DFT.

    Sample (i, j) sits at physical position (i*dx, j*dy). The spectrum is
    computed lazily, cached, and shared read-only.
    """

    def __init__(self, samples, spacing):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim not in (1, 2):
            raise ValueError(f"signals are 1-D or 2-D, got ndim={samples.ndim}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if np.isscalar(spacing):
            spacing = (float(spacing),) * samples.ndim
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != samples.ndim or any(s <= 0 for s in spacing):
            raise ValueError(f"need {samples.ndim} positive spacings, got {spacing}")
        samples = samples.copy()
        samples.flags.writeable = False
        self.samples = samples
        self.spacing = spacing
        self._spectrum = None

    @property
    def dim(self):
        return self.samples.ndim

    @property
    def grid(self):
        return self.samples.shape

    @property
    def spectrum(self):
        """Unnormalized DFT in centered (fftshift) layout."""
        if self._spectrum is None:
            spec = np.fft.fftshift(np.fft.fftn(self.samples))
            spec.flags.writeable = False
            self._spectrum = spec
        return self._spectrum

    @property
    def freq_axes(self):
        """Centered physical frequencies (cycles per unit) per axis."""
        return tuple(
            np.fft.fftshift(np.fft.fftfreq(n, d=s))
            for n, s in zip(self.grid, self.spacing)
        )

    def freq_norm_grid(self):
        """||zeta||_2 per spectrum bin, in the shifted layout."""
        axes = self.freq_axes
        if self.dim == 1:
            return np.abs(axes[0])
        fx, fy = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.hypot(fx, fy)

    def freq_cell(self):
        """Volume of one frequency bin: prod of 1/(n_i * dx_i)."""
        out = 1.0
        for n, s in zip(self.grid, self.spacing):
            out /= n * s
        return out

    def cell_volume(self):
        """Volume of one sample cell: prod of spacings."""
        out = 1.0
        for s in self.spacing:
            out *= s
        return out

    def with_spectrum(self, new_spectrum, imag_tol=1e-10):
        """Rebuild a signal from a modified (shifted-layout) spectrum."""
        raw = np.fft.ifftn(np.fft.ifftshift(new_spectrum))
        resid = float(np.max(np.abs(raw.imag)))
        scale = max(1.0, float(np.max(np.abs(raw.real))))
        if resid > imag_tol * scale:
            raise ValueError(
                f"modified spectrum is not conjugate-symmetric (imag residue {resid:.3e})"
            )
        return SpectralSignal(raw.real, self.spacing)


def spectral_contribution(s: SpectralSignal) -> np.ndarray:
    """Per-bin contribution 2*pi*||zeta|| * |f_hat(zeta)| with the
    continuum-normalized magnitude (DFT x grid spacing)."""
    return 2.0 * np.pi * s.freq_norm_grid() * np.abs(s.spectrum) * s.cell_volume()


def spectral_lipschitz_bound(s: SpectralSignal) -> float:
    """Riemann sum of the per-frequency contributions; an upper bound for
    sup ||grad f|| when the samples resolve the signal."""
    return float(np.sum(spectral_contribution(s)) * s.freq_cell())


def grid_gradient_sup(s: SpectralSignal) -> float:
    """sup of ||grad f||_2 measured by central differences on the grid."""
    grads = np.gradient(s.samples, *s.spacing)
    if s.dim == 1:
        return float(np.max(np.abs(grads)))
    return float(np.max(np.hypot(*grads)))


def directional_transform(s: SpectralSignal, direction, t_grid) -> np.ndarray:
    """Transform values along the frequency line t * direction, by direct
    summation of f(x) exp(-2*pi*i*t*<direction, x>) times the cell volume."""
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (s.dim,):
        raise NotUnit(f"direction must have length {s.dim}")
    if abs(np.linalg.norm(direction) - 1.0) > 1e-10:
        raise NotUnit(f"direction norm {np.linalg.norm(direction):.12g} != 1")
    ts = np.asarray(t_grid, dtype=np.float64)
    coords = [sp * np.arange(n) for n, sp in zip(s.grid, s.spacing)]
    if s.dim == 1:
        proj = direction[0] * coords[0]
    else:
        xs, ys = np.meshgrid(coords[0], coords[1], indexing="ij")
        proj = (direction[0] * xs + direction[1] * ys).ravel()
    flat = np.ascontiguousarray(s.samples.ravel(), dtype=np.float64)
    return _kernels.direct_dft(flat, np.ascontiguousarray(proj), ts, s.cell_volume())


def _ball_masks(s: SpectralSignal, center, radius):
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    if center.shape != (s.dim,):
        raise ValueError(f"center must have length {s.dim}")
    axes = s.freq_axes
    if s.dim == 1:
        dist = np.abs(axes[0] - center[0])
        mirror = np.abs(axes[0] + center[0])
    else:
        fx, fy = np.meshgrid(axes[0], axes[1], indexing="ij")
        dist = np.hypot(fx - center[0], fy - center[1])
        mirror = np.hypot(fx + center[0], fy + center[1])
    return dist <= radius, mirror <= radius


def band_remove(s: SpectralSignal, center, radius: float):
    """Zero every bin in the frequency ball and its conjugate mirror (so
    the signal stays real); returns (perturbed signal, eps) where eps is
    the L2 norm of the removed sample-domain content (cell-volume
    normalized, matching the continuum norm)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    primary, mirror = _ball_masks(s, center, radius)
    mask = primary | mirror
    if not mask.any():
        return SpectralSignal(s.samples, s.spacing), 0.0
    spec = np.array(s.spectrum)
    spec[mask] = 0.0
    perturbed = s.with_spectrum(spec)
    diff = s.samples - perturbed.samples
    eps = float(np.linalg.norm(diff.ravel()) * np.sqrt(s.cell_volume()))
    return perturbed, eps


def band_bound(s: SpectralSignal, center, radius: float, eps: float) -> float:
    """M_delta * eps * sqrt(mu(ball)) with M_delta the max per-bin
    contribution over the ball and mu the analytic ball measure
    (2*delta in 1-D, pi*delta^2 in 2-D)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if radius >= BAND_VALIDITY_DELTA:
        warnings.warn(
            f"ball radius {radius:.4g} >= {BAND_VALIDITY_DELTA:.4g}; the small-band "
            "derivation no longer applies",
            stacklevel=2,
        )
    primary, _ = _ball_masks(s, center, radius)
    if not primary.any():
        raise EmptyBand(f"no spectrum bin within {radius} of {center}")
    m_delta = float(np.max(spectral_contribution(s)[primary]))
    measure = 2.0 * radius if s.dim == 1 else np.pi * radius**2
    return m_delta * eps * float(np.sqrt(measure))


def mi_gap_bound(m_delta: float, eps: float, ball_measure: float) -> float:
    """Bound on the classifier information gap from removing the band."""
    if m_delta < 0 or eps < 0 or ball_measure < 0:
        raise ValueError("all inputs must be nonnegative")
    return m_delta * eps * float(np.sqrt(ball_measure))


def _ring_indices(s: SpectralSignal, n_rings: int):
    radial = s.freq_norm_grid()
    r_max = float(radial.max())
    if r_max == 0.0:
        return np.zeros(s.grid, dtype=np.int64)
    idx = np.minimum((radial / r_max * n_rings).astype(np.int64), n_rings - 1)
    return idx


def radial_esd(s: SpectralSignal, n_rings: int) -> np.ndarray:
    """Mean |DFT|^2 per radial-frequency ring; rings partition [0, zeta_max]
    uniformly in the l2 radial metric. Empty rings report 0."""
    if s.dim != 2:
        raise GridMismatch("radial ESD is defined for 2-D signals")
    if n_rings < 1:
        raise ValueError("n_rings must be >= 1")
    idx = _ring_indices(s, n_rings).ravel()
    power = np.abs(s.spectrum.ravel()) ** 2
    sums = np.bincount(idx, weights=power, minlength=n_rings)
    counts = np.bincount(idx, minlength=n_rings)
    out = np.zeros(n_rings)
    nonzero = counts > 0
    out[nonzero] = sums[nonzero] / counts[nonzero]
    return out


def snr(clean: SpectralSignal, noise: SpectralSignal, n_rings: int) -> np.ndarray:
    """Ring-wise ratio of clean to noise energy; +inf where the noise ring
    holds no energy."""
    if clean.grid != noise.grid or clean.spacing != noise.spacing:
        raise GridMismatch(
            f"grids differ: {clean.grid}/{clean.spacing} vs {noise.grid}/{noise.spacing}"
        )
    esd_c = radial_esd(clean, n_rings)
    esd_n = radial_esd(noise, n_rings)
    out = np.full(n_rings, np.inf)
    nonzero = esd_n > 0
    out[nonzero] = esd_c[nonzero] / esd_n[nonzero]
    return out


# ---------------------------------------------------------------------------
# signal CSV format
# ---------------------------------------------------------------------------

def save_signal_csv(path, s: SpectralSignal):
    with open(path, "w") as fh:
        if s.dim == 1:
            fh.write(f"# dx={s.spacing[0]:.17g}\n")
            for val in s.samples:
                fh.write(format(val, ".17g") + "\n")
        else:
            fh.write(f"# dx={s.spacing[0]:.17g} dy={s.spacing[1]:.17g}\n")
            for row in s.samples:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_signal_csv(path) -> SpectralSignal:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# dx=...' header line")
        fields = dict(
            tok.split("=", 1) for tok in header.lstrip("#").split() if "=" in tok
        )
        if "dx" not in fields:
            raise ValueError(f"{path}: header must contain dx=<spacing>")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a numeric row") from exc
    if not rows:
        raise ValueError(f"{path}: no samples")
    if "dy" in fields:
        data = np.array(rows)
        return SpectralSignal(data, (float(fields["dx"]), float(fields["dy"])))
    data = np.array([r[0] for r in rows])
    return SpectralSignal(data, (float(fields["dx"]),))
