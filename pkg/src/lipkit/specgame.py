"""Shapley-value spectral importance.

Partition a 2-D spectrum into square-ring band players, zero out the bands
a coalition excludes, and divide a characteristic function's worth fairly
across the bands: exactly for small player counts, by permutation sampling
with an explicit error bound otherwise, plus the normalized importance
score of the resulting distribution.

Characteristic-function values are inputs (table or callback); constant
offsets cancel in every marginal, so any baseline convention works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    CallbackFailure,
    DegenerateWeights,
    GridMismatch,
    LipkitError,
    NegativeShapley,
    PlayerCountTooLarge,
)
from .fourlip import SpectralSignal

MAX_EXACT_PLAYERS = 16


def band_partition(s: SpectralSignal, n_bands: int) -> np.ndarray:
    """Assign every spectrum bin to one of ``n_bands`` square rings.

    Rings are uniform shells of the max-coordinate (Chebyshev) distance
    from the geometric center of the centered spectrum, so each shell holds
    a constant-width strip of bins; the center bin(s) always land in band 0.
    Returned indices follow the shifted spectrum layout.
    """
    if s.dim != 2:
        raise GridMismatch("band partition is defined for 2-D spectra")
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    n0, n1 = s.grid
    c0, c1 = (n0 - 1) / 2.0, (n1 - 1) / 2.0
    i0 = np.abs(np.arange(n0) - c0)[:, None]
    i1 = np.abs(np.arange(n1) - c1)[None, :]
    dist = np.maximum(i0, i1)
    d_max = float(dist.max())
    if d_max == 0.0:
        return np.zeros(s.grid, dtype=np.int64)
    bands = np.minimum((dist / d_max * n_bands).astype(np.int64), n_bands - 1)
    return bands


def _mirror_unshifted(mask):
    """Conjugate-mirror of an unshifted-layout boolean mask: bin k -> -k mod N."""
    out = np.flip(mask)
    return np.roll(out, shift=(1,) * mask.ndim, axis=tuple(range(mask.ndim)))


def coalition_filter(s: SpectralSignal, bands: np.ndarray, keep: int) -> SpectralSignal:
    """Zero all bins outside the kept bands (coalition bitmask).

    Bins whose conjugate mirror falls in a dropped band are zeroed as well,
    which keeps the inverse transform real; only mirror pairs straddling a
    ring boundary are affected.
    """
    if bands.shape != s.grid:
        raise GridMismatch("band index array does not match the signal grid")
    if keep < 0:
        raise ValueError("coalition bitmask must be nonnegative")
    keep_mask = ((keep >> bands) & 1).astype(bool)
    if keep_mask.all():
        return SpectralSignal(s.samples, s.spacing)
    keep_unshifted = np.fft.ifftshift(keep_mask)
    keep_sym = keep_unshifted & _mirror_unshifted(keep_unshifted)
    spec = np.array(s.spectrum)
    spec[~np.fft.fftshift(keep_sym)] = 0.0
    return s.with_spectrum(spec)


@dataclass(frozen=True)
class CoalitionGame:
    """Complete table of coalition values indexed by bitmask; v(empty) at 0."""

    n_players: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if self.n_players < 1:
            raise ValueError("need at least one player")
        if values.shape != (1 << self.n_players,):
            raise ValueError(
                f"need a complete table of {1 << self.n_players} values, got {values.shape}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callback(cls, fn, n_players):
        vals = np.array([fn(mask) for mask in range(1 << n_players)], dtype=np.float64)
        return cls(n_players, vals)


def _shapley_weights(m):
    fact = [math.factorial(i) for i in range(m + 1)]
    return np.array([fact[s] * fact[m - 1 - s] / fact[m] for s in range(m)])


def _popcounts(n_masks):
    masks = np.arange(n_masks, dtype=np.int64)
    pc = np.zeros(n_masks, dtype=np.int64)
    bits = 1
    while (1 << (bits - 1)) < n_masks:
        bits += 1
    for b in range(bits):
        pc += (masks >> b) & 1
    return pc


def shapley_exact(game: CoalitionGame) -> np.ndarray:
    """psi_i = sum over coalitions S without i of
    |S|! (M-1-|S|)! / M! * (v(S + i) - v(S)); efficiency is checked."""
    m = game.n_players
    if m > MAX_EXACT_PLAYERS:
        raise PlayerCountTooLarge(f"exact mode limited to {MAX_EXACT_PLAYERS} players, got {m}")
    weights = _shapley_weights(m)
    pc = _popcounts(game.values.shape[0])
    psi = _kernels.shapley_accumulate(np.asarray(game.values), weights, pc, m)
    total = game.values[-1] - game.values[0]
    drift = abs(float(psi.sum()) - float(total))
    if drift > 1e-10 * max(1.0, abs(float(total))):
        raise LipkitError(f"efficiency violated by {drift:.3e}")  # pragma: no cover
    return psi


def shapley_mc(value_fn, n_players: int, n_perms: int, seed: int = 0):
    """Permutation-sampling estimate of the Shapley values.

    ``value_fn`` maps a coalition bitmask to its worth. Returns
    (psi, err_bound) with the bound 2^(M-1) * sqrt(Var(marginal)/n_perms)
    evaluated at the worst player's empirical marginal variance.
    """
    if n_perms < 1:
        raise ValueError("n_perms must be >= 1")
    rng = np.random.default_rng(seed)

    def call(mask):
        try:
            return float(value_fn(int(mask)))
        except Exception as exc:
            raise CallbackFailure(f"value_fn failed on mask {mask}") from exc

    marginals = np.empty((n_perms, n_players))
    for t in range(n_perms):
        order = rng.permutation(n_players)
        mask = 0
        prev = call(0)
        for player in order:
            mask |= 1 << int(player)
            cur = call(mask)
            marginals[t, player] = cur - prev
            prev = cur
    psi = marginals.mean(axis=0)
    if n_perms > 1:
        worst_var = float(np.max(marginals.var(axis=0, ddof=1)))
    else:
        worst_var = 0.0
    err_bound = 2.0 ** (n_players - 1) * math.sqrt(worst_var / n_perms)
    return psi, err_bound


def importance_score(psi, beta=None) -> float:
    """Normalized importance of a Shapley distribution against weights beta.

    With the distribution normalized to unit l1 mass, the score is
    |(beta_hat . psi_hat - eta) / (1 - eta)|, eta = ||beta||_1/(M ||beta||_2),
    clamped to [0, 1]. Uniform distributions score 0; mass concentrated on
    the single max-weight band scores 1.
    """
    psi = np.asarray(psi, dtype=np.float64)
    m = psi.size
    if m < 2:
        raise DegenerateWeights("score needs at least two players")
    if np.any(psi < -1e-12):
        raise NegativeShapley(
            f"normalization assumes nonnegative values (min {psi.min():.3e})"
        )
    psi = np.clip(psi, 0.0, None)
    if beta is None:
        beta = np.ones(m)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (m,):
        raise DegenerateWeights(f"beta must have length {m}")
    if np.any(beta < 0):
        raise DegenerateWeights("beta weights must be nonnegative")
    norm2 = float(np.linalg.norm(beta))
    if norm2 == 0.0:
        raise DegenerateWeights("beta weights are all zero")
    total = float(psi.sum())
    if total == 0.0:
        return 0.0  # zero game carries a uniform (empty) distribution
    psi_hat = psi / total
    beta_hat = beta / norm2
    eta = float(np.sum(beta)) / (m * norm2)
    score = abs((float(beta_hat @ psi_hat) - eta) / (1.0 - eta))
    if score < 1e-12:
        return 0.0
    return min(score, 1.0)


# ---------------------------------------------------------------------------
# game table CSV: rows of (bitmask integer, value)
# ---------------------------------------------------------------------------

def save_game_csv(path, game: CoalitionGame):
    with open(path, "w") as fh:
        for mask, val in enumerate(game.values):
            fh.write(f"{mask},{val:.17g}\n")


def load_game_csv(path, n_players=None) -> CoalitionGame:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'bitmask,value'")
            try:
                mask, val = int(parts[0]), float(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad bitmask or value") from exc
            if mask < 0 or mask in entries:
                raise ValueError(f"{path}:{lineno}: bad or duplicate bitmask {mask}")
            entries[mask] = val
    if not entries:
        raise ValueError(f"{path}: empty game table")
    if n_players is None:
        n_players = max(entries).bit_length()
        n_players = max(n_players, 1)
    size = 1 << n_players
    if set(entries) != set(range(size)):
        missing = sorted(set(range(size)) - set(entries))[:4]
        raise ValueError(
            f"{path}: table incomplete for {n_players} players (missing masks {missing}...)"
        )
    values = np.array([entries[mask] for mask in range(size)])
    return CoalitionGame(n_players, values)
