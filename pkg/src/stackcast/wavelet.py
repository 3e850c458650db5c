"""Multilevel Haar wavelet decomposition, reconstruction and denoising.

The forward transform is the classic pyramid: at each level the signal is
split by the orthonormal Haar low/high filter pair into an approximation
half and a detail half, and the approximation is fed to the next level.
Odd-length stages are padded by repeating the last sample; the pre-padding
length chain is recoverable from ``original_length`` alone, so the inverse
is exact up to floating round-off.

Denoising follows the universal-threshold shrinkage recipe: the noise
scale is the median absolute value of the finest detail band divided by
0.6745, the threshold is sigma * sqrt(2 ln n), and the details are soft-
or hard-thresholded before reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigurationError, SizeError, StructureError
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "DwtDecomposition",
    "DenoiseConfig",
    "max_levels",
    "dwt_forward",
    "dwt_inverse",
    "denoise",
    "WaveletDenoiser",
]

_SQRT2 = np.sqrt(2.0)


def max_levels(n: int) -> int:
    """Deepest valid decomposition level for a length-n signal."""
    if n < 2:
        return 0
    return int(np.floor(np.log2(n)))


def _length_chain(n: int, levels: int) -> list[int]:
    """Pre-padding length at each stage: [n, ceil(n/2), ...], levels+1 long."""
    chain = [n]
    for _ in range(levels):
        chain.append((chain[-1] + 1) // 2)
    return chain


@dataclass(frozen=True)
class DwtDecomposition:
    """Coefficient pyramid of one signal.

    ``details`` runs finest to coarsest; ``approx`` belongs to the
    coarsest level. ``original_length`` is the sample count before any
    padding, from which every per-level length is derived.
    """

    approx: np.ndarray
    details: list[np.ndarray] = field(default_factory=list)
    levels: int = 1
    original_length: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise StructureError(f"levels must be >= 1, got {self.levels}")
        if len(self.details) != self.levels:
            raise StructureError(
                f"{len(self.details)} detail vectors for {self.levels} levels"
            )
        chain = _length_chain(self.original_length, self.levels)
        for k, d in enumerate(self.details):
            if len(d) != chain[k + 1]:
                raise StructureError(
                    f"detail level {k + 1} has {len(d)} coefficients, "
                    f"expected {chain[k + 1]}"
                )
        if len(self.approx) != chain[-1]:
            raise StructureError(
                f"approximation has {len(self.approx)} coefficients, "
                f"expected {chain[-1]}"
            )

    def coefficient_energy(self) -> float:
        total = float(np.sum(np.square(self.approx)))
        for d in self.details:
            total += float(np.sum(np.square(d)))
        return total


@dataclass(frozen=True)
class DenoiseConfig:
    levels: int | str = "auto"  # "auto" -> min(floor(log2 n), 6)
    threshold_rule: str = "universal"
    threshold_mode: str = "soft"

    def __post_init__(self):
        if self.threshold_rule != "universal":
            raise ConfigurationError(
                f"unknown threshold rule '{self.threshold_rule}' (only 'universal')"
            )
        if self.threshold_mode not in ("soft", "hard"):
            raise ConfigurationError(
                f"threshold mode must be 'soft' or 'hard', got '{self.threshold_mode}'"
            )
        if self.levels != "auto" and (not isinstance(self.levels, int) or self.levels < 1):
            raise ConfigurationError("levels must be 'auto' or a positive int")

    def resolve_levels(self, n: int) -> int:
        if self.levels == "auto":
            return max(1, min(max_levels(n), 6))
        return int(self.levels)


def dwt_forward(x, levels: int) -> DwtDecomposition:
    """Decompose ``x`` over ``levels`` Haar stages.

    Per stage (odd stages padded by repeating the last sample):
    s_k = (x_{2k} + x_{2k+1}) / sqrt(2), d_k = (x_{2k} - x_{2k+1}) / sqrt(2).
    """
    x = as_float_vector(x)
    n = x.size
    cap = max_levels(n)
    if levels < 1 or levels > cap:
        raise ConfigurationError(
            f"levels must lie in [1, {cap}] for a length-{n} signal, got {levels}"
        )
    details: list[np.ndarray] = []
    current = x
    for _ in range(levels):
        if current.size % 2:
            current = np.append(current, current[-1])
        even, odd = current[0::2], current[1::2]
        details.append((even - odd) / _SQRT2)
        current = (even + odd) / _SQRT2
    return DwtDecomposition(
        approx=current, details=details, levels=levels, original_length=n
    )


def dwt_inverse(d: DwtDecomposition) -> np.ndarray:
    """Exact inverse of :func:`dwt_forward`; padding samples are removed."""
    chain = _length_chain(d.original_length, d.levels)
    current = np.asarray(d.approx, dtype=np.float64)
    for k in range(d.levels - 1, -1, -1):
        detail = np.asarray(d.details[k], dtype=np.float64)
        if detail.size != current.size:
            raise StructureError(
                f"level {k + 1}: approximation length {current.size} does not "
                f"match detail length {detail.size}"
            )
        merged = np.empty(2 * current.size)
        merged[0::2] = (current + detail) / _SQRT2
        merged[1::2] = (current - detail) / _SQRT2
        current = merged[: chain[k]]  # drop the padding sample, if any
    return current


def _apply_threshold(detail: np.ndarray, threshold: float, mode: str) -> np.ndarray:
    if mode == "soft":
        return np.sign(detail) * np.maximum(np.abs(detail) - threshold, 0.0)
    # hard: zero everything at or below the threshold
    return np.where(np.abs(detail) <= threshold, 0.0, detail)


def universal_threshold(decomp: DwtDecomposition, n: int) -> float:
    """Donoho universal threshold with the MAD noise estimate."""
    sigma = float(np.median(np.abs(decomp.details[0]))) / 0.6745
    return sigma * np.sqrt(2.0 * np.log(n))


def denoise(x, cfg: DenoiseConfig | None = None, threshold: float | None = None) -> np.ndarray:
    """Wavelet-shrink ``x``; output length equals input length.

    A precomputed ``threshold`` overrides the estimate, which lets a
    threshold fitted on training data be reused on other segments.
    """
    cfg = cfg or DenoiseConfig()
    x = as_float_vector(x)
    if x.size < 4:
        raise SizeError(f"denoise needs at least 4 samples, got {x.size}")
    levels = min(cfg.resolve_levels(x.size), max_levels(x.size))
    decomp = dwt_forward(x, levels)
    if threshold is None:
        threshold = universal_threshold(decomp, x.size)
    shrunk = [
        _apply_threshold(d, threshold, cfg.threshold_mode) for d in decomp.details
    ]
    return dwt_inverse(
        DwtDecomposition(
            approx=decomp.approx,
            details=shrunk,
            levels=decomp.levels,
            original_length=decomp.original_length,
        )
    )


class WaveletDenoiser(BaseEstimator, TransformerMixin):
    """Column-wise Haar shrinkage with thresholds fitted on training data.

    ``fit`` estimates one universal threshold per column from the training
    block; ``transform`` denoises any block (same columns) reusing those
    thresholds, so statistics never leak from the transformed segment.
    """

    def __init__(self, levels: int | str = "auto", threshold_mode: str = "soft"):
        self.levels = levels
        self.threshold_mode = threshold_mode

    def _config(self) -> DenoiseConfig:
        return DenoiseConfig(levels=self.levels, threshold_mode=self.threshold_mode)

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        if X.shape[0] < 4:
            raise SizeError(f"need at least 4 rows to fit, got {X.shape[0]}")
        cfg = self._config()
        levels = min(cfg.resolve_levels(X.shape[0]), max_levels(X.shape[0]))
        self.thresholds_ = np.array(
            [
                universal_threshold(dwt_forward(X[:, j], levels), X.shape[0])
                for j in range(X.shape[1])
            ]
        )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "thresholds_"):
            raise ConfigurationError("denoiser is not fitted; call fit() first")
        X = as_float_matrix(X)
        if X.shape[1] != self.thresholds_.size:
            raise ConfigurationError(
                f"fitted on {self.thresholds_.size} columns, got {X.shape[1]}"
            )
        cfg = self._config()
        out = np.empty_like(X)
        for j in range(X.shape[1]):
            out[:, j] = denoise(X[:, j], cfg, threshold=float(self.thresholds_[j]))
        return out
