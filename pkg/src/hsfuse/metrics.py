"""Fusion quality indices: global relative error, mean spectral angle,
windowed universal image quality, a no-reference index, and per-band
relative error curves.

Windowed statistics run over every fully-contained window at stride 1,
using box sums from `kernels.window_sums`.  A window pair is degenerate
when its quality-index denominator vanishes (both windows constant, or
both means zero); identical degenerate windows score 1, all other
degenerate windows are skipped.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .cube import ConvolutionKernel, SpectralCube, SubsamplingPattern
from .errors import GeometryError, NumericalError
from .operators import blur_apply, subsample_apply

__all__ = ["ergas", "sam", "sam_stats", "uiqi", "qnr", "per_band_rmse"]

DEFAULT_WINDOW = 32
_DEGENERATE_REL = 1e-12


def _check_same_shape(est: SpectralCube, ref: SpectralCube):
    if (est.bands, est.width, est.height) != (ref.bands, ref.width, ref.height):
        raise GeometryError(
            f"cube shapes differ: {est.bands}x{est.width}x{est.height} vs "
            f"{ref.bands}x{ref.width}x{ref.height}"
        )


def ergas(est: SpectralCube, ref: SpectralCube, resolution_ratio: float = 0.25) -> float:
    """Global dimensionless error: 100 * ratio * rms over bands of
    (per-band RMSE / reference band mean)."""
    _check_same_shape(est, ref)
    mse = np.mean((est.data - ref.data) ** 2, axis=1)
    means = ref.data.mean(axis=1)
    if np.any(means == 0.0):
        band = int(np.argwhere(means == 0.0)[0, 0])
        raise NumericalError(f"reference band {band} has zero mean")
    return float(100.0 * resolution_ratio * np.sqrt(np.mean(mse / means**2)))


def sam_stats(est: SpectralCube, ref: SpectralCube) -> tuple[float, int]:
    """Mean spectral angle in degrees plus the count of skipped pixels
    (those where either spectrum is exactly zero).

    The angle between the unit spectra is taken through the chord,
    2 asin(||u - v|| / 2): equal to acos of the normalized inner product
    but well conditioned near zero, so identical spectra score exactly 0.
    """
    _check_same_shape(est, ref)
    norm_est = np.sqrt(np.einsum("bj,bj->j", est.data, est.data))
    norm_ref = np.sqrt(np.einsum("bj,bj->j", ref.data, ref.data))
    valid = (norm_est > 0) & (norm_ref > 0)
    if not valid.any():
        raise NumericalError("every pixel has a zero spectrum in one of the cubes")
    unit_est = est.data[:, valid] / norm_est[valid]
    unit_ref = ref.data[:, valid] / norm_ref[valid]
    chord = np.sqrt(np.einsum("bj,bj->j", unit_est - unit_ref, unit_est - unit_ref))
    angles = 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    return float(np.degrees(np.mean(angles))), int(np.count_nonzero(~valid))


def sam(est: SpectralCube, ref: SpectralCube) -> float:
    return sam_stats(est, ref)[0]


def _band_quality(x: np.ndarray, y: np.ndarray, window: int) -> float:
    """Mean windowed quality index between two 2-D arrays."""
    if window > min(x.shape):
        raise GeometryError(f"window {window} larger than image {x.shape[1]}x{x.shape[0]}")
    planes = np.stack([x, y, x * x, y * y, x * y, (x - y) ** 2])
    sums = kernels.window_sums(planes, window)
    n = window * window
    sx, sy, sxx, syy, sxy, sdd = sums
    mx = sx / n
    my = sy / n
    vx = np.maximum(sxx / n - mx * mx, 0.0)
    vy = np.maximum(syy / n - my * my, 0.0)
    cxy = sxy / n - mx * my
    mean_term = mx * mx + my * my
    var_term = vx + vy
    den = var_term * mean_term
    degenerate = den <= _DEGENERATE_REL * (var_term + mean_term) ** 2

    quality = np.empty_like(den)
    ok = ~degenerate
    quality[ok] = 4.0 * cxy[ok] * mx[ok] * my[ok] / den[ok]
    identical = degenerate & (sdd == 0.0)
    quality[identical] = 1.0
    skipped = degenerate & ~identical
    kept = ~skipped
    if not kept.any():
        raise NumericalError("all windows are degenerate and differ; quality index undefined")
    return float(quality[kept].mean())


def uiqi(est: SpectralCube, ref: SpectralCube, window: int = DEFAULT_WINDOW) -> float:
    """Universal image quality index, averaged over sliding windows per band
    and then over bands.  With no skipped windows every band sees the same
    window count, so band-then-window and window-then-band averaging agree."""
    _check_same_shape(est, ref)
    est_images = est.to_images()
    ref_images = ref.to_images()
    return float(
        np.mean([_band_quality(est_images[b], ref_images[b], window) for b in range(est.bands)])
    )


def qnr(
    fused: SpectralCube,
    msi_obs: SpectralCube,
    hsi_obs: SpectralCube,
    kernel: ConvolutionKernel,
    pattern: SubsamplingPattern,
    window: int = DEFAULT_WINDOW,
) -> tuple[float, float, float]:
    """No-reference quality: spectral distortion (band-pair quality drift
    between fused and observed HSI), spatial distortion (quality against the
    MSI bands at both scales), and their product (1-a)(1-b).

    With several MSI bands the spatial term averages over them.
    """
    if fused.bands != hsi_obs.bands:
        raise GeometryError(f"fused has {fused.bands} bands, observed HSI has {hsi_obs.bands}")
    if (fused.width, fused.height) != (msi_obs.width, msi_obs.height):
        raise GeometryError("fused cube must share the MSI grid")
    pattern.check_divides(msi_obs.width, msi_obs.height)
    if (hsi_obs.width, hsi_obs.height) != (
        msi_obs.width // pattern.factor,
        msi_obs.height // pattern.factor,
    ):
        raise GeometryError("observed HSI must be the MSI grid decimated by the pattern factor")

    fused_images = fused.to_images()
    hsi_images = hsi_obs.to_images()
    msi_images = msi_obs.to_images()
    degraded = subsample_apply(blur_apply(msi_obs, kernel), pattern).to_images()

    bands = fused.bands
    if bands < 2:
        d_lambda = 0.0
    else:
        drift = 0.0
        for l in range(bands):
            for r in range(l + 1, bands):
                q_fused = _band_quality(fused_images[l], fused_images[r], window)
                q_hsi = _band_quality(hsi_images[l], hsi_images[r], window)
                drift += abs(q_fused - q_hsi)
        d_lambda = 2.0 * drift / (bands * (bands - 1))

    spatial = 0.0
    for l in range(bands):
        for m in range(msi_obs.bands):
            q_high = _band_quality(fused_images[l], msi_images[m], window)
            q_low = _band_quality(hsi_images[l], degraded[m], window)
            spatial += abs(q_high - q_low)
    d_s = spatial / (bands * msi_obs.bands)

    return d_lambda, d_s, (1.0 - d_lambda) * (1.0 - d_s)


def per_band_rmse(est: SpectralCube, ref: SpectralCube) -> np.ndarray:
    """Per-band error normalized by the reference band norm."""
    _check_same_shape(est, ref)
    ref_norms = np.linalg.norm(ref.data, axis=1)
    if np.any(ref_norms == 0.0):
        band = int(np.argwhere(ref_norms == 0.0)[0, 0])
        raise NumericalError(f"reference band {band} is identically zero")
    return np.linalg.norm(est.data - ref.data, axis=1) / ref_norms
