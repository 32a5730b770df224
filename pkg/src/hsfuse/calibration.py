"""Joint estimation of the blur kernel and relative spectral response.

In the forward model the two observations are linked without the unknown
scene: (response @ HSI) should match the MSI blurred and decimated onto
the HSI grid, up to noise.  This module fits both operators to that
identity by alternating two linear least-squares solves, a ridge-damped
one over the response rows and a smoothness-damped one over the kernel
taps.  The tap solve carries a built-in sum-to-one constraint, which
resolves the joint scale ambiguity (all scale lands in the response) and
keeps the recorded residual history exactly non-increasing.
"""

from __future__ import annotations

import numpy as np

from .cube import ConvolutionKernel, SpectralCube, SpectralResponse, SubsamplingPattern
from .errors import GeometryError, NumericalError

__all__ = ["calibrate"]

STOP_REL_DECREASE = 1e-6


def _tap_smoothness(k: int) -> np.ndarray:
    """Quadratic form penalizing first differences across the tap grid."""
    n = k * k
    penalty = np.zeros((n, n))
    idx = np.arange(n).reshape(k, k)
    for a, b in list(zip(idx[:, :-1].ravel(), idx[:, 1:].ravel())) + list(
        zip(idx[:-1, :].ravel(), idx[1:, :].ravel())
    ):
        penalty[a, a] += 1.0
        penalty[b, b] += 1.0
        penalty[a, b] -= 1.0
        penalty[b, a] -= 1.0
    return penalty


def _shifted_subsampled(msi: SpectralCube, pattern: SubsamplingPattern, k: int) -> np.ndarray:
    """Stack of the k^2 tap regressors: MSI cyclically shifted by each tap
    offset, then decimated.  Shape (k^2, msi_bands, n_h)."""
    c = (k - 1) // 2
    images = msi.to_images()
    out = np.empty((k * k, msi.bands, (msi.height // pattern.factor) * (msi.width // pattern.factor)))
    t = 0
    for i in range(k):
        for j in range(k):
            shifted = np.roll(images, (i - c, j - c), axis=(1, 2))
            kept = shifted[:, pattern.offset_y :: pattern.factor, pattern.offset_x :: pattern.factor]
            out[t] = kept.reshape(msi.bands, -1)
            t += 1
    return out


def _gaussian_taps(k: int) -> np.ndarray:
    sigma = k / 4.0
    axis = np.arange(k) - (k - 1) / 2.0
    one_d = np.exp(-(axis**2) / (2.0 * sigma**2))
    taps = np.outer(one_d, one_d)
    return taps / taps.sum()


def calibrate(
    hsi: SpectralCube,
    msi: SpectralCube,
    pattern: SubsamplingPattern,
    kernel_support: int,
    ridge_r: float | None = None,
    smooth_b: float = 1e-3,
    max_alt_iters: int = 50,
) -> tuple[ConvolutionKernel, SpectralResponse, np.ndarray]:
    """Estimate (kernel, response) from an observed HSI/MSI pair.

    ``ridge_r`` defaults to 1e-6 times the squared HSI Frobenius norm.
    Returns the unit-sum kernel, the response (clamped to nonnegative
    entries at the end), and the objective value recorded after every
    half-step of the alternation, starting from the initial guess.
    """
    if kernel_support < 1 or kernel_support % 2 == 0:
        raise GeometryError(f"kernel support must be odd and positive, got {kernel_support}")
    if kernel_support > min(msi.width, msi.height):
        raise GeometryError(
            f"kernel support {kernel_support} exceeds MSI grid {msi.width}x{msi.height}"
        )
    pattern.check_divides(msi.width, msi.height)
    if (hsi.width, hsi.height) != (msi.width // pattern.factor, msi.height // pattern.factor):
        raise GeometryError(
            f"HSI grid {hsi.width}x{hsi.height} is not the MSI grid decimated by {pattern.factor}"
        )
    if ridge_r is None:
        ridge_r = 1e-6 * float(np.sum(hsi.data**2))
    if ridge_r < 0 or smooth_b < 0:
        raise ValueError("ridge_r and smooth_b must be nonnegative")

    k = kernel_support
    n_taps = k * k
    regressors = _shifted_subsampled(msi, pattern, k)  # (n_taps, L_m, n_h)
    hsi_gram = hsi.data @ hsi.data.T + ridge_r * np.eye(hsi.bands)
    tap_gram = np.einsum("tbp,ubp->tu", regressors, regressors)
    smooth_term = smooth_b * _tap_smoothness(k)

    taps = _gaussian_taps(k).ravel()
    response = np.full((msi.bands, hsi.bands), 1.0 / hsi.bands)

    def residual(resp, b):
        fit = resp @ hsi.data - np.tensordot(b, regressors, axes=(0, 0))
        return (
            float(np.sum(fit**2))
            + ridge_r * float(np.sum(resp**2))
            + float(b @ smooth_term @ b)
        )

    history = [residual(response, taps)]
    for _ in range(max_alt_iters):
        # Response step: rows solve against the current blurred-decimated MSI.
        target = np.tensordot(taps, regressors, axes=(0, 0))  # (L_m, n_h)
        try:
            response = np.linalg.solve(hsi_gram, (target @ hsi.data.T).T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "rank-deficient response step; raise ridge_r"
            ) from exc
        history.append(residual(response, taps))

        # Tap step: equality-constrained least squares (taps sum to one).
        rhs = np.einsum("tbp,bp->t", regressors, response @ hsi.data)
        kkt = np.zeros((n_taps + 1, n_taps + 1))
        kkt[:n_taps, :n_taps] = tap_gram + smooth_term
        kkt[:n_taps, n_taps] = 1.0
        kkt[n_taps, :n_taps] = 1.0
        kkt_rhs = np.concatenate([rhs, [1.0]])
        try:
            taps = np.linalg.solve(kkt, kkt_rhs)[:n_taps]
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "rank-deficient kernel step; raise smooth_b or reduce kernel support"
            ) from exc
        history.append(residual(response, taps))

        previous, current = history[-3], history[-1]
        if previous - current <= STOP_REL_DECREASE * max(previous, 1e-300):
            break

    kernel = ConvolutionKernel.normalized(taps.reshape(k, k))
    response = np.maximum(response, 0.0)
    return kernel, SpectralResponse(response), np.array(history)
