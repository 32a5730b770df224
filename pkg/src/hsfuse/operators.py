"""Forward-model linear operators and their adjoints.

Covers the cyclic blur, uniform subsampling, spectral response mixing, and
periodic horizontal/vertical first differences, plus the DFT
diagonalization of the shift-invariant ones (blur and differences).
Spatial-domain and frequency-domain applications are independent code
paths; the test suite pins their agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cube import ConvolutionKernel, SpectralCube, SpectralResponse, SubsamplingPattern
from .errors import GeometryError

__all__ = [
    "FrequencyDiagonal",
    "blur_apply",
    "blur_adjoint",
    "subsample_apply",
    "subsample_adjoint",
    "spectral_apply",
    "spectral_adjoint",
    "diff_h",
    "diff_v",
    "diff_h_adjoint",
    "diff_v_adjoint",
    "operator_spectrum",
    "spectrum_apply",
    "zoh_upsample",
]


@dataclass(frozen=True)
class FrequencyDiagonal:
    """2-D DFT eigenvalues of a cyclic (shift-invariant) operator on a
    width-by-height grid, stored as a (height, width) complex array in
    numpy fft2 frequency order."""

    width: int
    height: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.height, self.width):
            raise GeometryError(
                f"spectrum shape {values.shape} does not match grid "
                f"{self.height}x{self.width}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _check_kernel_fits(kernel: ConvolutionKernel, width: int, height: int):
    if kernel.size > min(width, height):
        raise GeometryError(
            f"kernel of size {kernel.size} does not fit in a {width}x{height} image"
        )


def blur_apply(cube: SpectralCube, kernel: ConvolutionKernel) -> SpectralCube:
    """Cyclically convolve every band with the kernel (spatial domain)."""
    _check_kernel_fits(kernel, cube.width, cube.height)
    out = kernels.cyclic_conv2d(cube.to_images(), kernel.taps)
    return SpectralCube.from_images(out)


def blur_adjoint(cube: SpectralCube, kernel: ConvolutionKernel) -> SpectralCube:
    """Adjoint of `blur_apply`: cyclic correlation, i.e. convolution with the
    point-reflected kernel."""
    _check_kernel_fits(kernel, cube.width, cube.height)
    reflected = kernel.taps[::-1, ::-1]
    out = kernels.cyclic_conv2d(cube.to_images(), reflected)
    return SpectralCube.from_images(out)


def subsample_apply(cube: SpectralCube, pattern: SubsamplingPattern) -> SpectralCube:
    """Keep pixels on the decimation grid; output is factor times smaller."""
    pattern.check_divides(cube.width, cube.height)
    images = cube.to_images()
    kept = images[:, pattern.offset_y :: pattern.factor, pattern.offset_x :: pattern.factor]
    return SpectralCube.from_images(kept)


def subsample_adjoint(
    cube: SpectralCube, pattern: SubsamplingPattern, full_width: int, full_height: int
) -> SpectralCube:
    """Zero-filled upsampling: retained positions get the input values."""
    pattern.check_divides(full_width, full_height)
    if cube.width * pattern.factor != full_width or cube.height * pattern.factor != full_height:
        raise GeometryError(
            f"{cube.width}x{cube.height} cube does not upsample to "
            f"{full_width}x{full_height} with factor {pattern.factor}"
        )
    out = np.zeros((cube.bands, full_height, full_width))
    out[:, pattern.offset_y :: pattern.factor, pattern.offset_x :: pattern.factor] = cube.to_images()
    return SpectralCube.from_images(out)


def spectral_apply(cube: SpectralCube, response: SpectralResponse) -> SpectralCube:
    """Mix bands at every pixel: out = response.matrix @ cube rows."""
    if response.in_bands != cube.bands:
        raise GeometryError(
            f"response expects {response.in_bands} bands, cube has {cube.bands}"
        )
    return cube.with_data(response.matrix @ cube.data)


def spectral_adjoint(cube: SpectralCube, response: SpectralResponse) -> SpectralCube:
    if response.out_bands != cube.bands:
        raise GeometryError(
            f"response adjoint expects {response.out_bands} bands, cube has {cube.bands}"
        )
    return cube.with_data(response.matrix.T @ cube.data)


def _diff(images: np.ndarray, axis: int, adjoint: bool) -> np.ndarray:
    if adjoint:
        return np.roll(images, 1, axis=axis) - images
    return np.roll(images, -1, axis=axis) - images


def diff_h(cube: SpectralCube) -> SpectralCube:
    """Forward horizontal difference with wraparound: value(x+1) - value(x)."""
    return SpectralCube.from_images(_diff(cube.to_images(), axis=2, adjoint=False))


def diff_v(cube: SpectralCube) -> SpectralCube:
    """Forward vertical difference with wraparound: value(y+1) - value(y)."""
    return SpectralCube.from_images(_diff(cube.to_images(), axis=1, adjoint=False))


def diff_h_adjoint(cube: SpectralCube) -> SpectralCube:
    return SpectralCube.from_images(_diff(cube.to_images(), axis=2, adjoint=True))


def diff_v_adjoint(cube: SpectralCube) -> SpectralCube:
    return SpectralCube.from_images(_diff(cube.to_images(), axis=1, adjoint=True))


def _embed_kernel(kernel: ConvolutionKernel, width: int, height: int) -> np.ndarray:
    """Place the taps on the grid with the center tap at index (0, 0)."""
    c = kernel.center
    embedded = np.zeros((height, width))
    for i in range(kernel.size):
        for j in range(kernel.size):
            embedded[(i - c) % height, (j - c) % width] += kernel.taps[i, j]
    return embedded


def operator_spectrum(op, width: int, height: int) -> FrequencyDiagonal:
    """DFT eigenvalues of a cyclic operator on the given grid.

    ``op`` is either a ConvolutionKernel or one of the difference selectors
    "h" / "v".  Applying the operator equals ifft2(fft2(band) * values).
    """
    if isinstance(op, ConvolutionKernel):
        _check_kernel_fits(op, width, height)
        embedded = _embed_kernel(op, width, height)
    elif op == "h":
        embedded = np.zeros((height, width))
        embedded[0, 0] = -1.0
        embedded[0, (width - 1) % width] += 1.0
    elif op == "v":
        embedded = np.zeros((height, width))
        embedded[0, 0] = -1.0
        embedded[(height - 1) % height, 0] += 1.0
    else:
        raise ValueError(f"unknown operator selector {op!r} (kernel, 'h', or 'v')")
    return FrequencyDiagonal(width, height, np.fft.fft2(embedded))


def spectrum_apply(cube: SpectralCube, spectrum: FrequencyDiagonal) -> SpectralCube:
    """Apply a diagonalized cyclic operator in the frequency domain."""
    if (cube.width, cube.height) != (spectrum.width, spectrum.height):
        raise GeometryError(
            f"spectrum grid {spectrum.width}x{spectrum.height} does not match cube "
            f"{cube.width}x{cube.height}"
        )
    freq = np.fft.fft2(cube.to_images(), axes=(-2, -1))
    out = np.fft.ifft2(freq * spectrum.values, axes=(-2, -1)).real
    return SpectralCube.from_images(out)


def zoh_upsample(
    cube: SpectralCube, pattern: SubsamplingPattern, full_width: int, full_height: int
) -> SpectralCube:
    """Zero-order-hold upsampling: each low-res pixel fills its factor-by-factor
    block, aligned so `subsample_apply` recovers the input exactly."""
    pattern.check_divides(full_width, full_height)
    if cube.width * pattern.factor != full_width or cube.height * pattern.factor != full_height:
        raise GeometryError(
            f"{cube.width}x{cube.height} cube does not upsample to "
            f"{full_width}x{full_height} with factor {pattern.factor}"
        )
    images = cube.to_images()
    out = np.repeat(np.repeat(images, pattern.factor, axis=1), pattern.factor, axis=2)
    out = np.roll(out, (pattern.offset_y, pattern.offset_x), axis=(1, 2))
    return SpectralCube.from_images(out)
