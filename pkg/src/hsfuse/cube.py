"""Core image and operator data types, plus their on-disk formats.

A spectral cube is stored as a bands-by-pixels matrix: each row holds one
band with pixels in row-major order, x varying fastest, so pixel (x, y)
lives at column ``y * width + x``.  All computation is done in float64;
cube files store float32 (see `cube_write`).

File formats:

* Cube: ``<name>.json`` header ``{"bands", "width", "height",
  "dtype": "f32le", "data": "<name>.raw"}`` next to ``<name>.raw``
  holding bands*width*height little-endian float32 values, band 0 first,
  each band row-major.
* Spectral response: CSV, one row per output band, one column per input band.
* Convolution kernel: CSV, k rows by k columns, odd k.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CubeFormatError, GeometryError, NumericalError

__all__ = [
    "SpectralCube",
    "ConvolutionKernel",
    "SubsamplingPattern",
    "SpectralResponse",
    "SubspaceBasis",
    "cube_read",
    "cube_write",
    "kernel_read",
    "kernel_write",
    "response_read",
    "response_write",
    "basis_to_cube",
    "basis_from_cube",
]


def _as_readonly_f64(arr, name: str) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise CubeFormatError(f"{name} contains a non-finite value at index {tuple(bad)}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpectralCube:
    """Bands-by-pixels image matrix with its spatial geometry.

    ``data[b, y * width + x]`` is the value of band ``b`` at pixel (x, y).
    Instances are immutable and safe to share across threads.
    """

    bands: int
    width: int
    height: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.bands < 1 or self.width < 1 or self.height < 1:
            raise GeometryError(
                f"cube dimensions must be positive, got "
                f"{self.bands} bands, {self.width}x{self.height} pixels"
            )
        data = np.asarray(self.data)
        if data.shape != (self.bands, self.width * self.height):
            raise GeometryError(
                f"data shape {data.shape} does not match "
                f"{self.bands} bands x {self.width * self.height} pixels"
            )
        object.__setattr__(self, "data", _as_readonly_f64(data, "cube data"))

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def to_images(self) -> np.ndarray:
        """Read-only view of shape (bands, height, width)."""
        return self.data.reshape(self.bands, self.height, self.width)

    def band_image(self, band: int) -> np.ndarray:
        return self.to_images()[band]

    @classmethod
    def from_images(cls, images: np.ndarray) -> "SpectralCube":
        """Build a cube from a (bands, height, width) array."""
        images = np.asarray(images)
        if images.ndim != 3:
            raise GeometryError(f"expected a (bands, height, width) array, got shape {images.shape}")
        bands, height, width = images.shape
        return cls(bands, width, height, images.reshape(bands, height * width))

    def with_data(self, data: np.ndarray) -> "SpectralCube":
        """New cube with the same geometry and different band count/values."""
        data = np.asarray(data)
        return SpectralCube(data.shape[0], self.width, self.height, data)


@dataclass(frozen=True)
class ConvolutionKernel:
    """Square 2-D point spread function with odd side length.

    The center tap sits at ((k-1)/2, (k-1)/2).  Kernels produced by this
    package sum to 1; `kernel_read` normalizes user-supplied taps.
    """

    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise GeometryError(f"kernel taps must be square, got shape {taps.shape}")
        if taps.shape[0] % 2 == 0:
            raise GeometryError(f"kernel side length must be odd, got {taps.shape[0]}")
        object.__setattr__(self, "taps", _as_readonly_f64(taps, "kernel taps"))

    @property
    def size(self) -> int:
        return self.taps.shape[0]

    @property
    def center(self) -> int:
        return (self.taps.shape[0] - 1) // 2

    @classmethod
    def normalized(cls, taps: np.ndarray) -> "ConvolutionKernel":
        """Kernel with taps rescaled to unit sum (flux preserving)."""
        taps = np.asarray(taps, dtype=np.float64)
        total = taps.sum()
        if abs(total) < 1e-300:
            raise NumericalError("kernel taps sum to zero and cannot be normalized")
        return cls(taps / total)

    @classmethod
    def delta(cls, size: int = 1) -> "ConvolutionKernel":
        """Identity kernel: a single unit tap at the center."""
        taps = np.zeros((size, size))
        taps[(size - 1) // 2, (size - 1) // 2] = 1.0
        return cls(taps)


@dataclass(frozen=True)
class SubsamplingPattern:
    """Uniform grid decimation keeping pixels at x = offset_x (mod factor),
    y = offset_y (mod factor).  Only applies to grids divisible by factor."""

    factor: int
    offset_x: int = 0
    offset_y: int = 0

    def __post_init__(self):
        if self.factor < 1:
            raise GeometryError(f"subsampling factor must be positive, got {self.factor}")
        if not (0 <= self.offset_x < self.factor and 0 <= self.offset_y < self.factor):
            raise GeometryError(
                f"offsets ({self.offset_x}, {self.offset_y}) must lie in [0, {self.factor})"
            )

    def check_divides(self, width: int, height: int):
        if width % self.factor or height % self.factor:
            raise GeometryError(
                f"{width}x{height} grid is not divisible by subsampling factor {self.factor}"
            )


@dataclass(frozen=True)
class SpectralResponse:
    """Matrix mapping many narrow input bands to few wide output bands.

    Shape (out_bands, in_bands); every row must have at least one nonzero
    entry so each output band sees some input.
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix)
        if matrix.ndim != 2:
            raise GeometryError(f"response matrix must be 2-D, got shape {matrix.shape}")
        if np.any(np.all(matrix == 0, axis=1)):
            row = int(np.argwhere(np.all(matrix == 0, axis=1))[0, 0])
            raise GeometryError(f"response row {row} is all zeros")
        object.__setattr__(self, "matrix", _as_readonly_f64(matrix, "response matrix"))

    @property
    def out_bands(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_bands(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, bands: int) -> "SpectralResponse":
        return cls(np.eye(bands))


@dataclass(frozen=True)
class SubspaceBasis:
    """Columns spanning the low-dimensional space where the spectra live.

    Shape (bands, rank).  Bases built by `subspace.estimate_subspace` have
    orthonormal columns; loaded bases are taken as-is.
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise GeometryError(f"basis must be a 2-D matrix with >= 1 column, got shape {matrix.shape}")
        object.__setattr__(self, "matrix", _as_readonly_f64(matrix, "basis matrix"))

    @property
    def bands(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _json_path(path: str) -> str:
    return path if path.endswith(".json") else path + ".json"


def cube_read(path: str) -> SpectralCube:
    """Load a cube from its JSON header (``.json`` appended if missing)."""
    header_path = _json_path(path)
    if not os.path.exists(header_path):
        raise CubeFormatError(f"cube header not found: {header_path}")
    try:
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CubeFormatError(f"unreadable cube header {header_path}: {exc}") from exc

    for key in ("bands", "width", "height", "dtype", "data"):
        if key not in header:
            raise CubeFormatError(f"cube header {header_path} is missing field '{key}'")
    if header["dtype"] != "f32le":
        raise CubeFormatError(f"unsupported cube dtype {header['dtype']!r} (expected 'f32le')")

    bands, width, height = int(header["bands"]), int(header["width"]), int(header["height"])
    raw_path = os.path.join(os.path.dirname(header_path) or ".", header["data"])
    if not os.path.exists(raw_path):
        raise CubeFormatError(f"cube payload not found: {raw_path}")

    expected = bands * width * height
    payload = np.fromfile(raw_path, dtype="<f4")
    if payload.size != expected:
        raise CubeFormatError(
            f"cube payload {raw_path} holds {payload.size} values, header declares {expected}"
        )
    data = payload.astype(np.float64).reshape(bands, width * height)
    bad = ~np.isfinite(data)
    if bad.any():
        b, p = np.argwhere(bad)[0]
        raise CubeFormatError(f"cube {raw_path} has a non-finite value at band {b}, pixel {p}")
    return SpectralCube(bands, width, height, data)


def cube_write(cube: SpectralCube, path: str):
    """Write ``<path>.json`` and ``<path>.raw``; values are stored as float32."""
    header_path = _json_path(path)
    stem = os.path.basename(header_path)[: -len(".json")]
    raw_name = stem + ".raw"
    raw_path = os.path.join(os.path.dirname(header_path) or ".", raw_name)
    header = {
        "bands": cube.bands,
        "width": cube.width,
        "height": cube.height,
        "dtype": "f32le",
        "data": raw_name,
    }
    try:
        with open(header_path, "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2)
            fh.write("\n")
        cube.data.astype("<f4").tofile(raw_path)
    except OSError as exc:
        raise CubeFormatError(f"cannot write cube {path}: {exc}") from exc


def _read_csv_matrix(path: str, what: str) -> np.ndarray:
    if not os.path.exists(path):
        raise CubeFormatError(f"{what} file not found: {path}")
    try:
        matrix = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise CubeFormatError(f"unreadable {what} CSV {path}: {exc}") from exc
    if not np.all(np.isfinite(matrix)):
        raise CubeFormatError(f"{what} CSV {path} contains non-finite values")
    return matrix


def kernel_read(path: str) -> ConvolutionKernel:
    """Load a kernel CSV; taps are normalized to unit sum."""
    return ConvolutionKernel.normalized(_read_csv_matrix(path, "kernel"))


def kernel_write(kernel: ConvolutionKernel, path: str):
    np.savetxt(path, kernel.taps, delimiter=",", fmt="%.17g")


def response_read(path: str) -> SpectralResponse:
    return SpectralResponse(_read_csv_matrix(path, "spectral response"))


def response_write(response: SpectralResponse, path: str):
    np.savetxt(path, response.matrix, delimiter=",", fmt="%.17g")


def basis_to_cube(basis: SubspaceBasis) -> SpectralCube:
    """Represent a basis as a (bands, rank x 1) cube for cube-file persistence."""
    return SpectralCube(basis.bands, basis.rank, 1, basis.matrix)


def basis_from_cube(cube: SpectralCube) -> SubspaceBasis:
    if cube.height != 1:
        raise GeometryError(f"basis cube must have height 1, got {cube.height}")
    return SubspaceBasis(cube.data)
