"""Signal-subspace estimation and projection for spectral denoising.

Spectra of a hyperspectral cube concentrate in a subspace of dimension far
below the band count.  The basis is taken from the top left singular
vectors of the band-by-pixel matrix, computed through an eigendecomposition
of the small bands-by-bands Gram matrix (identical left vectors, much
cheaper than a full SVD when pixels outnumber bands).
"""

from __future__ import annotations

import numpy as np

from .cube import SpectralCube, SubspaceBasis
from .errors import GeometryError, NumericalError

__all__ = ["estimate_subspace", "project_denoise", "coefficients", "expand", "choose_rank"]

DEFAULT_RANK = 10
DEFAULT_ENERGY_FRACTION = 0.9995


def estimate_subspace(cube: SpectralCube, rank: int) -> tuple[SubspaceBasis, np.ndarray]:
    """Top-`rank` left singular vectors of the cube matrix.

    Returns the basis (columns orthonormal, ordered by decreasing singular
    value) together with the full singular-value list for energy
    diagnostics.  Each singular vector is sign-fixed so its entry of
    largest magnitude is positive, for reproducibility.
    """
    if not 1 <= rank <= min(cube.bands, cube.n_pixels):
        raise GeometryError(
            f"rank {rank} out of range for a {cube.bands}-band, "
            f"{cube.n_pixels}-pixel cube"
        )
    if not cube.data.any():
        raise NumericalError("cannot estimate a subspace from an all-zero cube")

    gram = cube.data @ cube.data.T
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    singular_values = np.sqrt(np.clip(eigvals, 0.0, None))
    basis = eigvecs[:, :rank].copy()
    for col in range(rank):
        anchor = np.argmax(np.abs(basis[:, col]))
        if basis[anchor, col] < 0:
            basis[:, col] = -basis[:, col]
    return SubspaceBasis(basis), singular_values


def coefficients(cube: SpectralCube, basis: SubspaceBasis) -> SpectralCube:
    """Representation coefficients: basis.T @ cube rows."""
    if basis.bands != cube.bands:
        raise GeometryError(f"basis has {basis.bands} bands, cube has {cube.bands}")
    return cube.with_data(basis.matrix.T @ cube.data)


def expand(coeffs: SpectralCube, basis: SubspaceBasis) -> SpectralCube:
    """Map coefficients back to band space: basis @ coefficient rows."""
    if basis.rank != coeffs.bands:
        raise GeometryError(f"basis rank {basis.rank} does not match {coeffs.bands} coefficient rows")
    return coeffs.with_data(basis.matrix @ coeffs.data)


def project_denoise(cube: SpectralCube, basis: SubspaceBasis) -> SpectralCube:
    """Orthogonal projection onto the basis span; idempotent."""
    return expand(coefficients(cube, basis), basis)


def choose_rank(singular_values: np.ndarray, energy_fraction: float = DEFAULT_ENERGY_FRACTION) -> int:
    """Smallest rank whose leading singular values carry the requested
    fraction of the total squared energy.  Values are sorted internally."""
    singular_values = np.asarray(singular_values, dtype=np.float64)
    if singular_values.size == 0:
        raise NumericalError("empty singular-value list")
    if not 0.0 < energy_fraction <= 1.0:
        raise ValueError(f"energy fraction must lie in (0, 1], got {energy_fraction}")
    energies = np.sort(singular_values**2)[::-1]
    total = energies.sum()
    if total == 0.0:
        raise NumericalError("all singular values are zero")
    cumulative = np.cumsum(energies)
    return int(np.searchsorted(cumulative, energy_fraction * total - 1e-12 * total) + 1)
