import numpy as np
import pytest

from hsfuse.cube import SpectralCube, SubspaceBasis
from hsfuse.errors import GeometryError, NumericalError
from hsfuse.subspace import choose_rank, coefficients, estimate_subspace, expand, project_denoise
from hsfuse.synthesis import add_noise_snr, make_synthetic_truth
from tests.conftest import random_cube


class TestEstimateSubspace:
    def test_rank_one_recovers_direction(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(40)
        cube = SpectralCube(6, 8, 5, np.outer(u, v))
        basis, svals = estimate_subspace(cube, 1)
        direction = u / np.linalg.norm(u)
        got = basis.matrix[:, 0]
        # sign convention: the largest-magnitude entry is positive
        if direction[np.argmax(np.abs(direction))] < 0:
            direction = -direction
        np.testing.assert_allclose(got, direction, atol=1e-10)
        assert svals[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
        assert svals[1] == pytest.approx(0.0, abs=1e-6)

    def test_full_rank_gives_identity_projector(self, rng):
        cube = random_cube(rng, 5, 6, 6)
        basis, _ = estimate_subspace(cube, 5)
        projector = basis.matrix @ basis.matrix.T
        np.testing.assert_allclose(projector, np.eye(5), atol=1e-10)

    def test_discarded_energy_matches_svd_oracle(self, rng):
        cube = random_cube(rng, 10, 20, 5)
        basis, svals = estimate_subspace(cube, 3)
        residual = cube.data - basis.matrix @ (basis.matrix.T @ cube.data)
        # independent oracle: full dense SVD of the data matrix
        oracle_svals = np.linalg.svd(cube.data, compute_uv=False)
        np.testing.assert_allclose(svals, oracle_svals, rtol=1e-10)
        expected = np.sum(oracle_svals[3:] ** 2)
        assert np.sum(residual**2) == pytest.approx(expected, rel=1e-9)

    def test_projector_matches_svd_oracle(self, rng):
        cube = random_cube(rng, 8, 12, 6)
        basis, _ = estimate_subspace(cube, 4)
        u, _, _ = np.linalg.svd(cube.data, full_matrices=False)
        oracle_projector = u[:, :4] @ u[:, :4].T
        np.testing.assert_allclose(basis.matrix @ basis.matrix.T, oracle_projector, atol=1e-9)

    def test_orthonormal_columns(self, rng):
        cube = random_cube(rng, 7, 9, 9)
        basis, _ = estimate_subspace(cube, 4)
        np.testing.assert_allclose(basis.matrix.T @ basis.matrix, np.eye(4), atol=1e-10)

    def test_rank_out_of_range(self, rng):
        cube = random_cube(rng, 3, 2, 2)
        with pytest.raises(GeometryError):
            estimate_subspace(cube, 0)
        with pytest.raises(GeometryError):
            estimate_subspace(cube, 5)

    def test_zero_cube_rejected(self):
        with pytest.raises(NumericalError):
            estimate_subspace(SpectralCube(2, 2, 2, np.zeros((2, 4))), 1)

    def test_deterministic_sign(self, rng):
        cube = random_cube(rng, 6, 10, 10)
        a, _ = estimate_subspace(cube, 3)
        b, _ = estimate_subspace(cube, 3)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        for col in a.matrix.T:
            assert col[np.argmax(np.abs(col))] > 0


class TestProjection:
    def test_fixes_points_in_span(self, rng):
        basis, _ = estimate_subspace(random_cube(rng, 8, 6, 6), 3)
        coeff = rng.standard_normal((3, 36))
        inside = SpectralCube(8, 6, 6, basis.matrix @ coeff)
        out = project_denoise(inside, basis)
        np.testing.assert_allclose(out.data, inside.data, atol=1e-10)

    def test_idempotent(self, rng):
        cube = random_cube(rng, 8, 6, 6)
        basis, _ = estimate_subspace(cube, 3)
        once = project_denoise(cube, basis)
        twice = project_denoise(once, basis)
        np.testing.assert_allclose(twice.data, once.data, atol=1e-12)

    def test_annihilates_orthogonal_complement(self, rng):
        cube = random_cube(rng, 8, 6, 6)
        basis, _ = estimate_subspace(cube, 3)
        complement = cube.data - basis.matrix @ (basis.matrix.T @ cube.data)
        out = project_denoise(SpectralCube(8, 6, 6, complement), basis)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-10)

    def test_non_expansive(self, rng):
        cube = random_cube(rng, 9, 7, 7)
        basis, _ = estimate_subspace(cube, 4)
        assert np.linalg.norm(project_denoise(cube, basis).data) <= np.linalg.norm(cube.data) + 1e-12

    def test_reconstruction_error_monotone_in_rank(self, rng):
        cube = random_cube(rng, 8, 10, 10)
        errors = []
        for rank in range(1, 9):
            basis, _ = estimate_subspace(cube, rank)
            errors.append(np.linalg.norm(project_denoise(cube, basis).data - cube.data))
        assert all(a >= b - 1e-9 for a, b in zip(errors, errors[1:]))


class TestCoefficients:
    def test_basis_maps_to_identity_columns(self, rng):
        basis, _ = estimate_subspace(random_cube(rng, 6, 5, 5), 4)
        cube = SpectralCube(6, 4, 1, basis.matrix[:, :4])
        got = coefficients(cube, basis)
        np.testing.assert_allclose(got.data, np.eye(4), atol=1e-12)

    def test_expand_of_coefficients_is_projection(self, rng):
        cube = random_cube(rng, 6, 5, 5)
        basis, _ = estimate_subspace(cube, 2)
        np.testing.assert_allclose(
            expand(coefficients(cube, basis), basis).data,
            project_denoise(cube, basis).data,
            atol=1e-12,
        )

    def test_matches_dense_multiply(self, rng):
        cube = random_cube(rng, 6, 5, 5)
        matrix, _ = np.linalg.qr(rng.standard_normal((6, 3)))
        basis = SubspaceBasis(matrix)
        np.testing.assert_allclose(coefficients(cube, basis).data, matrix.T @ cube.data, atol=1e-13)

    def test_band_mismatch(self, rng):
        basis, _ = estimate_subspace(random_cube(rng, 6, 5, 5), 2)
        with pytest.raises(GeometryError):
            coefficients(random_cube(rng, 7, 5, 5), basis)


class TestChooseRank:
    def test_dominant_value(self):
        assert choose_rank(np.array([1.0, 0.0, 0.0]), 0.9995) == 1

    def test_unsorted_input_sorted_internally(self):
        assert choose_rank(np.array([3.0, 4.0]), 1.0) == 2
        assert choose_rank(np.array([3.0, 4.0]), 0.6) == 1

    def test_empty_rejected(self):
        with pytest.raises(NumericalError):
            choose_rank(np.array([]), 0.5)

    def test_noisy_low_rank_cube(self):
        # Oracle: full SVD of the noisy cube, cumulative energy by hand.
        truth = make_synthetic_truth(bands=30, rank=5, width=32, height=32, seed=7)
        noisy = add_noise_snr(truth, 30.0, seed=11)
        oracle_svals = np.linalg.svd(noisy.data, compute_uv=False)
        energies = oracle_svals**2
        fraction = np.cumsum(energies) / energies.sum()
        oracle_rank = int(np.argmax(fraction >= 0.999)) + 1
        _, svals = estimate_subspace(noisy, 1)
        got = choose_rank(svals, 0.999)
        assert got == oracle_rank
        assert got == 5
