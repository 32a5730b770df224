import numpy as np
import pytest

from hsfuse.cube import ConvolutionKernel, SpectralCube, SpectralResponse, SubsamplingPattern
from hsfuse.errors import GeometryError
from hsfuse.operators import (
    blur_adjoint,
    blur_apply,
    diff_h,
    diff_h_adjoint,
    diff_v,
    diff_v_adjoint,
    operator_spectrum,
    spectral_adjoint,
    spectral_apply,
    spectrum_apply,
    subsample_adjoint,
    subsample_apply,
    zoh_upsample,
)
from tests.conftest import random_cube
from tests.test_kernels import brute_cyclic_conv


def dot(a: SpectralCube, b: SpectralCube) -> float:
    return float(np.sum(a.data * b.data))


def rel_close(a, b, tol):
    scale = max(abs(a), abs(b), 1e-30)
    return abs(a - b) <= tol * scale


class TestBlur:
    def test_identity_kernel(self, rng):
        cube = random_cube(rng, 2, 5, 4)
        out = blur_apply(cube, ConvolutionKernel.delta())
        np.testing.assert_allclose(out.data, cube.data, atol=1e-15)

    def test_flux_preservation_on_constant(self, rng):
        cube = SpectralCube(1, 6, 6, np.full((1, 36), 3.25))
        kernel = ConvolutionKernel.normalized(np.abs(rng.standard_normal((3, 3))) + 0.1)
        out = blur_apply(cube, kernel)
        np.testing.assert_allclose(out.data, 3.25, rtol=1e-13)

    def test_matches_spatial_sum_oracle(self, rng):
        cube = random_cube(rng, 1, 4, 4)
        kernel = ConvolutionKernel(rng.standard_normal((3, 3)))
        expected = brute_cyclic_conv(cube.to_images(), kernel.taps)
        np.testing.assert_allclose(blur_apply(cube, kernel).to_images(), expected, atol=1e-12)

    def test_symmetric_kernel_self_adjoint(self, rng):
        cube = random_cube(rng, 2, 6, 6)
        taps = rng.standard_normal((3, 3))
        kernel = ConvolutionKernel(taps + taps[::-1, ::-1])
        np.testing.assert_allclose(
            blur_adjoint(cube, kernel).data, blur_apply(cube, kernel).data, atol=1e-13
        )

    def test_adjoint_identity(self, rng):
        kernel = ConvolutionKernel(rng.standard_normal((5, 5)))
        x = random_cube(rng, 3, 8, 7)
        y = random_cube(rng, 3, 8, 7)
        assert rel_close(dot(blur_apply(x, kernel), y), dot(x, blur_adjoint(y, kernel)), 1e-10)

    def test_delta_adjoint_is_identity(self, rng):
        cube = random_cube(rng, 1, 4, 4)
        np.testing.assert_allclose(blur_adjoint(cube, ConvolutionKernel.delta(3)).data, cube.data, atol=1e-14)

    def test_kernel_too_large(self, rng):
        with pytest.raises(GeometryError):
            blur_apply(random_cube(rng, 1, 4, 4), ConvolutionKernel(np.ones((5, 5)) / 25))


class TestSubsample:
    def test_factor_one_identity(self, rng):
        cube = random_cube(rng, 2, 5, 3)
        out = subsample_apply(cube, SubsamplingPattern(1))
        np.testing.assert_array_equal(out.data, cube.data)

    def test_four_by_four_factor_two(self):
        cube = SpectralCube(1, 4, 4, np.arange(16.0).reshape(1, 16))
        out = subsample_apply(cube, SubsamplingPattern(2))
        # retained pixels (0,0), (2,0), (0,2), (2,2) of the row-major ramp
        np.testing.assert_array_equal(out.data[0], [0.0, 2.0, 8.0, 10.0])

    def test_ramp_factor_four_frozen_oracle(self):
        # 8x8 ramp value = y*8 + x; keeping x,y in {0, 4} selects these four:
        cube = SpectralCube(1, 8, 8, np.arange(64.0).reshape(1, 64))
        out = subsample_apply(cube, SubsamplingPattern(4))
        np.testing.assert_array_equal(out.data[0], [0.0, 4.0, 32.0, 36.0])

    def test_offsets_select_shifted_grid(self):
        cube = SpectralCube(1, 4, 4, np.arange(16.0).reshape(1, 16))
        out = subsample_apply(cube, SubsamplingPattern(2, offset_x=1, offset_y=1))
        np.testing.assert_array_equal(out.data[0], [5.0, 7.0, 13.0, 15.0])

    def test_adjoint_dot_exact(self, rng):
        # fsum makes both sides correctly rounded, so equality is exact:
        # the nonzero products are the same multiset on either side.
        import math

        pattern = SubsamplingPattern(2, 1, 0)
        x = random_cube(rng, 2, 6, 4)
        y = random_cube(rng, 2, 3, 2)
        lhs = math.fsum((subsample_apply(x, pattern).data * y.data).ravel())
        rhs = math.fsum((x.data * subsample_adjoint(y, pattern, 6, 4).data).ravel())
        assert lhs == rhs

    def test_apply_after_adjoint_is_identity(self, rng):
        pattern = SubsamplingPattern(3)
        small = random_cube(rng, 2, 2, 2)
        big = subsample_adjoint(small, pattern, 6, 6)
        np.testing.assert_array_equal(subsample_apply(big, pattern).data, small.data)

    def test_zero_fill_counts(self):
        one = SpectralCube(1, 1, 1, np.array([[7.0]]))
        up = subsample_adjoint(one, SubsamplingPattern(2), 2, 2)
        assert np.count_nonzero(up.data) == 1
        assert up.data.sum() == 7.0

    def test_divisibility_error(self, rng):
        with pytest.raises(GeometryError):
            subsample_apply(random_cube(rng, 1, 5, 4), SubsamplingPattern(2))


class TestSpectral:
    def test_identity_response(self, rng):
        cube = random_cube(rng, 4, 3, 3)
        out = spectral_apply(cube, SpectralResponse.identity(4))
        np.testing.assert_allclose(out.data, cube.data, atol=1e-15)

    def test_all_ones_row_sums_bands(self):
        data = np.array([[1.0], [2.0], [4.0]])
        cube = SpectralCube(3, 1, 1, data)
        out = spectral_apply(cube, SpectralResponse(np.ones((1, 3))))
        assert out.data[0, 0] == 7.0

    def test_matches_dense_multiply(self, rng):
        cube = random_cube(rng, 10, 6, 5)
        response = SpectralResponse(rng.standard_normal((4, 10)))
        np.testing.assert_allclose(
            spectral_apply(cube, response).data, response.matrix @ cube.data, atol=1e-12
        )

    def test_band_mismatch(self, rng):
        with pytest.raises(GeometryError):
            spectral_apply(random_cube(rng, 3, 2, 2), SpectralResponse(np.ones((1, 4))))

    def test_adjoint_identity(self, rng):
        response = SpectralResponse(rng.standard_normal((3, 8)))
        x = random_cube(rng, 8, 4, 4)
        y = random_cube(rng, 3, 4, 4)
        assert rel_close(dot(spectral_apply(x, response), y), dot(x, spectral_adjoint(y, response)), 1e-12)


class TestDifferences:
    def test_constant_band_zero(self):
        cube = SpectralCube(1, 4, 3, np.full((1, 12), 2.0))
        assert not diff_h(cube).data.any()
        assert not diff_v(cube).data.any()

    def test_periodic_wrap_row(self):
        cube = SpectralCube(1, 4, 1, np.array([[1.0, 2.0, 3.0, 4.0]]))
        np.testing.assert_array_equal(diff_h(cube).data[0], [1.0, 1.0, 1.0, -3.0])

    def test_vertical_matches_transposed_horizontal(self, rng):
        cube = random_cube(rng, 1, 5, 5)
        transposed = SpectralCube.from_images(cube.to_images().transpose(0, 2, 1))
        np.testing.assert_allclose(
            diff_v(cube).to_images(), diff_h(transposed).to_images().transpose(0, 2, 1), atol=1e-15
        )

    @pytest.mark.parametrize(
        "forward,adjoint", [(diff_h, diff_h_adjoint), (diff_v, diff_v_adjoint)]
    )
    def test_adjoint_identity(self, rng, forward, adjoint):
        x = random_cube(rng, 3, 7, 5)
        y = random_cube(rng, 3, 7, 5)
        assert rel_close(dot(forward(x), y), dot(x, adjoint(y)), 1e-12)


class TestSpectra:
    def test_delta_kernel_all_ones(self):
        spec = operator_spectrum(ConvolutionKernel.delta(3), 6, 4)
        np.testing.assert_allclose(spec.values, 1.0, atol=1e-12)

    def test_diff_h_analytic_eigenvalues(self):
        width, height = 8, 5
        spec = operator_spectrum("h", width, height)
        fx = np.arange(width)
        expected_row = np.exp(2j * np.pi * fx / width) - 1.0
        for row in spec.values:
            np.testing.assert_allclose(row, expected_row, atol=1e-12)

    def test_conjugate_symmetry(self, rng):
        kernel = ConvolutionKernel(rng.standard_normal((3, 3)))
        spec = operator_spectrum(kernel, 6, 6).values
        for fy in range(6):
            for fx in range(6):
                assert abs(spec[(-fy) % 6, (-fx) % 6] - np.conj(spec[fy, fx])) < 1e-10

    @pytest.mark.parametrize("selector", ["h", "v"])
    def test_diff_spectrum_matches_spatial(self, rng, selector):
        cube = random_cube(rng, 2, 8, 6)
        spec = operator_spectrum(selector, 8, 6)
        direct = diff_h(cube) if selector == "h" else diff_v(cube)
        np.testing.assert_allclose(spectrum_apply(cube, spec).data, direct.data, atol=1e-11)

    def test_kernel_spectrum_matches_blur(self, rng):
        cube = random_cube(rng, 1, 8, 8)
        kernel = ConvolutionKernel(rng.standard_normal((3, 3)))
        spec = operator_spectrum(kernel, 8, 8)
        a = spectrum_apply(cube, spec).data
        b = blur_apply(cube, kernel).data
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_unknown_selector(self):
        with pytest.raises(ValueError):
            operator_spectrum("diag", 4, 4)


class TestOperatorProperties:
    """Spec-level invariants across all five operator/adjoint pairs."""

    def test_all_pairs_dot_identity(self, rng):
        for _ in range(20):
            bands = int(rng.integers(1, 5))
            width = int(rng.integers(2, 7)) * 2
            height = int(rng.integers(2, 7)) * 2
            x = random_cube(rng, bands, width, height)

            kernel = ConvolutionKernel(rng.standard_normal((3, 3)))
            y = random_cube(rng, bands, width, height)
            assert rel_close(dot(blur_apply(x, kernel), y), dot(x, blur_adjoint(y, kernel)), 1e-9)
            assert rel_close(dot(diff_h(x), y), dot(x, diff_h_adjoint(y)), 1e-9)
            assert rel_close(dot(diff_v(x), y), dot(x, diff_v_adjoint(y)), 1e-9)

            pattern = SubsamplingPattern(2, int(rng.integers(0, 2)), int(rng.integers(0, 2)))
            ys = random_cube(rng, bands, width // 2, height // 2)
            assert rel_close(
                dot(subsample_apply(x, pattern), ys),
                dot(x, subsample_adjoint(ys, pattern, width, height)),
                1e-9,
            )

            response = SpectralResponse(rng.standard_normal((2, bands)))
            ym = random_cube(rng, 2, width, height)
            assert rel_close(
                dot(spectral_apply(x, response), ym), dot(x, spectral_adjoint(ym, response)), 1e-9
            )

    def test_blur_commutes_with_differences(self, rng):
        cube = random_cube(rng, 2, 8, 8)
        kernel = ConvolutionKernel.normalized(np.abs(rng.standard_normal((3, 3))) + 0.1)
        np.testing.assert_allclose(
            diff_h(blur_apply(cube, kernel)).data,
            blur_apply(diff_h(cube), kernel).data,
            rtol=1e-9,
            atol=1e-12,
        )
        np.testing.assert_allclose(
            diff_v(blur_apply(cube, kernel)).data,
            blur_apply(diff_v(cube), kernel).data,
            rtol=1e-9,
            atol=1e-12,
        )


class TestZohUpsample:
    def test_subsample_recovers_input(self, rng):
        pattern = SubsamplingPattern(3, 1, 2)
        small = random_cube(rng, 2, 3, 2)
        big = zoh_upsample(small, pattern, 9, 6)
        np.testing.assert_array_equal(subsample_apply(big, pattern).data, small.data)

    def test_blocks_are_constant(self):
        small = SpectralCube(1, 2, 1, np.array([[1.0, 2.0]]))
        big = zoh_upsample(small, SubsamplingPattern(2), 4, 2)
        np.testing.assert_array_equal(big.band_image(0), [[1, 1, 2, 2], [1, 1, 2, 2]])
