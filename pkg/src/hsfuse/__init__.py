"""hsfuse: convex fusion of hyperspectral and multispectral images.

Reconstructs an image with both high spectral and high spatial resolution
from a co-registered pair of observations, modeling the sensors as a
band-independent cyclic blur, grid decimation, and spectral mixing, with
a low-rank spectral subspace and an edge-aligning vector total variation
regularizer solved by an alternating-direction method.  Ships with the
simulation, sensor-calibration, and quality-evaluation tooling needed to
exercise the solver end to end.
"""

from ._accel import NUMBA_ENABLED
from .calibration import calibrate
from .cube import (
    ConvolutionKernel,
    SpectralCube,
    SpectralResponse,
    SubsamplingPattern,
    SubspaceBasis,
    basis_from_cube,
    basis_to_cube,
    cube_read,
    cube_write,
    kernel_read,
    kernel_write,
    response_read,
    response_write,
)
from .errors import (
    CubeFormatError,
    DivergenceError,
    FusionError,
    GeometryError,
    NumericalError,
)
from .metrics import ergas, per_band_rmse, qnr, sam, sam_stats, uiqi
from .operators import (
    FrequencyDiagonal,
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
from .solver import FusionDiagnostics, FusionParams, fuse
from .subspace import choose_rank, coefficients, estimate_subspace, expand, project_denoise
from .synthesis import (
    add_noise_snr,
    box_response,
    make_synthetic_truth,
    simulate_pair,
    starck_murtagh_kernel,
)
from .vtv import GradientPair, vtv_prox, vtv_value

__version__ = "0.1.0"
