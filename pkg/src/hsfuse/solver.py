"""Alternating-direction solver for the subspace fusion problem.

Minimizes, over the coefficient image x (rank-by-pixels, on the high-res
grid),

    1/2 ||hsi - basis @ x B M||_F^2
  + lambda_m/2 ||msi - response @ basis @ x||_F^2
  + lambda_phi * vtv(x Dh, x Dv)

where B is the cyclic blur, M the grid decimation, and Dh/Dv the periodic
differences.  Four split variables carry the constraints x B = v1,
x = v2, x Dh = v3, x Dv = v4; each sweep solves the x quadratic in the
frequency domain (all four constraint operators diagonalize there or are
the identity), the v1/v2 quadratics with small precomputed inverses, the
(v3, v4) block with the pixel-wise vector soft threshold, and then takes
a scaled dual ascent step.  Residual norms of transformed quantities are
evaluated in the Fourier domain via Parseval to avoid extra inverse
transforms.

The solver is deterministic: identical inputs and parameters reproduce
bitwise-identical diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cube import ConvolutionKernel, SpectralCube, SpectralResponse, SubsamplingPattern, SubspaceBasis
from .errors import DivergenceError, GeometryError
from .operators import operator_spectrum, zoh_upsample
from .subspace import project_denoise
from .vtv import GradientPair, vtv_prox, vtv_value

__all__ = [
    "FusionParams",
    "Precomputation",
    "SolverState",
    "FusionDiagnostics",
    "precompute",
    "objective",
    "x_update",
    "v1_update",
    "v2_update",
    "v34_update",
    "dual_update",
    "check_convergence",
    "fuse",
]


@dataclass(frozen=True)
class FusionParams:
    """Weights, penalty, and stopping controls for `fuse`.

    ``rank`` is consumed by callers that estimate the subspace basis (the
    CLI does); `fuse` itself takes the basis explicitly.
    """

    lambda_m: float = 1.0
    lambda_phi: float = 5e-4
    mu: float = 0.01
    max_iters: int = 200
    eps_abs: float = 1e-4
    eps_rel: float = 1e-4
    rank: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.lambda_m) and self.lambda_m >= 0):
            raise ValueError(f"lambda_m must be finite and >= 0, got {self.lambda_m}")
        if not (np.isfinite(self.lambda_phi) and self.lambda_phi >= 0):
            raise ValueError(f"lambda_phi must be finite and >= 0, got {self.lambda_phi}")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be finite and positive, got {self.mu}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("eps_abs and eps_rel must be positive")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")


@dataclass
class Precomputation:
    """Quantities fixed across iterations: operator spectra, the two small
    subproblem inverses, data-term caches, and the sampling mask."""

    width: int
    height: int
    spectrum_b: np.ndarray  # (height, width) complex
    spectrum_dh: np.ndarray
    spectrum_dv: np.ndarray
    x_denominator: np.ndarray  # |b|^2 + 1 + |dh|^2 + |dv|^2, real
    inv1: np.ndarray  # (rank, rank): inv(basis^T basis + mu I)
    inv2: np.ndarray  # (rank, rank): inv(lambda_m (R basis)^T (R basis) + mu I)
    basis_t_hsi: np.ndarray  # (rank, n_m): basis^T hsi columns at sampled positions, else 0
    msi_term: np.ndarray  # (rank, n_m): lambda_m (R basis)^T msi
    sample_mask: np.ndarray  # (n_m,) bool
    sampled_cols: np.ndarray  # indices of the sampled pixels
    basis: np.ndarray  # (bands, rank)
    response_basis: np.ndarray  # (msi_bands, rank)
    hsi: np.ndarray  # (bands, n_h)
    msi: np.ndarray  # (msi_bands, n_m)

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


@dataclass
class SolverState:
    """One ADMM iterate: coefficients, split variables, scaled duals, the
    forward images of x, and the residual history."""

    x: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    v4: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    u4: np.ndarray
    xb: np.ndarray
    xdh: np.ndarray
    xdv: np.ndarray
    iteration: int = 0
    # Transformed split variables from the previous sweep (v1 through B^T etc.),
    # kept in the Fourier domain where applicable; None before the first sweep.
    prev_vt: tuple | None = None
    primal_res: list = field(default_factory=list)
    dual_res: list = field(default_factory=list)


@dataclass(frozen=True)
class FusionDiagnostics:
    """Per-iteration objective and residual norms."""

    objective: np.ndarray
    primal_res: np.ndarray
    dual_res: np.ndarray
    iterations: int
    converged: bool


def _fft(arr: np.ndarray, pre: Precomputation) -> np.ndarray:
    return np.fft.fft2(arr.reshape(-1, pre.height, pre.width), axes=(-2, -1))


def _ifft(freq: np.ndarray, n: int) -> np.ndarray:
    return np.fft.ifft2(freq, axes=(-2, -1)).real.reshape(freq.shape[0], n)


def precompute(
    hsi: SpectralCube,
    msi: SpectralCube,
    basis: SubspaceBasis,
    kernel: ConvolutionKernel,
    pattern: SubsamplingPattern,
    response: SpectralResponse,
    params: FusionParams,
) -> Precomputation:
    """Validate geometry and build everything the iteration reuses."""
    if hsi.bands != basis.bands:
        raise GeometryError(f"basis has {basis.bands} bands, HSI has {hsi.bands}")
    if response.in_bands != basis.bands:
        raise GeometryError(f"response expects {response.in_bands} bands, basis has {basis.bands}")
    if msi.bands != response.out_bands:
        raise GeometryError(f"response yields {response.out_bands} bands, MSI has {msi.bands}")
    pattern.check_divides(msi.width, msi.height)
    if (hsi.width, hsi.height) != (msi.width // pattern.factor, msi.height // pattern.factor):
        raise GeometryError(
            f"HSI grid {hsi.width}x{hsi.height} is not the MSI grid "
            f"{msi.width}x{msi.height} decimated by {pattern.factor}"
        )

    width, height = msi.width, msi.height
    spectrum_b = operator_spectrum(kernel, width, height).values
    spectrum_dh = operator_spectrum("h", width, height).values
    spectrum_dv = operator_spectrum("v", width, height).values
    x_denominator = (
        np.abs(spectrum_b) ** 2 + 1.0 + np.abs(spectrum_dh) ** 2 + np.abs(spectrum_dv) ** 2
    )
    assert x_denominator.min() >= 1.0 - 1e-12

    rank = basis.rank
    e = basis.matrix
    re = response.matrix @ e
    inv1 = np.linalg.inv(e.T @ e + params.mu * np.eye(rank))
    inv2 = np.linalg.inv(params.lambda_m * (re.T @ re) + params.mu * np.eye(rank))

    mask_image = np.zeros((height, width), dtype=bool)
    mask_image[pattern.offset_y :: pattern.factor, pattern.offset_x :: pattern.factor] = True
    sample_mask = mask_image.ravel()
    sampled_cols = np.flatnonzero(sample_mask)

    basis_t_hsi = np.zeros((rank, width * height))
    basis_t_hsi[:, sampled_cols] = e.T @ hsi.data

    return Precomputation(
        width=width,
        height=height,
        spectrum_b=spectrum_b,
        spectrum_dh=spectrum_dh,
        spectrum_dv=spectrum_dv,
        x_denominator=x_denominator,
        inv1=inv1,
        inv2=inv2,
        basis_t_hsi=basis_t_hsi,
        msi_term=params.lambda_m * (re.T @ msi.data),
        sample_mask=sample_mask,
        sampled_cols=sampled_cols,
        basis=e,
        response_basis=re,
        hsi=hsi.data,
        msi=msi.data,
    )


def objective_terms(x: np.ndarray, pre: Precomputation, params: FusionParams) -> tuple[float, float, float]:
    """(HSI misfit, MSI misfit, regularizer) evaluated at coefficients x."""
    x_fft = _fft(x, pre)
    xb = _ifft(x_fft * pre.spectrum_b, pre.n_pixels)
    xdh = _ifft(x_fft * pre.spectrum_dh, pre.n_pixels)
    xdv = _ifft(x_fft * pre.spectrum_dv, pre.n_pixels)
    return _objective_terms_from(x, xb, xdh, xdv, pre, params)


def _objective_terms_from(x, xb, xdh, xdv, pre, params):
    hsi_misfit = 0.5 * float(np.sum((pre.hsi - pre.basis @ xb[:, pre.sampled_cols]) ** 2))
    msi_misfit = 0.5 * params.lambda_m * float(np.sum((pre.msi - pre.response_basis @ x) ** 2))
    reg = params.lambda_phi * vtv_value(GradientPair(xdh, xdv))
    return hsi_misfit, msi_misfit, reg


def objective(x: np.ndarray, pre: Precomputation, params: FusionParams) -> float:
    """Value of the fusion objective at coefficient image x (rank, n_m)."""
    return sum(objective_terms(x, pre, params))


def x_update(state: SolverState, pre: Precomputation) -> np.ndarray:
    """Exact minimizer of the four proximity quadratics, via the FFT."""
    x, _, _, _ = _x_update_full(state, pre)
    return x


def _x_update_full(state, pre):
    """x update plus the forward images x B, x Dh, x Dv reusing one spectrum."""
    n = pre.n_pixels
    numerator = (
        _fft(state.v1 - state.u1, pre) * np.conj(pre.spectrum_b)
        + _fft(state.v2 - state.u2, pre)
        + _fft(state.v3 - state.u3, pre) * np.conj(pre.spectrum_dh)
        + _fft(state.v4 - state.u4, pre) * np.conj(pre.spectrum_dv)
    )
    x_fft = numerator / pre.x_denominator
    x = _ifft(x_fft, n)
    xb = _ifft(x_fft * pre.spectrum_b, n)
    xdh = _ifft(x_fft * pre.spectrum_dh, n)
    xdv = _ifft(x_fft * pre.spectrum_dv, n)
    return x, xb, xdh, xdv


def v1_update(state: SolverState, pre: Precomputation, params: FusionParams) -> np.ndarray:
    """Masked per-pixel solve of the HSI data term against its anchor.

    Sampled pixels solve (basis^T basis + mu I) v = basis^T y + mu n;
    unsampled pixels, unseen by the data term, take the anchor n = x B + u1.
    """
    anchor = state.xb + state.u1
    solved = pre.inv1 @ (pre.basis_t_hsi + params.mu * anchor)
    return np.where(pre.sample_mask, solved, anchor)


def v2_update(state: SolverState, pre: Precomputation, params: FusionParams) -> np.ndarray:
    """Columnwise solve of the MSI data term against its anchor x + u2."""
    return pre.inv2 @ (pre.msi_term + params.mu * (state.x + state.u2))


def v34_update(state: SolverState, params: FusionParams) -> tuple[np.ndarray, np.ndarray]:
    """Vector soft threshold of the difference anchors; identity when the
    regularizer weight is zero."""
    gh = state.xdh + state.u3
    gv = state.xdv + state.u4
    if params.lambda_phi == 0.0:
        return gh, gv
    pair = vtv_prox(GradientPair(gh, gv), params.lambda_phi / params.mu)
    return pair.gh, pair.gv


def dual_update(state: SolverState) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scaled dual ascent: each dual accumulates its constraint gap."""
    return (
        state.u1 + (state.xb - state.v1),
        state.u2 + (state.x - state.v2),
        state.u3 + (state.xdh - state.v3),
        state.u4 + (state.xdv - state.v4),
    )


def _stack_norm(arrays) -> float:
    return float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in arrays)))


def _transformed(v1, v2, v3, v4, pre):
    """(v1 B^T, v2, v3 Dh^T, v4 Dv^T) with the transformed parts kept in the
    Fourier domain, scaled so Frobenius norms match the spatial ones."""
    root_n = np.sqrt(pre.n_pixels)
    return (
        _fft(v1, pre) * np.conj(pre.spectrum_b) / root_n,
        v2,
        _fft(v3, pre) * np.conj(pre.spectrum_dh) / root_n,
        _fft(v4, pre) * np.conj(pre.spectrum_dv) / root_n,
    )


def check_convergence(
    state: SolverState, pre: Precomputation, params: FusionParams
) -> tuple[bool, float, float]:
    """Stopping rule on the stacked constraint gaps and the change of the
    transformed split variables, with mixed absolute/relative tolerances."""
    gaps = (
        state.xb - state.v1,
        state.x - state.v2,
        state.xdh - state.v3,
        state.xdv - state.v4,
    )
    primal = _stack_norm(gaps)

    current_vt = _transformed(state.v1, state.v2, state.v3, state.v4, pre)
    if state.prev_vt is None:
        dual = np.inf
    else:
        dual = params.mu * _stack_norm(
            [c - p for c, p in zip(current_vt, state.prev_vt)]
        )
    state.prev_vt = current_vt

    n_elements = state.x.size
    forward_norm = _stack_norm((state.xb, state.x, state.xdh, state.xdv))
    split_norm = _stack_norm((state.v1, state.v2, state.v3, state.v4))
    eps_primal = np.sqrt(4 * n_elements) * params.eps_abs + params.eps_rel * max(
        forward_norm, split_norm
    )
    dual_anchor = params.mu * _stack_norm(_transformed(state.u1, state.u2, state.u3, state.u4, pre))
    eps_dual = np.sqrt(n_elements) * params.eps_abs + params.eps_rel * dual_anchor

    converged = bool(primal <= eps_primal and dual <= eps_dual)
    return converged, primal, dual


def _initial_state(pre: Precomputation, basis: SubspaceBasis, hsi: SpectralCube,
                   pattern: SubsamplingPattern, initial_x: np.ndarray | None) -> SolverState:
    rank = basis.rank
    n = pre.n_pixels
    if initial_x is None:
        denoised = project_denoise(hsi, basis)
        upsampled = zoh_upsample(denoised, pattern, pre.width, pre.height)
        x0 = basis.matrix.T @ upsampled.data
    else:
        x0 = np.array(initial_x, dtype=np.float64).reshape(rank, n)

    x_fft = np.fft.fft2(x0.reshape(rank, pre.height, pre.width), axes=(-2, -1))
    xb = _ifft(x_fft * pre.spectrum_b, n)
    xdh = _ifft(x_fft * pre.spectrum_dh, n)
    xdv = _ifft(x_fft * pre.spectrum_dv, n)
    return SolverState(
        x=x0, v1=xb.copy(), v2=x0.copy(), v3=xdh.copy(), v4=xdv.copy(),
        u1=np.zeros((rank, n)), u2=np.zeros((rank, n)),
        u3=np.zeros((rank, n)), u4=np.zeros((rank, n)),
        xb=xb, xdh=xdh, xdv=xdv,
    )


def fuse(
    hsi: SpectralCube,
    msi: SpectralCube,
    basis: SubspaceBasis,
    kernel: ConvolutionKernel,
    pattern: SubsamplingPattern,
    response: SpectralResponse,
    params: FusionParams,
    initial_x: np.ndarray | None = None,
) -> tuple[SpectralCube, SpectralCube, FusionDiagnostics]:
    """Run the full solve; returns the fused cube, the coefficient cube on
    the MSI grid, and per-iteration diagnostics."""
    pre = precompute(hsi, msi, basis, kernel, pattern, response, params)
    state = _initial_state(pre, basis, hsi, pattern, initial_x)
    # Seed the dual-residual reference with the transforms of the initial splits.
    state.prev_vt = _transformed(state.v1, state.v2, state.v3, state.v4, pre)

    objectives = []
    converged = False
    for iteration in range(1, params.max_iters + 1):
        state.x, state.xb, state.xdh, state.xdv = _x_update_full(state, pre)
        if not np.all(np.isfinite(state.x)):
            raise DivergenceError(iteration)
        state.v1 = v1_update(state, pre, params)
        state.v2 = v2_update(state, pre, params)
        state.v3, state.v4 = v34_update(state, params)
        state.u1, state.u2, state.u3, state.u4 = dual_update(state)
        state.iteration = iteration

        converged, primal, dual = check_convergence(state, pre, params)
        state.primal_res.append(primal)
        state.dual_res.append(dual)
        objectives.append(
            sum(_objective_terms_from(state.x, state.xb, state.xdh, state.xdv, pre, params))
        )
        if converged:
            break

    fused = SpectralCube(basis.bands, pre.width, pre.height, basis.matrix @ state.x)
    coeffs = SpectralCube(basis.rank, pre.width, pre.height, state.x)
    diagnostics = FusionDiagnostics(
        objective=np.array(objectives),
        primal_res=np.array(state.primal_res),
        dual_res=np.array(state.dual_res),
        iterations=state.iteration,
        converged=converged,
    )
    return fused, coeffs, diagnostics
