"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The numba path is selected when available (see `_accel`); setting
``HSFUSE_NO_NUMBA=1`` forces the numpy twins.  Both paths implement the
same arithmetic; ``tests/test_kernels.py`` pins their agreement and
``benchmarks/bench_kernels.py`` compares their speed.

Kernels only do per-element or per-pixel work; reductions to scalars are
left to numpy so results do not depend on the parallel schedule.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, njit, prange

__all__ = ["cyclic_conv2d", "pixel_norms", "vtv_shrink", "window_sums", "warmup"]


# ---------------------------------------------------------------------------
# Cyclic 2-D convolution (spatial-domain blur)
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _cyclic_conv2d_numba(stack, taps):
    n_bands, height, width = stack.shape
    k = taps.shape[0]
    c = (k - 1) // 2
    out = np.empty_like(stack)
    for b in prange(n_bands):
        for y in range(height):
            for x in range(width):
                acc = 0.0
                for i in range(k):
                    yy = (y - (i - c)) % height
                    for j in range(k):
                        xx = (x - (j - c)) % width
                        acc += taps[i, j] * stack[b, yy, xx]
                out[b, y, x] = acc
    return out


def _cyclic_conv2d_numpy(stack, taps):
    k = taps.shape[0]
    c = (k - 1) // 2
    out = np.zeros_like(stack)
    for i in range(k):
        for j in range(k):
            if taps[i, j] != 0.0:
                out += taps[i, j] * np.roll(stack, (i - c, j - c), axis=(-2, -1))
    return out


def cyclic_conv2d(stack: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Convolve each (height, width) plane of ``stack`` cyclically with ``taps``.

    Output pixel p gets sum over taps t of taps[t] * plane[p - (t - center)],
    indices wrapping at the edges.
    """
    stack = np.ascontiguousarray(stack, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if NUMBA_ENABLED:
        return _cyclic_conv2d_numba(stack, taps)
    return _cyclic_conv2d_numpy(stack, taps)


# ---------------------------------------------------------------------------
# Per-pixel vector norms and soft shrinkage (VTV proximity operator)
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _pixel_norms_numba(gh, gv):
    n_bands, n_pixels = gh.shape
    out = np.empty(n_pixels)
    for j in prange(n_pixels):
        acc = 0.0
        for i in range(n_bands):
            acc += gh[i, j] * gh[i, j] + gv[i, j] * gv[i, j]
        out[j] = np.sqrt(acc)
    return out


def _pixel_norms_numpy(gh, gv):
    return np.sqrt(np.einsum("ij,ij->j", gh, gh) + np.einsum("ij,ij->j", gv, gv))


def pixel_norms(gh: np.ndarray, gv: np.ndarray) -> np.ndarray:
    """Euclidean norm of the stacked (gh, gv) column at each pixel."""
    gh = np.ascontiguousarray(gh, dtype=np.float64)
    gv = np.ascontiguousarray(gv, dtype=np.float64)
    if NUMBA_ENABLED:
        return _pixel_norms_numba(gh, gv)
    return _pixel_norms_numpy(gh, gv)


@njit(cache=True, parallel=True)
def _vtv_shrink_numba(gh, gv, tau):
    n_bands, n_pixels = gh.shape
    oh = np.empty_like(gh)
    ov = np.empty_like(gv)
    for j in prange(n_pixels):
        acc = 0.0
        for i in range(n_bands):
            acc += gh[i, j] * gh[i, j] + gv[i, j] * gv[i, j]
        norm = np.sqrt(acc)
        if norm > tau:
            scale = 1.0 - tau / norm
        else:
            scale = 0.0
        for i in range(n_bands):
            oh[i, j] = scale * gh[i, j]
            ov[i, j] = scale * gv[i, j]
    return oh, ov


def _vtv_shrink_numpy(gh, gv, tau):
    norms = _pixel_norms_numpy(gh, gv)
    scale = np.zeros_like(norms)
    big = norms > tau
    scale[big] = 1.0 - tau / norms[big]
    return gh * scale, gv * scale


def vtv_shrink(gh: np.ndarray, gv: np.ndarray, tau: float):
    """Pixel-wise vector soft threshold: scale each stacked column by
    max(0, 1 - tau/norm); zero-norm columns map to zero."""
    gh = np.ascontiguousarray(gh, dtype=np.float64)
    gv = np.ascontiguousarray(gv, dtype=np.float64)
    if NUMBA_ENABLED:
        return _vtv_shrink_numba(gh, gv, float(tau))
    return _vtv_shrink_numpy(gh, gv, float(tau))


# ---------------------------------------------------------------------------
# Sliding-window box sums (UIQI statistics)
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _window_sums_numba(planes, win):
    n_planes, height, width = planes.shape
    out_h = height - win + 1
    out_w = width - win + 1
    out = np.empty((n_planes, out_h, out_w))
    for p in prange(n_planes):
        # Running column sums over a `win`-tall strip, then a horizontal
        # running sum across the strip.
        col = np.empty(width)
        for x in range(width):
            acc = 0.0
            for y in range(win):
                acc += planes[p, y, x]
            col[x] = acc
        for y in range(out_h):
            if y > 0:
                for x in range(width):
                    col[x] += planes[p, y + win - 1, x] - planes[p, y - 1, x]
            acc = 0.0
            for x in range(win):
                acc += col[x]
            out[p, y, 0] = acc
            for x in range(1, out_w):
                acc += col[x + win - 1] - col[x - 1]
                out[p, y, x] = acc
    return out


def _window_sums_numpy(planes, win):
    n_planes, height, width = planes.shape
    integral = np.zeros((n_planes, height + 1, width + 1))
    integral[:, 1:, 1:] = planes.cumsum(axis=1).cumsum(axis=2)
    return (
        integral[:, win:, win:]
        - integral[:, :-win, win:]
        - integral[:, win:, :-win]
        + integral[:, :-win, :-win]
    )


def window_sums(planes: np.ndarray, win: int) -> np.ndarray:
    """Sum of every win-by-win window (stride 1, fully inside) of each plane.

    Input shape (n_planes, height, width); output
    (n_planes, height - win + 1, width - win + 1).
    """
    planes = np.ascontiguousarray(planes, dtype=np.float64)
    if win > planes.shape[1] or win > planes.shape[2]:
        raise ValueError(f"window {win} larger than plane {planes.shape[1:]}")
    if NUMBA_ENABLED:
        return _window_sums_numba(planes, win)
    return _window_sums_numpy(planes, win)


def warmup():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    stack = np.ones((1, 4, 4))
    cyclic_conv2d(stack, np.ones((3, 3)) / 9.0)
    gh = np.ones((2, 4))
    pixel_norms(gh, gh)
    vtv_shrink(gh, gh, 0.5)
    window_sums(stack, 2)
