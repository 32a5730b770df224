"""Command-line front end: simulate, calibrate, fuse, evaluate.

Each command prints a single provenance/report JSON object to stdout (all
defaults resolved, so a run is reproducible from that JSON alone) and logs
to stderr.  Exit codes: 0 success, 2 usage error, 3 data or geometry
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from ._accel import NUMBA_ENABLED
from .calibration import calibrate
from .cube import (
    SpectralCube,
    SubsamplingPattern,
    cube_read,
    cube_write,
    kernel_read,
    kernel_write,
    response_read,
    response_write,
)
from .errors import CubeFormatError, GeometryError, NumericalError
from .metrics import ergas, per_band_rmse, qnr, sam_stats, uiqi
from .solver import FusionParams, fuse
from .subspace import DEFAULT_ENERGY_FRACTION, choose_rank, estimate_subspace, project_denoise
from .synthesis import simulate_pair, starck_murtagh_kernel

log = logging.getLogger("hsfuse")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


def _resolve(*candidates):
    """First candidate that is not None."""
    for value in candidates:
        if value is not None:
            return value
    return None


def _apply_threads(threads):
    if threads is None:
        return
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    if NUMBA_ENABLED:
        import numba

        numba.set_num_threads(threads)
    else:
        log.info("numba disabled; --threads has no effect")


def _emit(report: dict):
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _parse_exclude(raw: str | None) -> list[int]:
    if not raw:
        return []
    try:
        bands = sorted({int(tok) for tok in raw.split(",") if tok.strip() != ""})
    except ValueError as exc:
        raise UsageError(f"--exclude-bands expects a comma list of integers, got {raw!r}") from exc
    if bands and bands[0] < 0:
        raise UsageError("--exclude-bands indices must be nonnegative")
    return bands


def _drop_bands(cube: SpectralCube, excluded: list[int]) -> SpectralCube:
    if not excluded:
        return cube
    if excluded[-1] >= cube.bands:
        raise UsageError(f"--exclude-bands index {excluded[-1]} out of range for {cube.bands} bands")
    keep = [b for b in range(cube.bands) if b not in excluded]
    if not keep:
        raise UsageError("--exclude-bands removes every band")
    return SpectralCube(len(keep), cube.width, cube.height, cube.data[keep])


def _pattern(args) -> SubsamplingPattern:
    return SubsamplingPattern(args.factor, args.offset_x, args.offset_y)


def _write_csv(path: str, header: list[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CubeFormatError(f"unreadable simulate config {args.config}: {exc}") from exc

    factor = int(_resolve(args.factor, config.get("factor"), 4))
    offset_x = int(_resolve(args.offset_x, config.get("offset_x"), 0))
    offset_y = int(_resolve(args.offset_y, config.get("offset_y"), 0))
    snr_h = float(_resolve(args.snr_h, config.get("snr_h_db"), 30.0))
    snr_m = float(_resolve(args.snr_m, config.get("snr_m_db"), 40.0))
    seed = int(_resolve(args.seed, config.get("seed"), 0))

    truth = cube_read(args.truth)
    kernel = kernel_read(args.kernel) if args.kernel else starck_murtagh_kernel()
    response = response_read(args.response)
    pattern = SubsamplingPattern(factor, offset_x, offset_y)

    hsi, msi = simulate_pair(truth, kernel, pattern, response, snr_h, snr_m, seed)
    hsi_path = args.out_prefix + "_hsi"
    msi_path = args.out_prefix + "_msi"
    cube_write(hsi, hsi_path)
    cube_write(msi, msi_path)

    _emit(
        {
            "command": "simulate",
            "truth": args.truth,
            "kernel": args.kernel or "builtin:starck-murtagh",
            "response": args.response,
            "factor": factor,
            "offset_x": offset_x,
            "offset_y": offset_y,
            "snr_h_db": snr_h,
            "snr_m_db": snr_m,
            "seed": seed,
            "outputs": {"hsi": hsi_path + ".json", "msi": msi_path + ".json"},
        }
    )
    return EXIT_OK


def cmd_fuse(args) -> int:
    if not args.calibrate and args.response is None:
        raise UsageError("fuse requires --response unless --calibrate is given")

    hsi = cube_read(args.hsi)
    msi = cube_read(args.msi)
    pattern = _pattern(args)
    excluded = _parse_exclude(args.exclude_bands)

    if not args.calibrate:
        response = response_read(args.response)
        if response.in_bands != hsi.bands:
            raise GeometryError(
                f"response file has {response.in_bands} columns, HSI has {hsi.bands} bands "
                "(supply a response matching the unexcluded cube)"
            )

    hsi = _drop_bands(hsi, excluded)
    if args.calibrate:
        kernel, response, _ = calibrate(
            hsi, msi, pattern, args.kernel_support, args.ridge_r, args.smooth_b, args.max_alt_iters
        )
    else:
        kernel = kernel_read(args.kernel) if args.kernel else starck_murtagh_kernel()
        if excluded:
            keep = [b for b in range(response.in_bands) if b not in excluded]
            response = type(response)(response.matrix[:, keep])

    lambda_phi = args.lambda_phi
    if lambda_phi is None:
        lambda_phi = 1e-2 if msi.bands == 1 else 5e-4

    rank = args.s
    if rank == 0:
        _, singular_values = estimate_subspace(hsi, 1)
        rank = choose_rank(singular_values, DEFAULT_ENERGY_FRACTION)
        log.info("auto-selected subspace dimension %d", rank)
    basis, _ = estimate_subspace(hsi, rank)
    hsi_denoised = project_denoise(hsi, basis)
    params = FusionParams(
        lambda_m=args.lambda_m,
        lambda_phi=lambda_phi,
        mu=args.mu,
        max_iters=args.max_iters,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        rank=rank,
    )
    fused, _, diagnostics = fuse(hsi_denoised, msi, basis, kernel, pattern, response, params)

    fused_path = args.out_prefix + "_fused"
    cube_write(fused, fused_path)
    diag_path = args.out_prefix + "_diagnostics.csv"
    _write_csv(
        diag_path,
        ["iteration", "objective", "primal_res", "dual_res"],
        (
            (i + 1, f"{o:.17g}", f"{p:.17g}", f"{d:.17g}")
            for i, (o, p, d) in enumerate(
                zip(diagnostics.objective, diagnostics.primal_res, diagnostics.dual_res)
            )
        ),
    )

    _emit(
        {
            "command": "fuse",
            "hsi": args.hsi,
            "msi": args.msi,
            "kernel": (
                "calibrated" if args.calibrate else (args.kernel or "builtin:starck-murtagh")
            ),
            "response": "calibrated" if args.calibrate else args.response,
            "calibrate": bool(args.calibrate),
            "factor": args.factor,
            "offset_x": args.offset_x,
            "offset_y": args.offset_y,
            "s": rank,
            "lambda_m": args.lambda_m,
            "lambda_phi": lambda_phi,
            "mu": args.mu,
            "max_iters": args.max_iters,
            "eps_abs": args.eps_abs,
            "eps_rel": args.eps_rel,
            "exclude_bands": excluded,
            "outputs": {"fused": fused_path + ".json", "diagnostics": diag_path},
            "result": {
                "iterations": diagnostics.iterations,
                "converged": diagnostics.converged,
                "final_objective": float(diagnostics.objective[-1]),
                "final_primal_res": float(diagnostics.primal_res[-1]),
                "final_dual_res": float(diagnostics.dual_res[-1]),
            },
        }
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    hsi = _drop_bands(cube_read(args.hsi), _parse_exclude(args.exclude_bands))
    msi = cube_read(args.msi)
    pattern = _pattern(args)
    kernel, response, history = calibrate(
        hsi, msi, pattern, args.kernel_support, args.ridge_r, args.smooth_b, args.max_alt_iters
    )

    kernel_path = args.out_prefix + "_kernel.csv"
    response_path = args.out_prefix + "_response.csv"
    residual_path = args.out_prefix + "_residuals.csv"
    kernel_write(kernel, kernel_path)
    response_write(response, response_path)
    _write_csv(
        residual_path,
        ["step", "objective"],
        ((i, f"{value:.17g}") for i, value in enumerate(history)),
    )

    _emit(
        {
            "command": "calibrate",
            "hsi": args.hsi,
            "msi": args.msi,
            "factor": args.factor,
            "offset_x": args.offset_x,
            "offset_y": args.offset_y,
            "kernel_support": args.kernel_support,
            "ridge_r": args.ridge_r,
            "smooth_b": args.smooth_b,
            "max_alt_iters": args.max_alt_iters,
            "outputs": {
                "kernel": kernel_path,
                "response": response_path,
                "residuals": residual_path,
            },
            "result": {"steps": len(history), "final_objective": float(history[-1])},
        }
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = cube_read(args.est)
    if args.reference:
        ref = cube_read(args.reference)
        ratio = 1.0 / args.factor
        sam_deg, skipped = sam_stats(est, ref)
        rmse = per_band_rmse(est, ref)
        prefix = args.out_prefix or (args.est[:-5] if args.est.endswith(".json") else args.est)
        rmse_path = prefix + "_rmse.csv"
        _write_csv(
            rmse_path,
            ["band", "relative_rmse"],
            ((b, f"{value:.17g}") for b, value in enumerate(rmse)),
        )
        _emit(
            {
                "command": "evaluate",
                "est": args.est,
                "reference": args.reference,
                "window": args.window,
                "resolution_ratio": ratio,
                "ergas": ergas(est, ref, ratio),
                "sam_deg": sam_deg,
                "sam_skipped_pixels": skipped,
                "uiqi": uiqi(est, ref, args.window),
                "per_band_rmse_csv_path": rmse_path,
            }
        )
        return EXIT_OK

    if args.hsi is None or args.msi is None:
        raise UsageError("evaluate needs either --reference or both --hsi and --msi (for QNR)")
    hsi = cube_read(args.hsi)
    msi = cube_read(args.msi)
    kernel = kernel_read(args.kernel) if args.kernel else starck_murtagh_kernel()
    d_lambda, d_s, value = qnr(est, msi, hsi, kernel, _pattern(args), args.window)
    _emit(
        {
            "command": "evaluate",
            "est": args.est,
            "hsi": args.hsi,
            "msi": args.msi,
            "kernel": args.kernel or "builtin:starck-murtagh",
            "factor": args.factor,
            "window": args.window,
            "d_lambda": d_lambda,
            "d_s": d_s,
            "qnr": value,
        }
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsfuse",
        description="Fuse a low-resolution hyperspectral cube with a high-resolution "
        "multispectral or panchromatic image.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads for data-parallel kernels")
    common.add_argument("--out-prefix", default=None, help="prefix for output artifacts")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--factor", type=int, default=4, help="subsampling factor (default 4)")
    grid.add_argument("--offset-x", type=int, default=0)
    grid.add_argument("--offset-y", type=int, default=0)

    cal = argparse.ArgumentParser(add_help=False)
    cal.add_argument("--kernel-support", type=int, default=5, help="odd blur-kernel side length")
    cal.add_argument("--ridge-r", type=float, default=None, help="response ridge weight")
    cal.add_argument("--smooth-b", type=float, default=1e-3, help="kernel smoothness weight")
    cal.add_argument("--max-alt-iters", type=int, default=50)
    cal.add_argument("--exclude-bands", default=None, help="comma list of HSI bands to drop")

    p_sim = sub.add_parser("simulate", parents=[common], help="synthesize an observed HSI/MSI pair")
    p_sim.add_argument("--truth", required=True, help="ground-truth cube (json header)")
    p_sim.add_argument("--kernel", default=None, help="kernel CSV (default: built-in blur)")
    p_sim.add_argument("--response", required=True, help="spectral response CSV")
    p_sim.add_argument("--config", default=None, help="JSON config; flags override its fields")
    p_sim.add_argument("--factor", type=int, default=None)
    p_sim.add_argument("--offset-x", type=int, default=None)
    p_sim.add_argument("--offset-y", type=int, default=None)
    p_sim.add_argument("--snr-h", type=float, default=None, help="HSI noise SNR in dB (default 30)")
    p_sim.add_argument("--snr-m", type=float, default=None, help="MSI noise SNR in dB (default 40)")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate, needs_prefix=True)

    p_cal = sub.add_parser("calibrate", parents=[common, grid, cal], help="estimate kernel and response")
    p_cal.add_argument("--hsi", required=True)
    p_cal.add_argument("--msi", required=True)
    p_cal.set_defaults(func=cmd_calibrate, needs_prefix=True)

    p_fuse = sub.add_parser("fuse", parents=[common, grid, cal], help="run the fusion solver")
    p_fuse.add_argument("--hsi", required=True)
    p_fuse.add_argument("--msi", required=True)
    p_fuse.add_argument("--kernel", default=None, help="kernel CSV")
    p_fuse.add_argument("--response", default=None, help="spectral response CSV")
    p_fuse.add_argument("--calibrate", action="store_true", help="estimate kernel/response from the data")
    p_fuse.add_argument(
        "--s", type=int, default=10,
        help="subspace dimension (default 10; 0 selects it by the 0.9995 energy rule)",
    )
    p_fuse.add_argument("--lambda-m", type=float, default=1.0)
    p_fuse.add_argument(
        "--lambda-phi",
        type=float,
        default=None,
        help="regularizer weight (default 1e-2 for single-band MSI, else 5e-4)",
    )
    p_fuse.add_argument("--mu", type=float, default=0.01)
    p_fuse.add_argument("--max-iters", type=int, default=200)
    p_fuse.add_argument("--eps-abs", type=float, default=1e-4)
    p_fuse.add_argument("--eps-rel", type=float, default=1e-4)
    p_fuse.set_defaults(func=cmd_fuse, needs_prefix=True)

    p_eval = sub.add_parser("evaluate", parents=[common, grid], help="quality report for a fused cube")
    p_eval.add_argument("--est", required=True, help="cube under evaluation")
    p_eval.add_argument("--reference", default=None, help="ground-truth cube")
    p_eval.add_argument("--hsi", default=None, help="observed HSI (QNR mode)")
    p_eval.add_argument("--msi", default=None, help="observed MSI (QNR mode)")
    p_eval.add_argument("--kernel", default=None, help="kernel CSV (QNR mode)")
    p_eval.add_argument("--window", type=int, default=32, help="quality-index window (default 32)")
    p_eval.set_defaults(func=cmd_evaluate, needs_prefix=False)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        if args.needs_prefix and not args.out_prefix:
            raise UsageError(f"{args.command} requires --out-prefix")
        _apply_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (CubeFormatError, GeometryError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
