"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric/solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileio
from .benchmark import VariantDisagreement, format_table, run_benchmark
from .evaluation import field_difference_stats, landmark_error
from .geometry import Grid3, GridError, Image3, precision_dtype
from .lbfgs import LbfgsConfig
from .multilevel import MultilevelConfig, RegistrationReport, register
from .ngf import NgfParams
from .transfer import PT_VARIANTS, apply_P, build_gather_plan
from .warp import warp_image

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="ngfreg", description="Matrix-free variational deformable 3D registration")
    sub = p.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="register a template volume to a reference volume")
    reg.add_argument("--reference", required=True)
    reg.add_argument("--template", required=True)
    reg.add_argument("--out-deformation", required=True)
    reg.add_argument("--out-warped")
    reg.add_argument("--alpha", type=float, default=1.0)
    reg.add_argument("--tau", type=float, default=10.0)
    reg.add_argument("--rho", type=float, default=10.0)
    reg.add_argument("--levels", default="auto", help="number of levels or 'auto'")
    reg.add_argument("--grid-ratio", type=int, default=4)
    reg.add_argument("--precision", choices=("f32", "f64"), default="f64")
    reg.add_argument("--threads", type=int, default=1)
    reg.add_argument("--pt-variant", choices=PT_VARIANTS, default="gather")
    reg.add_argument("--max-iter", type=int, default=100)
    reg.add_argument("--report", help="write a structured text report of traces/timings")

    warp = sub.add_parser("warp", help="apply a stored deformation to a volume")
    warp.add_argument("--template", required=True)
    warp.add_argument("--deformation", required=True)
    warp.add_argument("--out", required=True)
    warp.add_argument("--reference", help="reference volume for an optional difference image")
    warp.add_argument("--out-difference", help="write warped-minus-reference volume")

    ev = sub.add_parser("evaluate", help="landmark error of a stored deformation")
    ev.add_argument("--deformation", required=True)
    ev.add_argument("--landmarks-ref", required=True)
    ev.add_argument("--landmarks-template", required=True)
    ev.add_argument("--image-grid-from", required=True, help="volume donating the image grid")
    ev.add_argument("--frame", choices=("index1", "index0", "world"), required=True)
    ev.add_argument("--out-per-landmark", help="write per-landmark errors to a file")
    ev.add_argument("--compare-deformation",
                    help="second deformation: report field difference statistics")

    bm = sub.add_parser("benchmark", help="time grid-transfer variants and the pipeline")
    bm.add_argument("--dims", default="64,64,64")
    bm.add_argument("--threads", default="1,8", help="comma-separated worker counts")
    bm.add_argument("--precision", default="f64", help="comma-separated: f32,f64")
    bm.add_argument("--pt-variant", default="gather,scatter,redblack")
    bm.add_argument("--reps", type=int, default=3)
    bm.add_argument("--out", help="write the table to a file instead of stdout")

    rs = sub.add_parser("resample", help="resample a volume onto another volume's grid")
    rs.add_argument("--input", required=True)
    rs.add_argument("--like", required=True)
    rs.add_argument("--out", required=True)
    return p


def _write_report(path: str, report: RegistrationReport) -> None:
    lines = [
        f"seconds_total = {report.seconds_total:.6f}",
        f"seconds_pyramid = {report.seconds_pyramid:.6f}",
        f"final_grad_inf = {report.final_grad_inf:.6e}",
        f"levels = {len(report.levels)}",
    ]
    for lv in report.levels:
        lines += [
            "",
            f"[level {lv.level_index}]",
            f"image_dims = {lv.image_dims[0]} {lv.image_dims[1]} {lv.image_dims[2]}",
            f"def_dims = {lv.def_dims[0]} {lv.def_dims[1]} {lv.def_dims[2]}",
            f"iterations = {lv.iterations}",
            f"stop_reason = {lv.stop_reason}",
            f"line_search_failed = {lv.line_search_failed}",
            f"seconds_setup = {lv.seconds_setup:.6f}",
            f"seconds_optimize = {lv.seconds_optimize:.6f}",
            "iter\tJ\tD\tS\tgrad_inf\tstep",
        ]
        for rec, (J, D, S) in zip(lv.records, lv.J_trace):
            lines.append(
                f"{rec.iteration}\t{J:.10e}\t{D:.10e}\t{S:.10e}\t"
                f"{rec.grad_inf:.6e}\t{rec.step:.3e}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_register(args) -> int:
    dtype = precision_dtype(args.precision)
    R = fileio.read_volume(args.reference, promote_dtype=dtype)
    T = fileio.read_volume(args.template, promote_dtype=dtype)
    levels = None if args.levels == "auto" else int(args.levels)
    cfg = MultilevelConfig(
        num_levels=levels,
        grid_ratio=args.grid_ratio,
        alpha=args.alpha,
        ngf=NgfParams(tau=args.tau, rho=args.rho),
        lbfgs=LbfgsConfig(max_iterations=args.max_iter),
        precision=args.precision,
        workers=args.threads,
        pt_variant=args.pt_variant,
    )
    y, report = register(R, T, cfg)
    fileio.write_deformation(y, args.out_deformation)
    if args.out_warped:
        plan_grid = R.grid
        yhat = apply_P(y, plan_grid, cfg.workers)
        warped = warp_image(T.astype(dtype), yhat, cfg.workers).warped
        fileio.write_volume(warped, args.out_warped)
    if args.report:
        _write_report(args.report, report)
    print(f"registered {args.template} -> {args.reference}: "
          f"{len(report.levels)} levels, {report.seconds_total:.2f} s, "
          f"final |grad|_inf = {report.final_grad_inf:.3e}")
    return EXIT_OK


def _cmd_warp(args) -> int:
    T = fileio.read_volume(args.template)
    y = fileio.read_deformation(args.deformation)
    if args.out_difference and not args.reference:
        raise _UsageExit("--out-difference requires --reference")
    # the deformation may live on a coarser grid; P is the identity when grids match
    yhat = apply_P(y, T.grid)
    warped = warp_image(T, yhat).warped
    fileio.write_volume(warped, args.out)
    if args.out_difference:
        ref = fileio.read_volume(args.reference)
        if ref.grid != warped.grid:
            raise GridError("reference grid does not match the warped output grid")
        fileio.write_volume(Image3(warped.grid, warped.values - ref.values),
                            args.out_difference)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    y = fileio.read_deformation(args.deformation)
    donor = fileio.read_volume(args.image_grid_from)
    lm_ref = fileio.read_landmarks(args.landmarks_ref, args.frame, donor.grid)
    lm_tmpl = fileio.read_landmarks(args.landmarks_template, args.frame, donor.grid)
    res = landmark_error(y, lm_ref, lm_tmpl, donor.grid)
    print(f"landmark error: {res.mean_mm:.4f} +/- {res.stddev_mm:.4f} mm "
          f"over {lm_ref.count} landmarks")
    if int(res.outside_domain.sum()):
        print(f"warning: {int(res.outside_domain.sum())} reference landmarks "
              "outside the image domain (evaluated with clamping)")
    per_lines = [f"{v:.6f}" for v in res.per_landmark_mm]
    if args.out_per_landmark:
        with open(args.out_per_landmark, "w") as fh:
            fh.write("\n".join(per_lines) + "\n")
    else:
        for line in per_lines:
            print(line)
    if args.compare_deformation:
        other = fileio.read_deformation(args.compare_deformation)
        dmax, dmean, _ = field_difference_stats(y, other)
        print(f"field difference vs {args.compare_deformation}: "
              f"max {dmax:.6e} mm, mean {dmean:.6e} mm")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    dims = tuple(int(v) for v in args.dims.replace("x", ",").split(","))
    if len(dims) != 3:
        raise _UsageExit("--dims must have three comma-separated entries")
    records = run_benchmark(
        dims=dims,
        workers_list=[int(v) for v in args.threads.split(",")],
        precisions=[v.strip() for v in args.precision.split(",")],
        variants=[v.strip() for v in args.pt_variant.split(",")],
        reps=args.reps,
    )
    table = format_table(records)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table + "\n")
    else:
        print(table)
    return EXIT_OK


def _cmd_resample(args) -> int:
    src = fileio.read_volume(args.input)
    like = fileio.read_volume(args.like)
    from .geometry import VectorField3, identity_field_array

    positions = VectorField3(like.grid, identity_field_array(like.grid, src.values.dtype))
    # clamp-to-edge resampling: clip target positions into the source hull
    for a in range(3):
        lo = src.grid.origin[a]
        hi = src.grid.origin[a] + (src.grid.dims[a] - 1) * src.grid.spacing[a]
        np.clip(positions.field[a], lo, hi, out=positions.field[a])
    out = warp_image(src, positions).warped
    fileio.write_volume(out, args.out)
    return EXIT_OK


_COMMANDS = {
    "register": _cmd_register,
    "warp": _cmd_warp,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "resample": _cmd_resample,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageExit as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (fileio.MetaImageError, fileio.LandmarkFileError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except GridError as e:
        hint = ""
        if args.command == "register":
            hint = " (hint: run 'ngfreg resample' to put both volumes on one grid)"
        print(f"error: {e}{hint}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VariantDisagreement, FloatingPointError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
