"""Command-line interface.

Subcommands: ``stereo``, ``flow``, ``iseg``, ``vseg`` run a task and write
the result file; ``verify`` runs the random-instance property suites;
``bench`` reports accuracy on the built-in synthetic scenes.  Exit codes:
0 success, 1 solver/format failure, 2 usage error.
"""

import argparse
import json
import sys

import numpy as np

from . import fileio, synthetic, verify
from .dataterms import Scribbles, rasterize_polylines
from .driver import SolverConfig, run_flow, run_iseg, run_stereo, run_vseg
from .errors import SubminError
from .pyramid import DEFAULT_CHANNELS, DEFAULT_STRIDES, PyramidConfig

DEFAULT_K = (2, 4, 8, 16)


def _add_common(p):
    p.add_argument("--levels", type=int, default=4,
                   help="pyramid level count (uses the finest N of the stride schedule)")
    p.add_argument("--k-schedule", type=str, default=None,
                   help="comma-separated K per level, coarse to fine")
    p.add_argument("--iters", type=int, default=3, help="inner iterations per level")
    p.add_argument("--damping", type=float, default=None,
                   help="Levenberg damping (default: auto)")
    p.add_argument("--basis", type=str, default="analytic",
                   help="'analytic' or 'generated:<weights.lsmw>'")
    p.add_argument("--out", type=str, required=True, help="output file path")
    p.add_argument("--json-report", type=str, default=None,
                   help="write a machine-readable iteration report here")


def _config_from_args(args):
    n = args.levels
    if not 2 <= n <= len(DEFAULT_STRIDES):
        raise ValueError(f"--levels must be between 2 and {len(DEFAULT_STRIDES)}")
    strides = DEFAULT_STRIDES[-n:]
    channels = DEFAULT_CHANNELS[-n:]
    if args.k_schedule is not None:
        ks = tuple(int(v) for v in args.k_schedule.split(","))
    else:
        ks = DEFAULT_K[-n:]
    if len(ks) != n:
        raise ValueError(f"k-schedule has {len(ks)} entries for {n} levels")
    return SolverConfig(
        k_schedule=ks,
        iterations_per_level=args.iters,
        damping=args.damping,
        basis_source=args.basis,
        pyramid=PyramidConfig(strides=strides, channels_per_level=channels),
    )


def _report_dict(result):
    levels = {}
    for rec in result.iterations:
        entry = levels.setdefault(rec.level, {"level": rec.level, "k": rec.k, "iterations": []})
        entry["iterations"].append({
            "energy_before": rec.energy_before,
            "energy_after": rec.energy_after,
            "step_norm": rec.step_norm,
            "damping": rec.damping,
        })
    return {
        "task": result.task,
        "levels": [levels[i] for i in sorted(levels)],
        "wall_ms": result.wall_ms,
    }


def _write_report(result, path):
    if path is not None:
        with open(path, "w") as f:
            json.dump(_report_dict(result), f, indent=2)
            f.write("\n")


def load_scribbles(path):
    """Read a scribble JSON file of foreground/background polylines."""
    with open(path) as f:
        doc = json.load(f)
    fg = rasterize_polylines(doc.get("foreground", []))
    bg = rasterize_polylines(doc.get("background", []))
    if fg.size == 0 or bg.size == 0:
        raise ValueError("scribbles file needs at least one foreground and one background polyline")
    return Scribbles(foreground=fg, background=bg)


def _cmd_stereo(args):
    cfg = _config_from_args(args)
    left = fileio.read_png(args.target)
    right = fileio.read_png(args.source)
    result = run_stereo(source=right, target=left, cfg=cfg)
    fileio.write_pfm(args.out, result.solution)
    _write_report(result, args.json_report)
    return 0


def _cmd_flow(args):
    cfg = _config_from_args(args)
    target = fileio.read_png(args.target)
    source = fileio.read_png(args.source)
    result = run_flow(source=source, target=target, cfg=cfg)
    fileio.write_flo(args.out, result.solution)
    _write_report(result, args.json_report)
    return 0


def _cmd_iseg(args):
    cfg = _config_from_args(args)
    image = fileio.read_png(args.image)
    scribbles = load_scribbles(args.scribbles)
    result = run_iseg(image, scribbles, cfg=cfg)
    fileio.write_png_mask(args.out, result.mask)
    _write_report(result, args.json_report)
    return 0


def _cmd_vseg(args):
    cfg = _config_from_args(args)
    prev_frame = fileio.read_png(args.prev)
    cur_frame = fileio.read_png(args.cur)
    prev_mask = fileio.read_png_mask(args.prev_mask)
    result = run_vseg(prev_frame, cur_frame, prev_mask.astype(float), cfg=cfg)
    fileio.write_png_mask(args.out, result.mask)
    _write_report(result, args.json_report)
    return 0


def _cmd_verify(args):
    results = verify.run_all()
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
        if not r.passed:
            failed += 1
    print(f"{len(results) - failed}/{len(results)} suites passed")
    return 1 if failed else 0


def _cmd_bench(args):
    report = {}

    src, tgt = synthetic.translated_pair(192, 144, (3.0, 0.0), seed=7)
    res = run_stereo(source=src, target=tgt)
    interior = np.s_[16:-16, 16:-16]
    report["stereo_mae_px"] = float(np.abs(res.solution[interior][:, :, 0] - 3.0).mean())

    src, tgt = synthetic.translated_pair(192, 144, (2.0, -1.5), seed=8)
    res = run_flow(source=src, target=tgt)
    report["flow_epe_px"] = synthetic.endpoint_error(res.solution[interior], (2.0, -1.5))

    image, gt, scribbles = synthetic.two_color_fixture(128)
    res = run_iseg(image, scribbles)
    report["iseg_iou"] = synthetic.iou(res.mask, gt)

    prev_f, cur_f, mask = synthetic.static_sequence_fixture(128)
    res = run_vseg(prev_f, cur_f, mask.astype(float))
    report["vseg_iou"] = synthetic.iou(res.mask, mask)

    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="submin",
        description="Subspace-constrained minimization for low-level vision tasks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stereo", help="disparity between two rectified images")
    p.add_argument("target", help="image the disparity map is defined on")
    p.add_argument("source", help="image sampled at p + disparity")
    _add_common(p)
    p.set_defaults(fn=_cmd_stereo)

    p = sub.add_parser("flow", help="optical flow between two frames")
    p.add_argument("target", help="frame the flow field is defined on")
    p.add_argument("source", help="frame sampled at p + flow")
    _add_common(p)
    p.set_defaults(fn=_cmd_flow)

    p = sub.add_parser("iseg", help="interactive segmentation from scribbles")
    p.add_argument("image")
    p.add_argument("scribbles", help="JSON file of fg/bg polylines")
    _add_common(p)
    p.set_defaults(fn=_cmd_iseg)

    p = sub.add_parser("vseg", help="propagate a mask to the next frame")
    p.add_argument("prev", help="previously labeled frame")
    p.add_argument("cur", help="frame to segment")
    p.add_argument("prev_mask", help="PNG mask of the previous frame")
    _add_common(p)
    p.set_defaults(fn=_cmd_vseg)

    p = sub.add_parser("verify", help="run the property/oracle suites")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("bench", help="accuracy report on synthetic scenes")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SubminError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
