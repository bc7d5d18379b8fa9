"""Command line interface: ``cornertrack {render,diff-study,track-synthetic,bench}``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .imageio import write_pfm, write_pgm16
from .render import RenderSettings, render_image, set_threads
from .scene import Pose, load_scene

log = logging.getLogger("cornertrack")


class UsageError(Exception):
    pass


def _pose(args) -> Pose:
    t = args.translation
    r = args.rotation or (0.0, 0.0, 0.0)
    return Pose(tuple(t), tuple(r))


def _sizes(text: str) -> list:
    try:
        return [tuple(int(v) for v in s.lower().split("x")) for s in text.split(",") if s]
    except ValueError:
        raise UsageError(f"bad size list {text!r}; expected e.g. 160x128,320x128") from None


def cmd_render(args) -> int:
    scene = load_scene(ex.resolve_path(args.scene))
    obj = ex.build_object(args.object)
    pose = _pose(args)
    render_image(scene, RenderSettings(), obj, pose)  # compile and warm up before timing
    t0 = time.perf_counter()
    img = render_image(scene, RenderSettings(), obj, pose)
    dt = time.perf_counter() - t0
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pfm = out.with_suffix(".pfm")
    write_pfm(pfm, img)
    print(f"wrote {pfm}")
    if args.pgm:
        scale = write_pgm16(out.with_suffix(".pgm"), img)
        print(f"wrote {out.with_suffix('.pgm')} (scale {scale:.6g} per count)")
    if args.figure:
        from .plotting import image_figure
        print(f"wrote {image_figure(img, out.with_suffix('.png'), title=obj.name)}")
    peak = float(img.max())
    v, u = np.unravel_index(int(np.argmax(img)), img.shape)
    if peak == 0.0:
        log.warning("rendered image is all zero: the object does not light the visible wall")
    print(f"peak intensity {peak:.6g} at pixel ({u}, {v})")
    print(f"render time {dt * 1e3:.2f} ms ({scene.width}x{scene.height} pixels, {len(obj)} surfels)")
    return 0


def cmd_diff_study(args) -> int:
    scene = load_scene(ex.resolve_path(args.scene))
    obj = ex.build_object(args.object)
    study = ex.diff_study(scene, obj, _pose(args), args.delta_translation, args.delta_rotation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pfm(out / "reference.pfm", study.reference)
    for axis, img in study.differences.items():
        write_pfm(out / f"diff_{axis}.pfm", img)
    write_pfm(out / "diff_shape.pfm", study.shape_difference)
    (out / "diff_study.csv").write_text(study.to_csv())
    from .plotting import diff_study_figure
    diff_study_figure(study, out / "diff_study.png")
    for r in study.rows:
        print(f"{r['axis']:>5}: peak |diff|/peak ref = {r['relative_change']:.3e}  "
              f"per unit = {100 * r['relative_per_unit']:.3g}%  amplification x{r['amplification']}")
    print(f"wrote {out / 'diff_study.csv'} and {out / 'diff_study.png'}")
    return 0


def cmd_track_synthetic(args) -> int:
    spec_path = args.spec or f"experiment{args.experiment or 1}.json"
    overrides = {"trials": args.trials, "seed": args.seed, "experiment": args.experiment}
    spec = ex.ExperimentSpec.load(spec_path, **overrides)
    out = Path(args.out or spec.out or f"results/experiment{spec.experiment}")
    result = ex.run_tracking(spec)
    paths = ex.write_tracking_outputs(result, spec, out, figure=not args.no_figure)
    axes = (0, 1, 2, 3, 4, 5) if spec.tracker.dof_mode.n_dof == 6 else (0, 1, 2)
    units = np.array([100.0, 100.0, 100.0, 1.0, 1.0, 1.0])[list(axes)]
    for v in result.variants():
        rms = result.pooled_rms(v, axes) * units
        std = result.pooled_std(v, axes) * units
        fails = sum(s.failures for s in result.for_variant(v))
        print(f"{v}: RMS error {np.array2string(rms, precision=3)}  std {np.array2string(std, precision=3)}"
              f"  (cm / deg)  median iterations {np.median(result.all_iterations(v)):.0f}  unconverged {fails}")
    print(f"wall clock {result.wall_clock_s:.1f} s; wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_bench(args) -> int:
    scene = load_scene(ex.resolve_path(args.scene))
    obj = ex.build_object(args.object)
    surfels = [int(s) for s in args.surfels.split(",") if s] if args.surfels else []
    rows = ex.bench(scene, obj, _sizes(args.sizes), surfels, repeats=args.repeats)
    text = ex.bench_csv(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(text)
    from .plotting import bench_figure
    bench_figure(rows, out / "bench.png")
    sys.stdout.write(text)
    print(f"wrote {out / 'bench.csv'} and {out / 'bench.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cornertrack", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="renderer worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pose_args(sp, default_t=(0.0, 0.5, 0.0)):
        sp.add_argument("--translation", type=float, nargs=3, default=list(default_t), metavar=("X", "Y", "Z"))
        sp.add_argument("--rotation", type=float, nargs=3, default=None, metavar=("RX", "RY", "RZ"),
                        help="extrinsic XYZ Euler angles in degrees")

    r = sub.add_parser("render", help="render one wall image")
    r.add_argument("--scene", default="fig2.json")
    r.add_argument("--object", default="square.surfels")
    r.add_argument("--out", default="render")
    r.add_argument("--pgm", action="store_true", help="also write a 16-bit PGM preview")
    r.add_argument("--figure", action="store_true", help="also write a PNG figure")
    pose_args(r)
    r.set_defaults(func=cmd_render)

    d = sub.add_parser("diff-study", help="sensitivity of the wall image to pose changes")
    d.add_argument("--scene", default="fig2.json")
    d.add_argument("--object", default="square.surfels")
    d.add_argument("--out", default="results/diff_study")
    d.add_argument("--delta-translation", type=float, default=0.025, help="meters")
    d.add_argument("--delta-rotation", type=float, default=7.5, help="degrees")
    pose_args(d)
    d.set_defaults(func=cmd_diff_study)

    t = sub.add_parser("track-synthetic", help="run a synthetic tracking experiment")
    t.add_argument("--spec", default=None, help="experiment JSON (default: bundled experimentN.json)")
    t.add_argument("--experiment", type=int, choices=(1, 2, 3, 4), default=None)
    t.add_argument("--trials", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None)
    t.add_argument("--no-figure", action="store_true")
    t.set_defaults(func=cmd_track_synthetic)

    b = sub.add_parser("bench", help="render timing over pixel and surfel counts")
    b.add_argument("--scene", default="desk.json")
    b.add_argument("--object", default="car.surfels")
    b.add_argument("--sizes", default="160x128,320x128,640x128")
    b.add_argument("--surfels", default="250,500,1000")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out", default="results/bench")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        set_threads(args.threads)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be at least 1")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"cornertrack: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report runtime failures as exit status 1
        log.debug("failure", exc_info=True)
        print(f"cornertrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
