"""Command-line entry point: simulate, track, evaluate, train-demo, selfcheck.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 selfcheck failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import mot_io
from .assoc_cv import run_tracking
from .assoc_sv import RunConfig
from .metrics import evaluate
from .simulate import SceneConfig, generate_scene

EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_SELFCHECK = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def cmd_simulate(args) -> int:
    cfg = mot_io.load_config(SceneConfig, args.config)
    truth, dets = generate_scene(cfg)
    out = Path(args.out)
    gt_rows = {v: [(d.frame, d.gt_global_id, d.box) for fr in truth.gt[v] for d in fr] for v in truth.gt}
    mot_io.write_rows_dir(out / "gt", gt_rows)
    for v, frames in dets.items():
        mot_io.write_detections(out / "dets", v, frames)
    (out / "scene.cfg").write_text(mot_io.dump_config(cfg))
    n_det = sum(len(f) for frames in dets.values() for f in frames)
    print(f"wrote {len(dets)} views, {cfg.n_frames} frames, {n_det} detections to {out}")
    return 0


def cmd_track(args) -> int:
    cfg = mot_io.load_config(RunConfig, args.config)
    det_dir = Path(args.dets)
    if not det_dir.is_dir():
        raise mot_io.ConfigError(f"directory not found: {det_dir}")
    views = list(mot_io.view_files(det_dir))
    if not views:
        raise mot_io.ConfigError(f"no view_<i>.txt detection files in {det_dir}")
    stream = {v: mot_io.read_detections(det_dir, v) for v in views}
    n_frames = max(len(frames) for frames in stream.values())
    single, cross = run_tracking(stream, n_frames, cfg)
    out = Path(args.out)
    mot_io.write_rows_dir(out / "single", single)
    mot_io.write_rows_dir(out / "cross", cross)
    (out / "run.cfg").write_text(mot_io.dump_config(cfg))
    n_gid = len({r[1] for rows in cross.values() for r in rows})
    print(f"tracked {len(views)} views over {n_frames} frames; {n_gid} global IDs")
    return 0


def cmd_evaluate(args) -> int:
    for d in (args.gt, args.pred):
        if not Path(d).is_dir():
            raise mot_io.ConfigError(f"directory not found: {d}")
    gt_files = mot_io.view_files(args.gt)
    pred_files = mot_io.view_files(args.pred)
    if not gt_files:
        raise mot_io.ConfigError(f"no view_<i>.txt files in {args.gt}")
    if set(gt_files) != set(pred_files):
        raise mot_io.ConfigError(
            f"view mismatch: gt has {sorted(gt_files)}, predictions have {sorted(pred_files)}")
    gt = mot_io.read_rows_dir(args.gt)
    pred = mot_io.read_rows_dir(args.pred)
    report = evaluate(gt, pred, cross_view=args.cross_view, iou_threshold=args.iou)
    sys.stdout.write(report.format_text())
    sys.stdout.write("\n")
    sys.stdout.write(report.format_kv())
    return 0


def cmd_train_demo(args) -> int:
    from .losses import Mode, ablation_accuracy

    mode = Mode(args.mode)
    acc, result = ablation_accuracy(mode, args.seed, epochs=args.epochs, lr=args.lr, n_ids=args.ids,
                                    n_views=args.views, sigma=args.sigma, view_weight=args.view_weight)
    step = max(1, args.epochs // 20)
    for epoch, value in enumerate(result.trace):
        if epoch % step == 0 or epoch == len(result.trace) - 1:
            print(f"epoch {epoch:4d}  loss {value:.6f}")
    print(f"mode={mode.value}")
    print(f"matching_accuracy={acc:.6f}")
    return 0


def _selfcheck_lines():
    from .assignment import brute_force_min_cost, hungarian
    from .assoc_cv import adaptive_temperature
    from .losses import LinearHead, conflict_free_ce, cross_view_ce, finite_diff_check, total_loss, UncertaintyWeights
    from .metrics_reference import brute_force_reference, fast_path, max_abs_diff, random_tiny_scene

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(5):
        n, d, c = 6, 5, 4
        x = rng.normal(size=(n, d))
        labels = rng.integers(0, c, size=n)
        lid_to_view = np.array([0, 0, 1, 1])

        def ce(p):
            return cross_view_ce(LinearHead(p["W"], p["b"]), p["x"], labels)

        def cf(p):
            return conflict_free_ce(LinearHead(p["W"], p["b"]), p["x"], labels, lid_to_view)

        params = {"W": rng.normal(size=(c, d)), "b": rng.normal(size=c), "x": x}
        worst = max(worst, finite_diff_check(ce, params), finite_diff_check(cf, params))

        def tl(p):
            v, g = total_loss(1.3, 0.7, 0.4, UncertaintyWeights(p["w"][0], p["w"][1]))
            return v, {"w": np.array([g["w1"], g["w2"]])}

        worst = max(worst, finite_diff_check(tl, {"w": rng.normal(size=2)}))
    yield "gradient check (max rel err <= 1e-4)", worst <= 1e-4, f"{worst:.2e}"

    bad = 0
    for _ in range(300):
        r, c = rng.integers(1, 8, size=2)
        m = rng.random((r, c))
        if hungarian(m).total(m) != brute_force_min_cost(m):
            bad += 1
    yield "hungarian vs brute force (300 matrices)", bad == 0, f"{bad} mismatches"

    tau = adaptive_temperature(0.5, 0.5, 3)
    yield "adaptive temperature 2 ln 4", abs(tau - 2 * np.log(4)) <= 1e-12, f"{tau:.12f}"

    worst_m = 0.0
    for _ in range(40):
        gt, pred = random_tiny_scene(rng)
        worst_m = max(worst_m, max_abs_diff(fast_path(gt, pred), brute_force_reference(gt, pred)))
    yield "metrics vs brute-force reference (40 scenes)", worst_m <= 1e-9, f"{worst_m:.2e}"


def cmd_selfcheck(args) -> int:
    ok = True
    for name, passed, detail in _selfcheck_lines():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  [{detail}]")
    return 0 if ok else EXIT_SELFCHECK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xviewtrack", description="Cross-view multi-object tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic multi-view scene")
    p.add_argument("--config", help="flat key = value scene config (defaults if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run single-view + cross-view tracking")
    p.add_argument("--dets", required=True, help="directory with view_<i>.txt and embedding sidecars")
    p.add_argument("--config", help="flat key = value run config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--cross-view", action="store_true", help="also compute CVMA and CVIDF1")
    p.add_argument("--iou", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-demo", help="toy Re-ID head training on synthetic features")
    p.add_argument("--mode", required=True, choices=["shared", "plain", "conflict-free"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--ids", type=int, default=8)
    p.add_argument("--views", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--view-weight", type=float, default=0.5)
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("selfcheck", help="run built-in oracle checks")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (mot_io.ConfigError, mot_io.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"xviewtrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
