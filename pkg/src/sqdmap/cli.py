"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.
``SQDMAP_SEED`` overrides the default ``--seed`` of every command.
"""
import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .embedding import EmbeddingConfig, NetworkBundle
from .geometry import PerceptionRange, relative_transform
from .matching import MatchParams, MatchResult, adaptive_temporal_match
from .metrics import EvalConfig, evaluate
from .noising import NoiseParams, SampleSource, decay_rate, make_noisy_instance, make_rng
from .render import render_frame_svg
from .scenario import (
    ScenarioConfig, ScenarioFormatError, generate_scenario, read_predictions, read_scenario,
    write_scenario,
)
from .streaming import StreamConfig, run_stream, warp_elements

EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed():
    raw = os.environ.get("SQDMAP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SQDMAP_SEED must be an integer, got {raw!r}")


def _add_range(p):
    p.add_argument("--half-length", type=float, default=30.0)
    p.add_argument("--half-width", type=float, default=15.0)


def _add_noise(p):
    p.add_argument("--noise-scale", type=float, default=0.6, help="all four box noise scales")
    p.add_argument("--flip-prob", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.2)


def build_parser():
    seed = _default_seed()
    parser = _Parser(prog="sqdmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scenario", help="generate a synthetic multi-frame scenario")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--speed", type=float, default=10.0)
    p.add_argument("--yaw-rate", type=float, default=0.0)
    p.add_argument("--interval", type=float, default=0.5)
    p.add_argument("--n-points", type=int, default=20)
    p.add_argument("--divider-density", type=float, default=0.05)
    p.add_argument("--boundary-density", type=float, default=0.02)
    p.add_argument("--crossing-density", type=float, default=0.01)
    _add_range(p)

    p = sub.add_parser("sqd-run", help="run the stream denoising pipeline over a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("-o", "--output", required=True, help="frame-report JSONL file")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--weights-seed", type=int, default=0)
    p.add_argument("--weights-dir", help="load networks saved with NetworkBundle.save")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--top-k", type=int, default=33)
    p.add_argument("--dim", type=int, default=256)
    _add_noise(p)
    _add_range(p)

    p = sub.add_parser("match", help="adaptive temporal matching only")
    p.add_argument("--scenario", required=True)
    p.add_argument("-o", "--output", required=True, help="match-report JSONL file")
    p.add_argument("--frame", type=int, help="only match this frame against its predecessor")
    p.add_argument("--alpha", type=float, default=0.1)
    _add_range(p)

    p = sub.add_parser("noise", help="dump noised samples of each frame's ground truth")
    p.add_argument("--scenario", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--matches", help="match report providing per-element decay")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=seed)
    _add_noise(p)

    p = sub.add_parser("eval-ap", help="Chamfer AP of predictions against scenario ground truth")
    p.add_argument("--scenario", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("-o", "--output", help="JSON report file")
    p.add_argument("--range", type=int, choices=(30, 50), default=30)
    p.add_argument("--thresholds", type=float, nargs="+", help="override the range's thresholds")

    p = sub.add_parser("render-svg", help="one SVG per frame")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", type=int, nargs="+", help="frame indices to render (default all)")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--max-samples", type=int, default=None)
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--top-k", type=int, default=33)
    _add_noise(p)
    _add_range(p)
    return parser


def _load_scenario(path):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    return read_scenario(path)


def _n_points(frames, default=20):
    for f in frames:
        for el in f.elements:
            return len(el.points)
    return default


def _noise_params(args):
    s = args.noise_scale
    return NoiseParams(s, s, s, s, args.flip_prob, args.gamma)


def _stream_config(args, frames):
    return StreamConfig(
        top_k=args.top_k, dn_query_budget=args.budget, n_points=_n_points(frames),
        noise=_noise_params(args), match=MatchParams(args.alpha),
        range=PerceptionRange(args.half_length, args.half_width),
    )


def _write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_gen_scenario(args):
    cfg = ScenarioConfig(
        num_frames=args.frames, frame_interval=args.interval, speed=args.speed,
        yaw_rate=args.yaw_rate, range=PerceptionRange(args.half_length, args.half_width),
        n_points=args.n_points, divider_density=args.divider_density,
        boundary_density=args.boundary_density, crossing_density=args.crossing_density,
        seed=args.seed,
    )
    frames = generate_scenario(cfg)
    write_scenario(frames, args.output)
    print(f"wrote {len(frames)} frames to {args.output}")


def cmd_sqd_run(args):
    frames = _load_scenario(args.scenario)
    cfg = _stream_config(args, frames)
    if args.weights_dir:
        nets = NetworkBundle.load(args.weights_dir)
        if nets.cfg.n_points != cfg.n_points:
            raise InputError(f"weights expect {nets.cfg.n_points} points, scenario has {cfg.n_points}")
    else:
        ecfg = EmbeddingConfig(args.dim, cfg.n_points, cfg.num_classes, coord_range=cfg.range)
        nets = NetworkBundle.random(ecfg, args.weights_seed)
    reports = run_stream(frames, cfg, nets, make_rng(args.seed))
    _write_jsonl(args.output, (r.to_record() for r in reports))
    for r in reports:
        mean_d = "-" if r.mean_D is None else f"{r.mean_D:.3f}"
        mean_decay = "-" if r.mean_decay is None else f"{r.mean_decay:.3f}"
        print(f"frame {r.frame_index:3d}  gt {r.num_gt:3d}  matched {r.matched_count:3d}"
              f" ({r.matched_fraction:.2f})  mean_D {mean_d}  mean_decay {mean_decay}"
              f"  samples {len(r.batch)}")


def _frame_pairs(frames, only=None):
    by_index = {f.index: i for i, f in enumerate(frames)}
    if only is not None:
        if only not in by_index:
            raise InputError(f"frame {only} not in scenario")
        i = by_index[only]
        return [(frames[i - 1] if i > 0 else None, frames[i])]
    return [(frames[i - 1] if i > 0 else None, f) for i, f in enumerate(frames)]


def _warped_prev(prev, frame, rng_, n_points):
    if prev is None:
        return []
    return warp_elements(prev.elements, relative_transform(prev.ego_pose, frame.ego_pose), rng_, n_points)


def cmd_match(args):
    frames = _load_scenario(args.scenario)
    rng_ = PerceptionRange(args.half_length, args.half_width)
    params = MatchParams(args.alpha)
    records = []
    for prev, frame in _frame_pairs(frames, args.frame):
        warped = _warped_prev(prev, frame, rng_, _n_points(frames))
        results = adaptive_temporal_match(warped, frame.elements, params)
        records.append({
            "frame_index": frame.index,
            "prev_frame_index": None if prev is None else prev.index,
            "alpha": args.alpha,
            "matches": [m.to_record() for m in results],
        })
    _write_jsonl(args.output, records)
    print(f"wrote {len(records)} match records to {args.output}")


def _read_match_report(path):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[int(rec["frame_index"])] = [MatchResult.from_record(m) for m in rec["matches"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise InputError(f"{path}:{lineno}: bad match record ({exc})")
    return out


def cmd_noise(args):
    frames = _load_scenario(args.scenario)
    params = _noise_params(args)
    matches = _read_match_report(args.matches) if args.matches else {}
    rng = make_rng(args.seed)
    records = []
    for frame in frames:
        frame_matches = matches.get(frame.index)
        if frame_matches is not None and len(frame_matches) != len(frame.elements):
            raise InputError(f"match report for frame {frame.index} does not align with scenario")
        for i, el in enumerate(frame.elements):
            decay, source = 1.0, SampleSource.NORMAL
            if frame_matches is not None and frame_matches[i].matched:
                m = frame_matches[i]
                decay = decay_rate(m.distance_D, m.threshold_delta, args.alpha, params.gamma)
                source = SampleSource.STREAM
            s = make_noisy_instance(el, decay, params, rng, original_index=i, source=source)
            records.append({
                "frame_index": frame.index, "target": i, "source": s.source.value,
                "cls": s.element.cls, "original_cls": s.original_cls, "decay": s.decay,
                "noise": [s.noise.dx, s.noise.dy, s.noise.dw, s.noise.dh],
                "points": s.element.points.tolist(),
            })
    _write_jsonl(args.output, records)
    print(f"wrote {len(records)} noised samples to {args.output}")


def cmd_eval_ap(args):
    frames = _load_scenario(args.scenario)
    if not Path(args.predictions).is_file():
        raise InputError(f"no such file: {args.predictions}")
    preds = read_predictions(args.predictions)
    unknown = set(preds) - {f.index for f in frames}
    if unknown:
        raise InputError(f"predictions reference unknown frames {sorted(unknown)}")
    cfg = EvalConfig.for_range(args.range)
    if args.thresholds:
        cfg = EvalConfig(args.thresholds, cfg.classes, cfg.range)
    report = evaluate([preds.get(f.index, []) for f in frames], [f.elements for f in frames], cfg)
    if args.output:
        Path(args.output).write_text(json.dumps(report.to_record()) + "\n")
    print(report.table())


def cmd_render_svg(args):
    frames = _load_scenario(args.scenario)
    cfg = _stream_config(args, frames)
    ecfg = EmbeddingConfig(64, cfg.n_points, cfg.num_classes, coord_range=cfg.range)
    reports = run_stream(frames, cfg, NetworkBundle.random(ecfg, 0), make_rng(args.seed))
    wanted = set(args.frames) if args.frames else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for i, (frame, report) in enumerate(zip(frames, reports)):
        if wanted is not None and frame.index not in wanted:
            continue
        prev = frames[i - 1] if i > 0 else None
        warped = _warped_prev(prev, frame, cfg.range, cfg.n_points)
        svg = render_frame_svg(frame, cfg.range, warped, report, args.max_samples)
        (out_dir / f"frame_{frame.index:04d}.svg").write_text(svg)
        written += 1
    print(f"wrote {written} SVG files to {out_dir}")


COMMANDS = {
    "gen-scenario": cmd_gen_scenario,
    "sqd-run": cmd_sqd_run,
    "match": cmd_match,
    "noise": cmd_noise,
    "eval-ap": cmd_eval_ap,
    "render-svg": cmd_render_svg,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (InputError, ScenarioFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
