"""Command-line entry point.

Exit codes: 0 on success, 2 for bad usage or input, 3 when a cloth state
could not be extracted.
"""

import argparse
import json
import sys
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .disk import compute_disk, disk_abs_diff, disk_signed_diff, render_disk
from .errors import ExtractionError
from .extract import CloSE, FitParams, extract_close
from .geometry import DEFAULT_EPS, BorderCurve, normalize_border, resample_border
from .metrics import evaluate
from .plan import plan, plan_to_json
from .report import disk_figure, eval_figure
from .semantics import label
from .synth import (
    DEFAULT_COVER_EPS,
    DEFAULT_LAYER_HEIGHT,
    SHAPES,
    DatasetEntry,
    generate_dataset,
    load_dataset,
    save_dataset,
)

EXIT_OK, EXIT_INPUT, EXIT_EXTRACTION = 0, 2, 3


class InputError(Exception):
    pass


@dataclass
class Config:
    eps: float = DEFAULT_EPS
    n_segments: int = 80
    k1: float = 0.1
    k2: float = 0.05
    k3: float = 0.1
    tau: float = np.pi / 4
    n_inits: int = 20
    max_sweep: float = np.pi / 2
    clip_quantile: float = 0.99
    rim_window: float = 0.2
    rel_threshold: float = 0.5
    cover_eps: float = DEFAULT_COVER_EPS
    layer_height: float = DEFAULT_LAYER_HEIGHT
    seed: int = 0

    def validate(self):
        for name, value in asdict(self).items():
            if name == "seed":
                if value < 0:
                    raise InputError("--seed must be non-negative")
            elif not value > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        if not self.rel_threshold < 1:
            raise InputError("--rel-threshold must be below 1")
        if self.clip_quantile > 1:
            raise InputError("--clip-quantile must be at most 1")
        if self.n_segments < BorderCurve.MIN_SEGMENTS:
            raise InputError(f"--n-segments must be >= {BorderCurve.MIN_SEGMENTS}")
        return self

    def fit_params(self):
        return FitParams(self.k1, self.k2, self.k3, self.tau, self.n_inits,
                         self.max_sweep, self.clip_quantile, self.rim_window)

    def to_dict(self):
        return asdict(self)


def _add_config_flags(p, fit=False, gen=False):
    p.add_argument("--eps", type=float, default=Config.eps, help="zenithal lift of the dGLI")
    p.add_argument("--layer-height", type=float, default=Config.layer_height)
    if gen:
        p.add_argument("--n-segments", type=int, default=Config.n_segments)
        p.add_argument("--seed", type=int, default=Config.seed)
    if fit:
        p.add_argument("--k1", type=float, default=Config.k1)
        p.add_argument("--k2", type=float, default=Config.k2)
        p.add_argument("--k3", type=float, default=Config.k3)
        p.add_argument("--tau", type=float, default=Config.tau)
        p.add_argument("--n-inits", type=int, default=Config.n_inits)
        p.add_argument("--max-sweep", type=float, default=Config.max_sweep)
        p.add_argument("--clip-quantile", type=float, default=Config.clip_quantile)
        p.add_argument("--rim-window", type=float, default=Config.rim_window)
        p.add_argument("--rel-threshold", type=float, default=Config.rel_threshold)


def config_from(args):
    fields = Config.__dataclass_fields__
    values = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    return Config(**values).validate()


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def read_border(path):
    return BorderCurve(_read_json(path))


def read_close(path):
    return CloSE.from_dict(_read_json(path))


def _write(path, text, mode="w"):
    try:
        with open(path, mode) as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _write_config(prefix, cfg, extra=None):
    doc = {"config": cfg.to_dict()}
    if extra:
        doc.update(extra)
    _write(f"{prefix}.config.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit(text, out):
    if out:
        _write(out, text + "\n")
    else:
        print(text)


def cmd_gen(args):
    cfg = config_from(args)
    if args.count < 1:
        raise InputError("--count must be >= 1")
    if args.sigma < 0:
        raise InputError("--sigma must be non-negative")
    shapes = args.shape or ["square"]
    for s in shapes:
        if s not in SHAPES:
            raise InputError(f"unknown shape {s!r}; choose from {', '.join(sorted(SHAPES))}")
    entries = [DatasetEntry(s, args.sigma) for s in shapes]
    samples = generate_dataset(entries, args.count, cfg.seed, cfg.n_segments, cfg.layer_height)
    try:
        save_dataset(samples, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    _write_config(args.out, cfg, {"shapes": shapes, "sigma": args.sigma, "count": args.count})
    counts = Counter(s.meta["shape"] for s in samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    for shape in sorted(counts):
        print(f"  {shape}: {counts[shape]}")


def _prepare_border(border, n_segments):
    xy = border.vertices[:, :2]
    area = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
    if abs(area) < 1e-12:
        raise InputError("border encloses zero area")
    border = normalize_border(border)
    if n_segments:
        border = resample_border(border, n_segments)
    return border


def _disk_outputs(d, prefix, size, title, folds=()):
    _write(f"{prefix}.csv", d.to_csv())
    _write(f"{prefix}.ppm", render_disk(d, size), mode="wb")
    disk_figure(d, f"{prefix}.png", title=title, size=size, folds=folds)


def cmd_disk(args):
    cfg = config_from(args)
    if args.size < 64:
        raise InputError("--size must be >= 64")
    start = _prepare_border(read_border(args.border), args.n_segments)
    d = compute_disk(start, cfg.eps)
    _disk_outputs(d, args.out, args.size, "dGLI disk")
    written = [f"{args.out}.csv", f"{args.out}.ppm", f"{args.out}.png"]
    if args.end:
        end = read_border(args.end)
        if end.n != start.n:
            raise InputError("start and end borders differ in vertex count")
        # The end border shares the start border's frame; only the start is normalised.
        d_end = compute_disk(end, cfg.eps)
        for name, diff in (("abs_diff", disk_abs_diff(d, d_end)),
                           ("signed_diff", disk_signed_diff(d, d_end))):
            _disk_outputs(diff, f"{args.out}_{name}", args.size, name.replace("_", " "))
            written += [f"{args.out}_{name}.{ext}" for ext in ("csv", "ppm", "png")]
    _write_config(args.out, cfg, {"border": args.border, "end": args.end,
                                  "n_segments": start.n, "size": args.size})
    for path in written:
        print(path)


def _pair_from_args(args):
    if args.dataset is not None:
        samples = _load_samples(args.dataset)
        if not 0 <= args.index < len(samples):
            raise InputError(f"--index must lie in [0, {len(samples)})")
        s = samples[args.index]
        return s.start, s.end
    if not (args.start and args.end):
        raise InputError("give --start and --end, or --dataset")
    return read_border(args.start), read_border(args.end)


def cmd_close(args):
    cfg = config_from(args)
    start, end = _pair_from_args(args)
    if start.n != end.n:
        raise InputError(f"borders have {start.n} and {end.n} vertices")
    d0, d1 = compute_disk(start, cfg.eps), compute_disk(end, cfg.eps)
    close = extract_close(d0, d1, cfg.fit_params(), cfg.rel_threshold)
    doc = close.to_dict()
    doc["config"] = cfg.to_dict()
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)


def cmd_label(args):
    lab = label(read_close(args.close))
    if args.out:
        _write(args.out, lab.to_json() + "\n")
    print(lab.to_json() if args.json else lab.sentence)


def _format_point(p):
    return "(" + ", ".join(f"{v:.3f}" for v in p) + ")"


def cmd_plan(args):
    cfg = config_from(args)
    border = _prepare_border(read_border(args.border), None)
    steps = plan(border, read_close(args.current), read_close(args.goal), cfg.layer_height)
    text = plan_to_json(steps, cfg.to_dict())
    if args.out:
        _write(args.out, text + "\n")
    if args.json:
        print(text)
        return
    if not steps:
        print("Nothing to do: the cloth is already in the goal state.")
    for k, step in enumerate(steps, 1):
        print(f"{k}. {step.description}")
        for pick, place in zip(step.picks, step.places):
            print(f"   pick {_format_point(pick)} -> place {_format_point(place)}")


def _load_samples(path):
    try:
        samples = load_dataset(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path} is not a dataset file: {exc}") from None
    if not samples:
        raise InputError(f"{path} holds no samples")
    return samples


def cmd_eval(args):
    cfg = config_from(args)
    samples = _load_samples(args.dataset)
    report = evaluate(samples, cfg.fit_params(), cfg.eps, cfg.rel_threshold,
                      cfg.layer_height, threads=args.threads)
    report.config = cfg.to_dict()
    _write(f"{args.out}.json", report.to_json() + "\n")
    _write(f"{args.out}.csv", report.to_csv())
    eval_figure(report, f"{args.out}.png")
    s = report.summary()
    print(f"samples: {s['n_samples']}  extracted: {s['n_ok']}  failure rate: {s['failure_rate']:.3f}")
    for kind, count in s["failures"].items():
        print(f"  {kind}: {count}")
    for key in ("rmse", "frechet", "fold_error"):
        if s[key]["mean"] is not None:
            print(f"{key}: mean {s[key]['mean']:.4f}  var {s[key]['var']:.4f}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clothstate", description="dGLI disks and CloSE states of folded cloth borders.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic fold dataset")
    p.add_argument("--shape", action="append", help="shape name, repeatable")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0, help="vertex noise")
    p.add_argument("--out", required=True)
    _add_config_flags(p, gen=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("disk", help="dGLI disk of a border as CSV, P6 and PNG")
    p.add_argument("--border", required=True)
    p.add_argument("--end", help="folded border; also writes the two difference disks")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--n-segments", type=int, help="resample to this many segments")
    p.add_argument("--size", type=int, default=256)
    _add_config_flags(p)
    p.set_defaults(func=cmd_disk)

    p = sub.add_parser("close", help="extract the CloSE state of a folded border")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--dataset", help="take the pair from a dataset file instead")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out")
    _add_config_flags(p, fit=True)
    p.set_defaults(func=cmd_close)

    p = sub.add_parser("label", help="semantic label of a CloSE state")
    p.add_argument("--close", required=True)
    p.add_argument("--json", action="store_true", help="print the full label as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("plan", help="pick-and-place plan between two CloSE states")
    p.add_argument("--border", required=True, help="flat border")
    p.add_argument("--current", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="score fold prediction on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--threads", type=int, help="worker processes (0 = all cores); "
                   "defaults to CLOSE_THREADS")
    _add_config_flags(p, fit=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ExtractionError as exc:
        print(f"extraction failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_EXTRACTION
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
