"""Command-line entry point.

Subcommands: simulate, denoise, train, eval, report. Flag values override
config-file values override built-in defaults; the fully resolved
configuration is echoed into the output directory so any run can be
reproduced from its artifacts. Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import evio
from .core import Geometry, WindowSequence, binarize, POLARITIES, LABEL_SIGNAL
from .ded import DedParams, ded_pipeline
from .filters import BASELINES
from .metrics import (denoise_accuracy, mean_overlap_rate, blank_patch_ratio,
                      preservation_rate, event_snr)
from .simulator import (Scene, PixelModelParams, NoiseParams, DualStream,
                        render_signal_events, sample_ba_noise, dual_sample,
                        _merge_labeled)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config_file(path):
    """Flat `key = value` file, `#` comments, blank lines ignored."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def resolve_args(args, parser):
    """Fill unset (None) flags from --config file values, typed per option."""
    if getattr(args, "config", None) is None:
        return args
    file_values = parse_config_file(args.config)
    types = {}
    for action in parser._actions:
        if action.dest != "help":
            types[action.dest] = action.type or (
                (lambda v: v.lower() in ("1", "true", "yes"))
                if isinstance(action.const, bool) or action.nargs == 0 else str)
    for key, raw in file_values.items():
        if key not in types:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            setattr(args, key, types[key](raw))
    return args


def _apply_defaults(args, defaults):
    for key, val in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    return args


def echo_config(args, out_dir, subcommand):
    out_dir.mkdir(parents=True, exist_ok=True)
    skip = {"config", "func", "parser"}
    with open(out_dir / "run_config.txt", "w") as f:
        f.write(f"# resolved configuration: evdn {subcommand}\n")
        for key in sorted(vars(args)):
            if key not in skip:
                f.write(f"{key} = {getattr(args, key)}\n")


def _parse_res(text):
    try:
        w, h = text.lower().split("x")
        return Geometry(int(w), int(h))
    except ValueError as e:
        raise UsageError(f"bad --res {text!r}, expected WxH") from e


def set_threads(n):
    if n is None:
        n = os.environ.get("EVDN_THREADS")
    if n is not None:
        import torch
        torch.set_num_threads(int(n))


# ---------------------------------------------------------------- simulate

SIMULATE_DEFAULTS = dict(scene="moving-bar", res="128x128", duration_ms=1000,
                         noise_rate=3.0, contrast_threshold=0.25, seed=0,
                         bar_width=8, velocity=100.0, contrast=1.0,
                         ramp_slope=0.5, texture_scale=1.0, jitter_us=0.0,
                         format="binary")


def cmd_simulate(args, parser):
    _apply_defaults(args, SIMULATE_DEFAULTS)
    if args.out is None:
        raise UsageError("simulate requires -o/--out")
    if args.noise_rate < 0:
        raise UsageError("--noise-rate must be >= 0")
    if args.dual and args.seed2 is None:
        raise UsageError("--dual requires --seed2")
    geometry = _parse_res(args.res)
    out = Path(args.out)
    echo_config(args, out, "simulate")
    duration = int(args.duration_ms * 1000)
    scene = Scene(args.scene, geometry, duration, bar_width=args.bar_width,
                  velocity=args.velocity, contrast=args.contrast,
                  ramp_slope=args.ramp_slope, texture_scale=args.texture_scale,
                  texture_seed=args.seed)
    pix = PixelModelParams(contrast_threshold=args.contrast_threshold)
    noise = NoiseParams(rate=args.noise_rate, seed=args.seed)
    ext = ".evd" if args.format == "binary" else ".csv"
    entries = []
    if args.dual:
        dual = dual_sample(scene, pix, noise, args.seed, args.seed2,
                           jitter_sigma_us=args.jitter_us)
        evio.write_events(dual.s1, out / f"stream1{ext}", args.format)
        evio.write_events(dual.s2, out / f"stream2{ext}", args.format)
        entries.append(evio.ManifestEntry("dual", f"stream1{ext}",
                                          f"stream2{ext}", f"stream1{ext}", "train"))
    else:
        signal = render_signal_events(scene, pix)
        ba = sample_ba_noise(noise, geometry, duration)
        labeled = _merge_labeled(geometry, duration, signal, ba)
        evio.write_events(labeled, out / f"stream{ext}", args.format)
        entries.append(evio.ManifestEntry("single", f"stream{ext}", None,
                                          f"stream{ext}", "train"))
    manifest = evio.DatasetManifest(geometry, 10_000, entries, out)
    evio.save_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(entries)} sequence(s) to {out}")


# ----------------------------------------------------------------- denoise

DENOISE_DEFAULTS = dict(dt_us=10_000, n_windows=3, radius=2, n_min=3,
                        format="binary", t_steps=5)


def cmd_denoise(args, parser):
    _apply_defaults(args, DENOISE_DEFAULTS)
    if args.input is None or args.out is None:
        raise UsageError("denoise requires -i/--input and -o/--out")
    raw = evio.read_events(args.input)
    t0 = time.perf_counter()
    if args.method == "ded":
        if args.input2 is None:
            raise UsageError("--method ded requires -i2/--input2")
        other = evio.read_events(args.input2)
        dual = DualStream(raw, other, raw.stream.geometry, raw.stream.duration)
        params = DedParams(dt_us=args.dt_us, n_windows=args.n_windows,
                           radius=args.radius, n_min=args.n_min,
                           tau_corr_us=args.tau_corr_us or args.dt_us)
        result = ded_pipeline(dual, params)
    elif args.method == "snn":
        if args.checkpoint is None:
            raise UsageError("--method snn requires --checkpoint")
        from .dtsnn import load_checkpoint, predict_stream
        net = load_checkpoint(args.checkpoint)
        result = predict_stream(net, raw, args.dt_us, t_steps=args.t_steps)
    elif args.method in BASELINES:
        fn, params_cls = BASELINES[args.method]
        result = fn(raw.stream, params_cls())
    else:
        raise UsageError(f"unknown method {args.method!r}")
    elapsed = time.perf_counter() - t0
    evio.write_events(result, args.out, args.format)
    kept = int((result.labels == LABEL_SIGNAL).sum())
    print(f"{args.method}: kept {kept}/{len(result)} events "
          f"in {elapsed:.2f}s -> {args.out}")


# ------------------------------------------------------------------- train

TRAIN_DEFAULTS = dict(dt_us=10_000, epochs=10, lr=0.002, batch_size=8,
                      t_steps=5, seed=0, mode="dynamic", fixed_threshold=0.5)


def cmd_train(args, parser):
    _apply_defaults(args, TRAIN_DEFAULTS)
    if args.input is None or args.out is None:
        raise UsageError("train requires -i/--input and -o/--out")
    import torch
    from .dtsnn import (DTSNN, TrainConfig, build_samples, fit,
                        save_checkpoint, predict_stream)
    out = Path(args.out)
    echo_config(args, out, "train")
    labeled = evio.read_events(args.input)
    cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                      t_steps=args.t_steps, seed=args.seed)
    torch.manual_seed(cfg.seed)
    net = DTSNN(mode=args.mode, fixed_threshold=args.fixed_threshold)
    samples = build_samples(labeled, args.dt_us, cfg.t_steps)
    with open(out / "loss_log.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "epoch", "total", "l1", "bce", "th"])
        step = [0]

        def log(terms):
            writer.writerow([step[0], terms["epoch"], terms["total"],
                             terms["l1"], terms["bce"], terms["th"]])
            step[0] += 1

        fit(net, samples, cfg, log=log)
    save_checkpoint(net, out / "model.ckpt")
    if args.test is not None:
        test = evio.read_events(args.test)
        pred = predict_stream(net, test, args.dt_us, t_steps=cfg.t_steps)
        report = denoise_accuracy(pred, test)
        print(f"test DA={report.da:.4f} SR={report.sr:.4f} NR={report.nr:.4f}")
    print(f"checkpoint -> {out / 'model.ckpt'}")


# -------------------------------------------------------------------- eval

EVAL_DEFAULTS = dict(dt_us=10_000, patch=8)


def cmd_eval(args, parser):
    _apply_defaults(args, EVAL_DEFAULTS)
    if args.pred is None or args.gt is None or args.out is None:
        raise UsageError("eval requires --pred, --gt and -o/--out")
    pred = evio.read_events(args.pred)
    gt = evio.read_events(args.gt)
    report = denoise_accuracy(pred, gt)
    report.method = args.method or ""
    report.esnr_db = event_snr(pred)
    report.preservation_rate = preservation_rate(pred, len(pred))
    kept = pred.signal().stream
    if kept.duration > 0 and len(kept):
        frame = binarize(kept, 0, kept.duration, POLARITIES[1])
        report.blank_patch_ratio = blank_patch_ratio(frame, args.patch)
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    print(f"DA={report.da:.4f} SR={report.sr:.4f} NR={report.nr:.4f} -> {args.out}")


# ------------------------------------------------------------------ report

def _write_ppm(bits_pos, bits_neg, path):
    """Event frame as a binary PPM: positive red, negative blue, both white."""
    h, w = bits_pos.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[bits_pos] = (255, 64, 64)
    img[bits_neg] = (64, 64, 255)
    img[bits_pos & bits_neg] = (255, 255, 255)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def _write_bar_svg(labels, values, title, path):
    wbar, gap, hmax = 60, 20, 200
    width = gap + len(values) * (wbar + gap)
    height = hmax + 60
    vmax = max(max(values), 1e-9)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width/2}" y="16" text-anchor="middle" font-size="14">{title}</text>']
    for i, (lab, val) in enumerate(zip(labels, values)):
        x = gap + i * (wbar + gap)
        bh = hmax * val / vmax
        parts.append(f'<rect x="{x}" y="{20 + hmax - bh}" width="{wbar}" '
                     f'height="{bh}" fill="#4878cf"/>')
        parts.append(f'<text x="{x + wbar/2}" y="{hmax + 38}" text-anchor="middle" '
                     f'font-size="11">{lab}</text>')
        parts.append(f'<text x="{x + wbar/2}" y="{14 + hmax - bh}" text-anchor="middle" '
                     f'font-size="10">{val:.3f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def cmd_report(args, parser):
    _apply_defaults(args, dict(dt_us=10_000, window=0))
    if args.out is None:
        raise UsageError("report requires -o/--out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.reports:
        labels, srs, nrs, das = [], [], [], []
        for path in args.reports:
            with open(path) as f:
                doc = json.load(f)
            labels.append(doc.get("method") or Path(path).stem)
            srs.append(doc["sr"])
            nrs.append(doc["nr"])
            das.append(doc["da"])
        _write_bar_svg(labels, das, "denoising accuracy (DA)", out / "da.svg")
        _write_bar_svg(labels, srs, "signal retain (SR)", out / "sr.svg")
        _write_bar_svg(labels, nrs, "noise removal (NR)", out / "nr.svg")
    if args.events:
        labeled = evio.read_events(args.events)
        windows = WindowSequence(labeled.stream, args.dt_us)
        k = args.window
        if k >= max(len(windows), 1):
            raise UsageError(f"--window {k} out of range (stream has {len(windows)})")
        t0, t1 = windows.window_span(k)
        pos = binarize(labeled.stream, t0, t1, 1).bits
        neg = binarize(labeled.stream, t0, t1, 0).bits
        _write_ppm(pos, neg, out / f"window_{k:04d}.ppm")
    print(f"report artifacts -> {out}")


# -------------------------------------------------------------------- main

def build_parser():
    parser = _Parser(prog="evdn", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, fn):
        p = sub.add_parser(name, add_help=True)
        p.set_defaults(func=fn, parser=p)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--threads", type=int)
        return p

    p = add("simulate", cmd_simulate)
    p.add_argument("--scene", choices=("constant", "moving-bar", "moving-texture", "ramp"))
    p.add_argument("--res")
    p.add_argument("--duration-ms", type=float)
    p.add_argument("--noise-rate", type=float)
    p.add_argument("--contrast-threshold", type=float)
    p.add_argument("--bar-width", type=int)
    p.add_argument("--velocity", type=float)
    p.add_argument("--contrast", type=float)
    p.add_argument("--ramp-slope", type=float)
    p.add_argument("--texture-scale", type=float)
    p.add_argument("--jitter-us", type=float)
    p.add_argument("--dual", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--seed2", type=int)
    p.add_argument("--format", choices=("text", "binary"))
    p.add_argument("-o", "--out")

    p = add("denoise", cmd_denoise)
    p.add_argument("--method", required=True,
                   choices=("ded", "snn", "density", "rowcol", "timesurface"))
    p.add_argument("-i", "--input")
    p.add_argument("-i2", "--input2")
    p.add_argument("--checkpoint")
    p.add_argument("--dt-us", type=int)
    p.add_argument("--n-windows", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--n-min", type=int)
    p.add_argument("--tau-corr-us", type=float)
    p.add_argument("--t-steps", type=int)
    p.add_argument("--format", choices=("text", "binary"))
    p.add_argument("-o", "--out")

    p = add("train", cmd_train)
    p.add_argument("-i", "--input")
    p.add_argument("--test")
    p.add_argument("--dt-us", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--t-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("dynamic", "fixed"))
    p.add_argument("--fixed-threshold", type=float)
    p.add_argument("-o", "--out")

    p = add("eval", cmd_eval)
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--method")
    p.add_argument("--dt-us", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("-o", "--out")

    p = add("report", cmd_report)
    p.add_argument("--reports", nargs="*")
    p.add_argument("--events")
    p.add_argument("--dt-us", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("-o", "--out")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = resolve_args(args, args.parser)
        if args.threads is not None or os.environ.get("EVDN_THREADS"):
            set_threads(args.threads)
        args.func(args, args.parser)
        return EXIT_OK
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
