"""Command-line front end.

    evrecover sample OUTDIR
    evrecover simulate --input FRAMES --out events.txt [--blur blur.png]
    evrecover degrade --input FRAMES --out DATASET [--sigma 4 --noise-events 0.3]
    evrecover reconstruct --image blur.png --events events.txt --out rec.png
    evrecover video --image blur.png --events events.txt --out DIR --frames 21
    evrecover evaluate --pred DIR --ref DIR [--range 16:90]

Options may also come from ``--config FILE`` (``key = value`` lines, keys
named like the long flags). Precedence: flag, then config file, then the
built-in default. The effective configuration is echoed to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .degeneration import CameraModel
from .events import EventError, bin_events
from .formats import (DatasetLayout, FormatError, ensure_parent, frame_files, read_events,
                      read_frames, read_image, read_kernels, write_events, write_image)
from .metrics import psnr, ssim
from .recon import edi_reconstruct, esl_reconstruct, generate_video, integral_at
from .samples import moving_gradient
from .sim import FrameSequence, degrade, inject_noise_events, simulate_events, synthesize_blur
from .sparse import (KernelBank, SolverConfig, SolverDivergedError, SparseError, dct_bank,
                     identity_bank, replicate_hr_bank)

logger = logging.getLogger("evrecover")


def _flag(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


# (flag, type, default, help); flags double as config-file keys
COMMON = [
    ("seed", int, 0, "seed for every stochastic step"),
    ("threads", _positive_int, os.cpu_count() or 1, "cap on worker threads"),
]

SOLVER = [
    ("method", str, "esl", "edi (division) or esl (sparse coding)"),
    ("time", float, 0.0, "reference time as a fraction of the exposure, in [0, 1]"),
    ("scale", _positive_int, 1, "super-resolution factor"),
    ("dict", str, "identity", "LR dictionary: 'identity', 'dct' or an ESLK kernel file"),
    ("hr-dict", str, None, "HR dictionary file; default replicates the LR atoms"),
    ("lambda", float, 0.01, "l1 weight"),
    ("iters", _positive_int, 20, "ISTA iterations"),
    ("tol", float, 0.0, "relative-change stop threshold (0 runs every iteration)"),
    ("lipschitz", str, "auto", "step-size constant, or 'auto'"),
    ("nonnegative", _flag, False, "nonnegative thresholding"),
    ("threshold", float, 0.1, "event threshold c (log intensity)"),
    ("mode", str, "direct", "integral evaluation: direct or reversal"),
]

COMMANDS = {
    "sample": [
        ("count", _positive_int, 17, "number of frames"),
        ("size", _positive_int, 64, "frame side in pixels"),
        ("speed", float, 2.0, "motion in pixels per frame"),
        ("format", str, "png", "png or pgm"),
    ],
    "simulate": [
        ("input", str, None, "directory of numbered frames"),
        ("fps", float, 960.0, "frame rate of the input sequence"),
        ("threshold", float, 0.1, "event threshold c (log intensity)"),
        ("floor", float, 1.0 / 255.0, "intensity floor before taking logs"),
        ("noise-events", float, 0.0, "ratio of uniform spurious events to add"),
        ("out", str, None, "event file to write"),
        ("blur", str, None, "also write the average of the frames here"),
    ],
    "degrade": [
        ("input", str, None, "directory of numbered HR sharp frames"),
        ("out", str, None, "dataset directory (hr/ lr/ blur/ events/)"),
        ("fps", float, 960.0, "frame rate of the input sequence"),
        ("window", _positive_int, 17, "frames averaged per blurry image"),
        ("scale", _positive_int, 1, "HR to LR bicubic downsampling factor"),
        ("sigma", float, 4.0, "image noise std on the 0-255 scale"),
        ("noise-events", float, 0.3, "ratio of uniform spurious events"),
        ("threshold", float, 0.1, "event threshold c (log intensity)"),
    ],
    "reconstruct": [
        ("image", str, None, "blurry observation"),
        ("events", str, None, "event file for the exposure"),
        ("out", str, None, "output image"),
        *SOLVER,
        ("bins", _positive_int, 8, "temporal bins for --export-bins"),
        ("export-bins", str, None, "write the (1+2k, H, W) network input tensor (.npy)"),
        ("export-integral", str, None, "write the integral field as a text grid"),
        ("figure", str, None, "render input/output comparison to this file"),
    ],
    "video": [
        ("image", str, None, "blurry observation"),
        ("events", str, None, "event file for the exposure"),
        ("out", str, None, "output directory for frames"),
        *SOLVER,
        ("frames", _positive_int, 21, "frames across the exposure"),
        ("figure", str, None, "render a frame montage to this file"),
    ],
    "evaluate": [
        ("pred", str, None, "directory of reconstructed frames"),
        ("ref", str, None, "directory of reference frames"),
        ("range", str, None, "1-based inclusive frame range FIRST:LAST"),
        ("figure", str, None, "render per-frame metrics to this file"),
    ],
}

REQUIRED = {
    "simulate": ["input", "out"],
    "degrade": ["input", "out"],
    "reconstruct": ["image", "events", "out"],
    "video": ["image", "events", "out"],
    "evaluate": ["pred", "ref"],
}


def _options(command: str):
    seen, out = set(), []
    for opt in COMMANDS[command] + COMMON:
        if opt[0] not in seen:
            seen.add(opt[0])
            out.append(opt)
    return out


COMMAND_HELP = {
    "sample": "write a synthetic moving-gradient frame sequence",
    "simulate": "simulate events from a frame sequence",
    "degrade": "build a blurry/noisy/event dataset from sharp frames",
    "reconstruct": "recover a sharp frame at one reference time",
    "video": "recover frames across the exposure",
    "evaluate": "PSNR/SSIM of reconstructions against references",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evrecover",
                                     description="Event-enhanced image recovery toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMAND_HELP[name])
        if name == "sample":
            p.add_argument("outdir", help="directory to write frames into")
        p.add_argument("--config", help="key = value file of option defaults")
        p.add_argument("-v", "--verbose", action="store_true")
        for flag, typ, default, help_ in _options(name):
            kw = {"type": typ, "default": None, "dest": flag.replace("-", "_")}
            if typ is _flag:
                kw.update(nargs="?", const=True)
            if default is not None:
                help_ += f" (default: {default})"
            p.add_argument(f"--{flag}", help=help_, **kw)
    return parser


def read_config(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", path, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-")] = value
    return values


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Effective options: flag > config file > built-in default."""
    file_values = read_config(args.config) if args.config else {}
    known = {flag: (typ, default) for flag, typ, default, _ in _options(command)}
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise FormatError(f"unknown config keys for '{command}': {', '.join(unknown)}", args.config)
    cfg = {}
    for flag, (typ, default) in known.items():
        value = getattr(args, flag.replace("-", "_"))
        if value is None and file_values.get(flag, "") != "":
            try:
                value = typ(file_values[flag])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise FormatError(f"bad value for {flag}: {exc}", args.config) from None
        cfg[flag] = default if value is None else value
    missing = [f"--{f}" for f in REQUIRED.get(command, []) if cfg.get(f) is None]
    if missing:
        raise UsageError(f"missing required option(s): {' '.join(missing)}")
    return cfg


class UsageError(ValueError):
    pass


def echo_config(command: str, cfg: dict, stream=None):
    stream = stream or sys.stderr
    print(f"# evrecover {command}", file=stream)
    for key, value in cfg.items():
        print(f"{key} = {'' if value is None else value}", file=stream)


# -- commands ---------------------------------------------------------------

def _load_bank(spec: str) -> KernelBank:
    if spec == "identity":
        return identity_bank()
    if spec == "dct":
        return dct_bank()
    return read_kernels(spec)


def _solver(cfg) -> tuple[KernelBank, KernelBank, SolverConfig]:
    D_I = _load_bank(cfg["dict"])
    if D_I.scale != 1:
        raise SparseError("--dict must be an LR bank (s = 1)")
    s = cfg["scale"]
    if cfg["hr-dict"]:
        D_X = read_kernels(cfg["hr-dict"])
        if D_X.scale != s:
            raise SparseError(f"--hr-dict has shuffle factor {D_X.scale}, --scale is {s}")
    else:
        D_X = replicate_hr_bank(D_I, s) if s > 1 else D_I
    lip = cfg["lipschitz"]
    solver = SolverConfig(lam=cfg["lambda"], iterations=cfg["iters"], tolerance=cfg["tol"],
                          lipschitz=lip if lip == "auto" else float(lip),
                          nonnegative=cfg["nonnegative"])
    return D_I, D_X, solver


def _inputs(cfg):
    Y = read_image(cfg["image"])
    h, w = Y.shape
    stream = read_events(cfg["events"])
    if stream.shape != (h, w):
        raise EventError(f"event sensor {stream.width}x{stream.height} does not match image {w}x{h}")
    if cfg["method"] not in ("edi", "esl"):
        raise UsageError(f"--method must be edi or esl, got {cfg['method']!r}")
    if cfg["mode"] not in ("direct", "reversal"):
        raise UsageError(f"--mode must be direct or reversal, got {cfg['mode']!r}")
    return Y, stream


def cmd_sample(cfg, args):
    if cfg["format"] not in ("png", "pgm"):
        raise UsageError("--format must be png or pgm")
    seq = moving_gradient(cfg["count"], cfg["size"], speed=cfg["speed"])
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        write_image(out / f"frame_{i:06d}.{cfg['format']}", frame)
    logger.info("wrote %d frames to %s", len(seq), out)


def cmd_simulate(cfg, args):
    seq = FrameSequence.at_rate(read_frames(cfg["input"]), cfg["fps"])
    stream = simulate_events(seq, cfg["threshold"], cfg["floor"])
    if cfg["noise-events"]:
        stream = inject_noise_events(stream, cfg["noise-events"], cfg["seed"])
    write_events(ensure_parent(cfg["out"]), stream)
    if cfg["blur"]:
        write_image(ensure_parent(cfg["blur"]), synthesize_blur(seq).image)
    logger.info("%d events over %.6g s", len(stream), stream.duration)


def cmd_degrade(cfg, args):
    seq = FrameSequence.at_rate(read_frames(cfg["input"]), cfg["fps"])
    camera = CameraModel(cfg["threshold"], cfg["sigma"], cfg["noise-events"])
    n = len(seq) // cfg["window"]
    if n == 0:
        raise UsageError(f"need at least {cfg['window']} frames, found {len(seq)}")
    layout = DatasetLayout(cfg["out"]).create()
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(n)
    for i in range(n):
        sample = degrade(seq, i * cfg["window"], cfg["window"], cfg["scale"], camera,
                         int(seeds[i].generate_state(1)[0]))
        layout.write_sample(i, sample)
    logger.info("wrote %d samples to %s", n, layout.root)


def _t_ref(stream, frac: float) -> float:
    if not 0.0 <= frac <= 1.0:
        raise UsageError(f"--time must be in [0, 1], got {frac!r}")
    return min(stream.t_start + frac * stream.duration, stream.t_end)


def cmd_reconstruct(cfg, args):
    Y, stream = _inputs(cfg)
    t_r = _t_ref(stream, cfg["time"])
    E = integral_at(stream, cfg["threshold"], t_r, cfg["mode"])
    if cfg["method"] == "edi":
        if cfg["scale"] != 1:
            raise UsageError("EDI reconstruction has no super-resolution; use --scale 1")
        out = edi_reconstruct(Y, E)
    else:
        D_I, D_X, solver = _solver(cfg)
        out = esl_reconstruct(Y, stream, t_r, D_I, D_X, solver, cfg["threshold"], cfg["mode"])
    write_image(ensure_parent(cfg["out"]), out)
    if cfg["export-integral"]:
        ensure_parent(cfg["export-integral"]).write_text(E.to_text())
    if cfg["export-bins"]:
        np.save(ensure_parent(cfg["export-bins"]), bin_events(stream, cfg["bins"]).network_input(Y))
    if cfg["figure"]:
        from .plotting import plot_comparison
        plot_comparison({"observed": Y, cfg["method"]: out}, ensure_parent(cfg["figure"]))
    logger.info("reconstructed %dx%d frame at t=%.6g", out.shape[1], out.shape[0], t_r)


def cmd_video(cfg, args):
    Y, stream = _inputs(cfg)
    if cfg["method"] == "edi":
        if cfg["scale"] != 1:
            raise UsageError("EDI reconstruction has no super-resolution; use --scale 1")
        D_I = D_X = solver = None
    else:
        D_I, D_X, solver = _solver(cfg)
    video = generate_video(Y, stream, cfg["frames"], D_I, D_X, solver, cfg["threshold"],
                           cfg["mode"], cfg["method"], cfg["threads"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "timestamps.txt", "w") as fh:
        for i, (frame, t) in enumerate(zip(video.frames, video.timestamps)):
            write_image(out / f"frame_{i:06d}.png", frame)
            fh.write(f"{i} {float(t)!r}\n")
    if cfg["figure"]:
        from .plotting import plot_frames
        plot_frames(video.frames, ensure_parent(cfg["figure"]), video.timestamps)
    logger.info("wrote %d frames to %s", len(video), out)


def parse_range(text: str | None, n: int) -> tuple[int, int]:
    if not text:
        return 1, n
    try:
        first, last = (int(v) for v in text.replace("-", ":").split(":"))
    except ValueError:
        raise UsageError(f"--range must be FIRST:LAST, got {text!r}") from None
    if not 1 <= first <= last:
        raise UsageError(f"bad frame range {text!r}")
    return first, min(last, n)


def evaluate_dirs(pred_dir, ref_dir, frame_range: str | None = None):
    pred, ref = frame_files(pred_dir), frame_files(ref_dir)
    if not pred or not ref:
        raise FormatError("no frames found", pred_dir if not pred else ref_dir)
    n = min(len(pred), len(ref))
    if len(pred) != len(ref):
        logger.warning("frame counts differ (%d vs %d); comparing the first %d",
                       len(pred), len(ref), n)
    first, last = parse_range(frame_range, n)
    rows = []
    for i in range(first, last + 1):
        a, b = read_image(pred[i - 1]), read_image(ref[i - 1])
        rows.append((i, psnr(a, b), ssim(a, b)))
    return rows


def cmd_evaluate(cfg, args):
    rows = evaluate_dirs(cfg["pred"], cfg["ref"], cfg["range"])
    out = sys.stdout
    out.write("frame\tpsnr\tssim\n")
    for i, p, s in rows:
        out.write(f"{i}\t{p:.4f}\t{s:.4f}\n")
    if rows:
        out.write(f"mean\t{np.mean([r[1] for r in rows]):.4f}\t{np.mean([r[2] for r in rows]):.4f}\n")
    if cfg["figure"]:
        from .plotting import plot_metrics
        plot_metrics(rows, ensure_parent(cfg["figure"]))


HANDLERS = {
    "sample": cmd_sample,
    "simulate": cmd_simulate,
    "degrade": cmd_degrade,
    "reconstruct": cmd_reconstruct,
    "video": cmd_video,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = resolve(args.command, args)
        echo_config(args.command, cfg)
        HANDLERS[args.command](cfg, args)
    except UsageError as exc:
        print(f"evrecover {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError, SolverDivergedError) as exc:
        print(f"evrecover {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
