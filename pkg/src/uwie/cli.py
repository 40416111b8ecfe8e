"""Batch command-line interface.

Commands: ``enhance`` (full network or classical-only), ``evaluate``
(metric reports over directories), ``gradcheck`` (finite-difference
diagnostics), ``weights init|inspect`` (weight containers), and ``stats``
(quality-score breakdown for one image).

Configuration precedence is built-in defaults < ``--config`` JSON file <
command-line flags; unknown config keys are an error. All commands are
deterministic given (inputs, flags, seed); the parallelism degree never
changes an output byte. Timing fields in the enhance sidecar are the one
exception to byte-level reproducibility.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import fpp, imgio, metrics, network, weights_io
from .errors import InputError, ParameterError, UwieError
from .gradients import COMPONENTS, gradient_report
from .losses import QualityWeights, quality_score

KNOWN_CONFIG_KEYS = {
    "c1",
    "c2",
    "c3",
    "lambda_imp",
    "trim",
    "channel_weights",
    "eme_blocks",
    "cti_blocks",
    "blocks",
    "alpha",
    "epsilon",
    "omega",
    "lambda_bem",
    "target_gray",
    "metrics",
    "format",
    "seed",
    "jobs",
}


def _parse_blocks(value) -> tuple[int, int]:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return int(value[0]), int(value[1])
    match = re.fullmatch(r"(\d+)x(\d+)", str(value))
    if not match:
        raise ParameterError(f"block grid must look like 'K1xK2', got {value!r}")
    return int(match.group(1)), int(match.group(2))


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ParameterError("config file must hold a JSON object")
    unknown = sorted(set(config) - KNOWN_CONFIG_KEYS)
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    return config


def _pick(args, config: dict, key: str, fallback):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return fallback


def _quality_weights(args, config: dict) -> QualityWeights:
    defaults = QualityWeights()
    blocks = _pick(args, config, "blocks", None)
    eme = config.get("eme_blocks", defaults.eme_blocks)
    cti = config.get("cti_blocks", defaults.cti_blocks)
    if blocks is not None:
        eme = cti = _parse_blocks(blocks)
    return QualityWeights(
        c1=float(_pick(args, config, "c1", defaults.c1)),
        c2=float(_pick(args, config, "c2", defaults.c2)),
        c3=float(_pick(args, config, "c3", defaults.c3)),
        lambda_imp=float(_pick(args, config, "lambda_imp", defaults.lambda_imp)),
        trim=float(_pick(args, config, "trim", defaults.trim)),
        channel_weights=tuple(config.get("channel_weights", defaults.channel_weights)),
        eme_blocks=_parse_blocks(eme),
        cti_blocks=_parse_blocks(cti),
        alpha_entropy=float(_pick(args, config, "alpha", defaults.alpha_entropy)),
        epsilon=float(config.get("epsilon", defaults.epsilon)),
    )


def _fpp_config(args, config: dict) -> fpp.FppConfig:
    defaults = fpp.FppConfig()
    target = config.get("target_gray", defaults.target_gray)
    return fpp.FppConfig(
        omega=float(_pick(args, config, "omega", defaults.omega)),
        lambda_bem=float(_pick(args, config, "lambda_bem", defaults.lambda_bem)),
        target_gray=None if target is None else float(target),
        epsilon=float(config.get("epsilon", defaults.epsilon)),
    )


def _quality_echo(w: QualityWeights) -> dict:
    return {
        "c1": w.c1,
        "c2": w.c2,
        "c3": w.c3,
        "lambda_imp": w.lambda_imp,
        "trim": w.trim,
        "channel_weights": list(w.channel_weights),
        "eme_blocks": list(w.eme_blocks),
        "cti_blocks": list(w.cti_blocks),
        "alpha": w.alpha_entropy,
        "epsilon": w.epsilon,
    }


def _fpp_echo(cfg: fpp.FppConfig) -> dict:
    return {
        "omega": cfg.omega,
        "lambda_bem": cfg.lambda_bem,
        "target_gray": cfg.target_gray,
        "epsilon": cfg.epsilon,
    }


def _image_seed(seed: int, stem: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stem}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _gather_inputs(path: Path) -> list[Path]:
    if path.is_dir():
        files = imgio.list_images(path)
        if not files:
            raise InputError(f"no PNG/JPEG images in {path}")
        return files
    if path.is_file():
        return [path]
    raise InputError(f"input {path} does not exist")


def cmd_enhance(args) -> int:
    config = _load_config(args.config)
    fpp_cfg = _fpp_config(args, config)
    seed = _pick(args, config, "seed", None)
    jobs = int(_pick(args, config, "jobs", 1))
    if jobs < 1:
        raise ParameterError(f"jobs must be >= 1, got {jobs}")
    if args.fpp_only and args.weights:
        raise ParameterError("choose either --fpp-only or --weights, not both")
    if not args.fpp_only and not args.weights:
        raise ParameterError("pass --weights DIR for network mode or --fpp-only")

    weights = None
    if args.weights:
        weights = weights_io.load_weights(args.weights)

    inputs = _gather_inputs(Path(args.input))
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> dict:
        start = time.perf_counter()
        entry = {"image": path.name, "output": path.stem + ".png", "status": "ok"}
        try:
            img = imgio.load_image(path)
            if args.fpp_only:
                result = fpp.enhance_classical(img, fpp_cfg)
            else:
                padded, size = imgio.pad_to_multiple(img, 8)
                if seed is None:
                    result = network.enhance_forward(padded, weights, fpp_cfg)
                else:
                    result = network.enhance_forward(
                        padded,
                        weights,
                        fpp_cfg,
                        mode="sampled",
                        seed=_image_seed(int(seed), path.stem),
                    )
                result = imgio.crop_to(result, size)
            imgio.save_png(result, out_dir / entry["output"])
        except UwieError as exc:
            entry["status"] = f"error: {exc}"
        entry["seconds"] = time.perf_counter() - start
        return entry

    if jobs == 1:
        entries = [work(p) for p in inputs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(work, inputs))
    entries.sort(key=lambda e: e["image"])

    sidecar = {
        "command": "enhance",
        "mode": "fpp-only" if args.fpp_only else "network",
        "seed": seed,
        "jobs": jobs,
        "config": {"fpp": _fpp_echo(fpp_cfg)},
        "images": entries,
    }
    (out_dir / "enhance_report.json").write_text(json.dumps(sidecar, indent=2) + "\n")

    failures = [e for e in entries if e["status"] != "ok"]
    for entry in failures:
        print(f"enhance: {entry['image']}: {entry['status']}", file=sys.stderr)
    return 1 if failures else 0


def _load_dir(directory: Path, jobs: int):
    """Load a directory of images keyed by stem; returns (images, failures)."""
    paths = imgio.list_images(directory)
    images: dict[str, object] = {}
    failures: list[tuple[str, str]] = []

    def load(path: Path):
        try:
            return path.stem, imgio.load_image(path), None
        except InputError as exc:
            return path.stem, None, str(exc)

    if jobs == 1:
        loaded = [load(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            loaded = list(pool.map(load, paths))
    for stem, img, err in loaded:
        if err is None:
            images[stem] = img
        else:
            failures.append((stem, err))
    return images, failures


def _write_report(
    report: metrics.MetricReport, fmt: str, stream, config_echo: dict | None = None
) -> None:
    if fmt == "csv":
        # fixed dialect: comma, dot decimal, LF, no comment lines (so no
        # config echo here; it goes to the JSON format and the diagnostics)
        stream.write("image," + ",".join(report.metrics) + "\n")
        for name, row in report.rows.items():
            stream.write(
                name + "," + ",".join(repr(float(row[m])) for m in report.metrics) + "\n"
            )
        stream.write(
            "AGGREGATE,"
            + ",".join(repr(float(report.aggregates[m])) for m in report.metrics)
            + "\n"
        )
    else:
        payload = {
            "metrics": report.metrics,
            "rows": [{"image": name, **row} for name, row in report.rows.items()],
            "aggregate": report.aggregates,
            "skipped": [list(item) for item in report.skipped],
            "notes": report.notes,
        }
        if config_echo is not None:
            payload["config"] = config_echo
        stream.write(json.dumps(payload, indent=2) + "\n")


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    w = _quality_weights(args, config)
    jobs = int(_pick(args, config, "jobs", 1))
    fmt = _pick(args, config, "format", "csv")
    if fmt not in ("csv", "json"):
        raise ParameterError(f"format must be csv or json, got {fmt!r}")
    metric_list = _pick(args, config, "metrics", None)
    if metric_list is None:
        names = list(metrics.ALL_METRICS) if args.ref else list(metrics.NO_REFERENCE_METRICS)
    elif isinstance(metric_list, (list, tuple)):
        names = [str(m) for m in metric_list]
    else:
        names = [m.strip() for m in str(metric_list).split(",") if m.strip()]

    tests, test_failures = _load_dir(Path(args.tests), jobs)
    refs = None
    if args.ref:
        refs, ref_failures = _load_dir(Path(args.ref), jobs)
        test_failures.extend(ref_failures)
    if not tests:
        raise InputError(f"no readable images in {args.tests}")

    report = metrics.evaluate(tests, refs, names, w)
    report.skipped.extend(test_failures)

    echo = {"quality": _quality_echo(w), "metrics": names, "jobs": jobs}
    if args.output:
        with open(args.output, "w", newline="") as stream:
            _write_report(report, fmt, stream, echo)
    else:
        _write_report(report, fmt, sys.stdout, echo)

    for note in report.notes:
        print(f"evaluate: note: {note}", file=sys.stderr)
    for name, reason in report.skipped:
        print(f"evaluate: skipped {name}: {reason}", file=sys.stderr)
    return 1 if report.skipped else 0


def cmd_gradcheck(args) -> int:
    config = _load_config(args.config)
    w = _quality_weights(args, config)
    seed = int(_pick(args, config, "seed", 0))
    img = imgio.load_image(Path(args.image))
    report = gradient_report(
        img,
        component=args.component,
        samples=args.samples,
        h=args.step,
        w=w,
        seed=seed,
    )
    report["image"] = str(args.image)
    report["config"] = {"quality": _quality_echo(w), "seed": seed}
    if report["tie_free_count"] == 0:
        print(
            "gradcheck: note: no tie-free samples; the consistency check is vacuous "
            "(try more samples or a smaller --step)",
            file=sys.stderr,
        )
    text = json.dumps(report, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_weights(args) -> int:
    directory = Path(args.directory)
    if args.action == "init":
        weights = network.init_weights(int(args.seed), int(args.channel_width))
        weights_io.save_weights(weights, directory)
        inspection = weights_io.inspect_weights(directory)
        print(f"wrote {len(inspection.tensors)} tensors to {directory}")
        print(f"payload sha256 {inspection.payload_sha256}")
        return 0
    inspection = weights_io.inspect_weights(directory)
    print(f"channel_width {inspection.channel_width}")
    for name, shape, offset in inspection.tensors:
        print(f"{name}  shape={list(shape)}  offset={offset}")
    print(f"payload sha256 {inspection.payload_sha256}")
    return 0


def cmd_stats(args) -> int:
    config = _load_config(args.config)
    w = _quality_weights(args, config)
    img = imgio.load_image(Path(args.image))
    breakdown = quality_score(img, w)
    payload = {
        "image": str(args.image),
        "color": breakdown.color,
        "sharpness": breakdown.sharpness,
        "contrast": breakdown.contrast,
        "score": breakdown.score,
        "chroma_shift": breakdown.chroma_shift,
        "chroma_spread": breakdown.chroma_spread,
        "config": _quality_echo(w),
    }
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwie", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (defaults < config < flags)")
        p.add_argument("--seed", type=int, help="seed for any sampled behavior")
        p.add_argument("--jobs", type=int, help="parallel workers (default 1)")

    def add_quality(p):
        p.add_argument("--trim", type=float, help="per-tail trim fraction")
        p.add_argument("--blocks", help="block grid K1xK2 for both indices")
        p.add_argument("--alpha", type=float, help="contrast entropy scale")
        p.add_argument("--lambda-imp", dest="lambda_imp", type=float, help="balance bias")

    enhance = sub.add_parser("enhance", help="enhance one image or a directory")
    enhance.add_argument("input", help="input image or directory")
    enhance.add_argument("output", help="output directory")
    enhance.add_argument("--weights", help="weight directory for network mode")
    enhance.add_argument(
        "--fpp-only", action="store_true", help="classical post-processing only"
    )
    enhance.add_argument("--omega", type=float, help="Gaussian low-pass scale")
    enhance.add_argument("--lambda-bem", dest="lambda_bem", type=float, help="mask pivot")
    add_common(enhance)
    enhance.set_defaults(func=cmd_enhance)

    ev = sub.add_parser("evaluate", help="score a directory of images")
    ev.add_argument("tests", help="directory of images to score")
    ev.add_argument("--ref", help="directory of reference images, paired by stem")
    ev.add_argument("--metrics", help="comma list from: psnr,ssim,uiqm,uciqe")
    ev.add_argument("--format", choices=("csv", "json"), help="report format")
    ev.add_argument("-o", "--output", help="report path (default stdout)")
    add_quality(ev)
    add_common(ev)
    ev.set_defaults(func=cmd_evaluate)

    grad = sub.add_parser("gradcheck", help="finite-difference diagnostics")
    grad.add_argument("image", help="input image")
    grad.add_argument("--component", choices=COMPONENTS, default="abl")
    grad.add_argument("--samples", type=int, default=8)
    grad.add_argument("--step", type=float, default=1e-3, help="central-difference step")
    grad.add_argument("-o", "--output", help="JSON path (default stdout)")
    add_quality(grad)
    add_common(grad)
    grad.set_defaults(func=cmd_gradcheck)

    wts = sub.add_parser("weights", help="initialize or inspect weight containers")
    wts.add_argument("action", choices=("init", "inspect"))
    wts.add_argument("directory", help="weight directory")
    wts.add_argument("--seed", type=int, default=0)
    wts.add_argument("--channel-width", dest="channel_width", type=int, default=64)
    wts.set_defaults(func=cmd_weights)

    st = sub.add_parser("stats", help="quality-score breakdown for one image")
    st.add_argument("image", help="input image")
    add_quality(st)
    add_common(st)
    st.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UwieError as exc:
        print(f"uwie {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
