"""Command-line front end: ``resample``, ``bench``, ``pyramid`` and ``synth``.

Exit codes are uniform: 0 success, 1 runtime failure, 2 usage error.

Benchmark config files are flat ``key = value`` lines; ``#`` starts a
comment and list values are comma separated::

    scenes     = thin-lines:64:0.8:0, point-targets:64:0.8:1
    methods    = nn, bl, cc, kd16, hybrid, adaptive
    scale      = 2
    bins       = 256
    seed       = 0
    output_dir = bench_out

A scene is ``kind:size[:contrast[:seed]]`` (contrast defaults to 0.8, seed
to the config ``seed``).  Optional keys: ``levels``, ``a``, ``beta``,
``boundary``, ``window``, ``threshold``, and the network template
``cnn_A`` / ``cnn_B`` (nine row-major values each), ``cnn_z``, ``cnn_h``,
``cnn_max_iters``, ``cnn_tol``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import context, metrics, pyramid, raster, resampler
from .context import CnnTemplate
from .kernels import Boundary, Kernel, KernelSpec
from .raster import GridTransform, SceneSpec
from .resampler import Adaptive, Classic, HybridPyramid

log = logging.getLogger("cnnresample")

METHOD_NAMES = ("nn", "bl", "cc", "kd16", "bspline", "hybrid", "adaptive", "hybrid-adaptive")
CSV_HEADER = ("scene", "method", "correlation", "entropy_deviation", "avg_diff_error",
              "max_diff", "signed_mean", "error")


class UsageError(Exception):
    """Bad command-line or config input (exit status 2)."""


@dataclass(frozen=True)
class MethodOptions:
    levels: int = 3
    a: float = -0.5
    beta: float = 4.0
    window: int = 3
    threshold: float | None = context.DEFAULT_THRESHOLD
    template: CnnTemplate = field(default_factory=CnnTemplate.selection)


def make_method(name: str, opts: MethodOptions = MethodOptions()) -> resampler.MethodSpec:
    if name in ("nn", "bl", "cc", "kd16", "bspline"):
        return Classic(KernelSpec(Kernel(name), a=opts.a, beta=opts.beta))
    adaptive = Adaptive(opts.template, opts.window, opts.threshold)
    if name == "adaptive":
        return adaptive
    if name == "hybrid":
        return HybridPyramid(opts.levels)
    if name == "hybrid-adaptive":
        return HybridPyramid(opts.levels, adaptive)
    raise UsageError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")


# ---------------------------------------------------------------------------
# Benchmark config


@dataclass(frozen=True)
class BenchConfig:
    scenes: tuple[SceneSpec, ...]
    methods: tuple[str, ...]
    scale: int = 2
    bins: int = metrics.DEFAULT_BINS
    seed: int = 0
    output_dir: str = "bench_out"
    boundary: Boundary = Boundary.MIRROR
    options: MethodOptions = MethodOptions()

    def __post_init__(self):
        if not self.scenes:
            raise UsageError("config needs at least one scene")
        if not self.methods:
            raise UsageError("config needs at least one method")
        if self.scale < 2:
            raise UsageError(f"scale must be an integer >= 2, got {self.scale}")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise UsageError(f"unknown method {m!r}")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_scene(text: str, default_seed: int) -> SceneSpec:
    parts = text.split(":")
    if not 2 <= len(parts) <= 4:
        raise UsageError(f"scene must be kind:size[:contrast[:seed]], got {text!r}")
    try:
        size = int(parts[1])
        contrast = float(parts[2]) if len(parts) > 2 else 0.8
        seed = int(parts[3]) if len(parts) > 3 else default_seed
        return SceneSpec(parts[0], size, contrast, seed)
    except ValueError as exc:
        raise UsageError(f"bad scene {text!r}: {exc}") from None


def _template_values(text: str, key: str) -> np.ndarray:
    vals = [float(v) for v in _split(text)]
    if len(vals) != 9:
        raise UsageError(f"{key} needs 9 values, got {len(vals)}")
    return np.array(vals).reshape(3, 3)


def parse_config(text: str) -> BenchConfig:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value

    known = {"scenes", "methods", "scale", "bins", "seed", "output_dir", "levels", "a",
             "beta", "boundary", "window", "threshold", "cnn_A", "cnn_B", "cnn_z",
             "cnn_h", "cnn_max_iters", "cnn_tol"}
    unknown = sorted(set(entries) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    try:
        seed = int(entries.get("seed", 0))
        tpl = CnnTemplate.selection()
        changes = {}
        if "cnn_A" in entries:
            changes["A"] = _template_values(entries["cnn_A"], "cnn_A")
        if "cnn_B" in entries:
            changes["B"] = _template_values(entries["cnn_B"], "cnn_B")
        for key, conv in (("cnn_z", float), ("cnn_h", float),
                          ("cnn_max_iters", int), ("cnn_tol", float)):
            if key in entries:
                changes[key[4:]] = conv(entries[key])
        threshold = entries.get("threshold", str(context.DEFAULT_THRESHOLD))
        opts = MethodOptions(
            levels=int(entries.get("levels", 3)),
            a=float(entries.get("a", -0.5)),
            beta=float(entries.get("beta", 4.0)),
            window=int(entries.get("window", 3)),
            threshold=None if threshold.lower() == "none" else float(threshold),
            template=tpl.replace(**changes) if changes else tpl,
        )
        return BenchConfig(
            scenes=tuple(_parse_scene(s, seed) for s in _split(entries.get("scenes", ""))),
            methods=tuple(_split(entries.get("methods", ""))),
            scale=int(entries.get("scale", 2)),
            bins=int(entries.get("bins", metrics.DEFAULT_BINS)),
            seed=seed,
            output_dir=entries.get("output_dir", "bench_out"),
            boundary=Boundary(entries.get("boundary", "mirror")),
            options=opts,
        )
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from None


# ---------------------------------------------------------------------------
# Benchmark


def roundtrip(truth: raster.Raster, method: resampler.MethodSpec, scale: int,
              bp: Boundary = Boundary.MIRROR) -> raster.Raster:
    """Shrink by ``scale`` and enlarge back with the same method."""
    small_w = math.ceil(truth.width / scale)
    small_h = math.ceil(truth.height / scale)
    small = resampler.run(truth, GridTransform.scale(scale), small_w, small_h, method, bp)
    return resampler.run(small, GridTransform.scale(1.0 / scale), truth.width,
                         truth.height, method, bp)


@dataclass
class Cell:
    scene: SceneSpec
    method: str
    output: raster.Raster | None = None
    report: metrics.MetricsReport | None = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.output is None


def run_cell(cfg: BenchConfig, scene: SceneSpec, method: str) -> Cell:
    cell = Cell(scene, method)
    try:
        truth = raster.synth_scene(scene)
        out = roundtrip(truth, make_method(method, cfg.options), cfg.scale, cfg.boundary)
    except Exception as exc:  # a failing cell is reported, the run continues
        cell.error = f"{type(exc).__name__}: {exc}"
        return cell
    cell.output = out
    cell.report = metrics.report(out, truth, method, cfg.bins, lenient=True)
    if cell.report.correlation is None:
        cell.error = "correlation undefined: zero variance"
    return cell


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def csv_text(cells: list[Cell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in cells:
        r = c.report
        if r is None:
            w.writerow([c.scene.label, c.method, "", "", "", "", "", c.error])
        else:
            w.writerow([c.scene.label, c.method, _fmt(r.correlation),
                        _fmt(r.entropy_deviation), _fmt(r.avg_diff_error),
                        _fmt(r.max_diff), _fmt(r.signed_mean), c.error])
    return buf.getvalue()


def markdown_table(cells: list[Cell]) -> str:
    lines = ["| Scene | Method | Correlation | Entropy deviation | Average difference error |",
             "|---|---|---|---|---|"]
    last = None
    for c in cells:
        scene = c.scene.label if c.scene != last else ""
        last = c.scene
        if c.report is None:
            lines.append(f"| {scene} | {c.method} | error | error | error |")
            continue
        r = c.report
        corr = _fmt(r.correlation) if r.correlation is not None else "n/a"
        lines.append(f"| {scene} | {c.method} | {corr} | {_fmt(r.entropy_deviation)} "
                     f"| {_fmt(r.avg_diff_error)} |")
    return "\n".join(lines) + "\n"


def _safe(label: str) -> str:
    return label.replace(":", "_").replace("/", "_")


def run_bench(cfg: BenchConfig, jobs: int = 1) -> list[Cell]:
    """Evaluate every (scene, method) pair; results keep config order."""
    pairs = [(s, m) for s in cfg.scenes for m in cfg.methods]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda p: run_cell(cfg, *p), pairs))
    return [run_cell(cfg, s, m) for s, m in pairs]


def cmd_bench(cfg: BenchConfig, jobs: int = 1, markdown: bool = False) -> int:
    cells = run_bench(cfg, jobs)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for c in cells:
        if c.output is not None:
            raster.save(out / f"{_safe(c.scene.label)}__{c.method}.rsf", c.output)
    text = csv_text(cells)
    (out / "results.csv").write_text(text, encoding="ascii")
    if markdown:
        table = markdown_table(cells)
        (out / "results.md").write_text(table, encoding="ascii")
        sys.stdout.write(table)
    else:
        sys.stdout.write(text)
    failed = [c for c in cells if c.failed]
    for c in failed:
        log.error("cell %s / %s failed: %s", c.scene.label, c.method, c.error)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Other subcommands


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must be WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise UsageError(f"--size must be positive, got {text!r}")
    return w, h


def _output_maxval(in_path: str, requested: int | None) -> int:
    if requested is not None:
        return requested
    if str(in_path).lower().endswith((".rsf", ".rsf1", ".f32")):
        return 255
    with open(in_path, "rb") as fh:
        head = fh.read(64)
    try:
        maxval = int(raster._pgm_tokens(head, 3, 2)[0][2][0])
    except (raster.RasterFormatError, ValueError):
        return 255
    return 65535 if maxval > 255 else 255


def cmd_resample(args) -> int:
    try:
        t = GridTransform.parse(args.transform)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    w, h = _parse_size(args.size)
    opts = MethodOptions(levels=args.levels, a=args.a, beta=args.beta,
                         window=args.window, threshold=args.threshold)
    method = make_method(args.method, opts)
    img = raster.load(args.input)
    out = resampler.run(img, t, w, h, method, Boundary(args.boundary))
    raster.save(args.output, out, _output_maxval(args.input, args.maxval))
    return 0


def cmd_pyramid(args) -> int:
    img = raster.load(args.input)
    p = pyramid.build(img, args.levels)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, band in enumerate(p.bands):
        raster.save(out / f"band_{k}.rsf", band)
    raster.save(out / "residual.rsf", p.residual)
    if args.reconstruct:
        rebuilt = pyramid.reconstruct(p)
        raster.save(out / "reconstructed.rsf", rebuilt)
        err = float(np.max(np.abs(rebuilt.pixels - img.pixels)))
        print(f"max abs reconstruction error: {err:.3e}")
    return 0


def cmd_synth(args) -> int:
    spec = SceneSpec(args.kind, args.size, args.contrast, args.seed)
    raster.save(args.out, raster.synth_scene(spec))
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cnnresample",
                                description="Hybrid pyramid / CNN-adaptive raster resampling")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("resample", help="resample one raster")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", dest="output", required=True)
    r.add_argument("--method", required=True, choices=METHOD_NAMES)
    r.add_argument("--transform", required=True, help="a,b,c,d,e,f (output -> source)")
    r.add_argument("--size", required=True, help="output WxH")
    r.add_argument("--levels", type=int, default=3)
    r.add_argument("--beta", type=float, default=4.0)
    r.add_argument("--a", type=float, default=-0.5)
    r.add_argument("--boundary", choices=[b.value for b in Boundary], default="mirror")
    r.add_argument("--window", type=int, default=3)
    r.add_argument("--threshold", type=float, default=context.DEFAULT_THRESHOLD)
    r.add_argument("--maxval", type=int, choices=(255, 65535), default=None,
                   help="PGM output depth (default: follow the input)")
    r.set_defaults(func=cmd_resample)

    b = sub.add_parser("bench", help="run the scene x method benchmark")
    b.add_argument("config")
    b.add_argument("--output-dir", default=None, help="override output_dir from the config")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--markdown", action="store_true", help="print a markdown table")
    b.set_defaults(func=None)

    y = sub.add_parser("pyramid", help="dump Laplacian pyramid levels as RSF1")
    y.add_argument("--in", dest="input", required=True)
    y.add_argument("--levels", type=int, required=True)
    y.add_argument("--out-dir", required=True)
    y.add_argument("--reconstruct", action="store_true")
    y.set_defaults(func=cmd_pyramid)

    s = sub.add_parser("synth", help="write a synthetic scene")
    s.add_argument("--kind", required=True, choices=raster.SCENE_KINDS)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--contrast", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "bench":
            try:
                with open(args.config, encoding="utf-8") as fh:
                    cfg = parse_config(fh.read())
            except OSError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
            if args.output_dir is not None:
                cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
            return cmd_bench(cfg, args.jobs, args.markdown)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
