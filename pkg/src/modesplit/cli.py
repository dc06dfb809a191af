"""Command-line interface: simulate, synth, analyze, sweep, report-aggregate.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import os
import secrets
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from modesplit import __version__
from modesplit.analyze import AnalyzeOptions, EllipticityReport, aggregate_reports, analyze
from modesplit.errors import InputError, ModesplitError, NumericalError
from modesplit.splitting import (
    ModePair,
    frequency_splitting,
    numerical_pairs,
    pairs_csv_text,
    predict_pairs,
)
from modesplit.svgplot import Plot
from modesplit.synth import (
    Spectrum,
    SpectrumConfig,
    beam_from_dict,
    config_digest,
    convergence_from_dict,
    synthesize,
)
from modesplit.xsection import EllipseSection, ellipticity

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2
MANIFEST_SUFFIX = ".manifest.json"


# -- small utilities ----------------------------------------------------------


def parse_orders(text: str) -> list[int]:
    """``"A..B"`` (inclusive) or a single order."""
    try:
        if ".." in text:
            a, b = (int(v) for v in text.split("..", 1))
        else:
            a = b = int(text)
    except ValueError as exc:
        raise InputError(f"bad order range {text!r}; expected A..B") from exc
    if not 1 <= a <= b:
        raise InputError(f"bad order range {text!r}; need 1 <= A <= B")
    return list(range(a, b + 1))


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str | Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    return doc


def load_config(path: str | Path | None) -> tuple[dict[str, Any], int | None]:
    """Config document and the seed it pins, if any.

    A run manifest is accepted in place of a config; its embedded config and
    seed are used, which is how a run is reproduced.
    """
    if path is None:
        return {}, None
    doc = read_json(path)
    if "manifest_version" in doc:
        cfg = doc.get("config") or {}
        return cfg, doc.get("seed")
    return doc, doc.get("seed")


def resolve_seed(cli_seed: int | None, config_seed) -> int:
    if cli_seed is not None:
        seed = cli_seed
    elif config_seed is not None:
        seed = int(config_seed)
    else:
        seed = secrets.randbits(64)
    if not 0 <= seed < 2**64:
        raise InputError("seed must be an unsigned 64-bit integer")
    return seed


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int | None
    inputs: list[str]
    outputs: list[str]
    config: dict[str, Any]
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    manifest_version: int = 1

    def write(self, path: str | Path) -> None:
        atomic_write(path, json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def manifest_path(out: str | Path) -> Path:
    return Path(str(out) + MANIFEST_SUFFIX)


# -- simulate -----------------------------------------------------------------


@dataclass
class SimulateSpec:
    """Parsed simulate config.

    ``ellipticities`` rebuilds the section for each value keeping the major
    semi-axis of ``beam``; without it the beam's own section is used.
    """

    doc: dict[str, Any]
    orders: list[int]

    @property
    def numerical(self) -> bool:
        solver = self.doc.get("solver", "analytic")
        if solver not in ("analytic", "numerical"):
            raise InputError(f"solver must be 'analytic' or 'numerical', got {solver!r}")
        return solver == "numerical"

    def beams(self):
        beam = beam_from_dict(self.doc["beam"])
        eps_list = self.doc.get("ellipticities")
        if not eps_list:
            return [(ellipticity(beam.section), beam)]
        return [(float(e), beam.with_section(EllipseSection.from_major(beam.section.r1, float(e))))
                for e in eps_list]


def simulate_pairs(doc: dict[str, Any], orders: list[int]) -> list[tuple[float, list[ModePair]]]:
    spec = SimulateSpec(doc, orders)
    try:
        beams = spec.beams()
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid simulate config: {exc!r}") from exc
    conv = doc.get("convergence")
    out = []
    for eps, beam in beams:
        if spec.numerical:
            grid = doc.get("grid_points")
            wanted = set(orders)
            pairs = [p for p in numerical_pairs(beam, max(orders), grid) if p.order in wanted]
        else:
            model = None
            if conv is not None:
                model = convergence_from_dict({**conv, "epsilon": ellipticity(beam.section)})
            pairs = predict_pairs(beam, orders, model)
        out.append((eps, pairs))
    return out


def simulate_csv(results: list[tuple[float, list[ModePair]]]) -> str:
    if len(results) == 1:
        return pairs_csv_text(results[0][1])
    text = ""
    for i, (eps, pairs) in enumerate(results):
        chunk = pairs_csv_text(pairs, {"ellipticity": f"{eps:.6f}"})
        text += chunk if i == 0 else chunk.split("\n", 1)[1]
    return text


def simulate_svgs(results, out: Path) -> list[Path]:
    ratio = Plot(title="Frequency ratio by order", xlabel="mode order n", ylabel="f_high / f_low")
    split = Plot(title="Frequency splitting by order", xlabel="mode order n", ylabel="splitting (Hz)")
    for eps, pairs in results:
        n = [p.order for p in pairs]
        ratio.add(n, [p.ratio for p in pairs], label=f"eps = {eps:.4f}", markers=True)
        split.add(n, [frequency_splitting(p) for p in pairs], label=f"eps = {eps:.4f}", markers=True)
    paths = [out.with_name(out.stem + "_ratio.svg"), out.with_name(out.stem + "_splitting.svg")]
    atomic_write(paths[0], ratio.to_svg())
    atomic_write(paths[1], split.to_svg())
    return paths


def cmd_simulate(args) -> int:
    doc, _ = load_config(args.config)
    if "beam" not in doc:
        raise InputError("simulate config needs a 'beam' entry")
    orders = parse_orders(args.orders or doc.get("orders", "1..40"))
    results = simulate_pairs(doc, orders)
    out = Path(args.out or "pairs.csv")
    atomic_write(out, simulate_csv(results))
    outputs = [str(out)]
    if args.svg:
        outputs += [str(p) for p in simulate_svgs(results, out)]
    resolved = {**doc, "orders": f"{orders[0]}..{orders[-1]}"}
    RunManifest("simulate", config_digest(resolved), None, [str(args.config)] if args.config else [],
                outputs, resolved).write(manifest_path(out))
    return EXIT_OK


# -- synth --------------------------------------------------------------------


def cmd_synth(args) -> int:
    doc, pinned = load_config(args.config)
    seed = resolve_seed(args.seed, pinned)
    cfg = SpectrumConfig.from_dict({**doc, "seed": seed})
    spectrum = synthesize(cfg)
    out = Path(args.out or "spectrum.csv")
    atomic_write(out, spectrum.to_csv_text())
    resolved = cfg.to_dict()
    RunManifest("synth", cfg.digest(), seed, [str(args.config)] if args.config else [], [str(out)],
                {**resolved, "metadata": spectrum.metadata}).write(manifest_path(out))
    return EXIT_OK


# -- analyze ------------------------------------------------------------------


def options_from_dict(doc: dict[str, Any]) -> AnalyzeOptions:
    known = AnalyzeOptions.__dataclass_fields__
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise InputError(f"unknown analyze options: {unknown}")
    try:
        return AnalyzeOptions(**doc)
    except TypeError as exc:
        raise InputError(str(exc)) from exc


def analyze_svgs(report: EllipticityReport, out: Path) -> list[Path]:
    rows = report.pairs
    used = [r for r in rows if r.used]
    below = [r for r in rows if not r.used]
    ratio = Plot(title="Frequency ratio by order", xlabel="mode order n", ylabel="f_high / f_low")
    if below:
        ratio.add([r.order for r in below], [r.ratio for r in below], label="below cutoff", markers=True)
    if used:
        ratio.add([r.order for r in used], [r.ratio for r in used], label="used", markers=True)
    if report.epsilon is not None and rows:
        n = [rows[0].order, rows[-1].order]
        ratio.add(n, [report.epsilon] * 2, label="plateau")
    split = Plot(title="Frequency splitting by order", xlabel="mode order n", ylabel="splitting (Hz)")
    split.add([r.order for r in rows], [r.delta for r in rows], markers=True)
    paths = [out.with_name(out.stem + "_ratio.svg"), out.with_name(out.stem + "_splitting.svg")]
    atomic_write(paths[0], ratio.to_svg())
    atomic_write(paths[1], split.to_svg())
    return paths


def cmd_analyze(args) -> int:
    if not args.spectrum:
        raise InputError("analyze needs a spectrum CSV")
    src = Path(args.spectrum)
    if not src.exists():
        raise InputError(f"{src}: no such file")
    try:
        spectrum = Spectrum.read_csv(src)
    except ValueError as exc:
        raise InputError(f"{src}: {exc}") from exc
    doc, _ = load_config(args.config)
    options = options_from_dict(doc)
    report = analyze(spectrum, options)
    out = Path(args.out or src.with_name(src.stem + "_report.json"))
    atomic_write(out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    table = out.with_name(out.stem + "_orders.csv")
    report.write_order_csv(table)
    outputs = [str(out), str(table)]
    if args.svg and report.pairs:
        outputs += [str(p) for p in analyze_svgs(report, out)]
    resolved = asdict(options)
    RunManifest("analyze", config_digest(resolved), None, [str(src)], outputs,
                resolved).write(manifest_path(out))
    if report.status.startswith("failed"):
        print(f"analysis failed ({report.status}); partial report in {out}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# -- sweep --------------------------------------------------------------------


def set_dotted(doc: dict[str, Any], path: str, value) -> None:
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def grid_points(grid: dict[str, list]) -> list[dict[str, Any]]:
    if not grid:
        return [{}]
    keys = sorted(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise InputError(f"sweep grid entry {k!r} must be a non-empty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _run_point(task: tuple[str, dict[str, Any], dict[str, Any], list[int] | None, dict, int | None]):
    """One sweep point; returns (point, rows, error). Runs in worker processes."""
    mode, base, point, orders, options, seed = task
    doc = copy.deepcopy(base)
    for k, v in point.items():
        set_dotted(doc, k, v)
    try:
        if mode == "simulate":
            rows = []
            for eps, pairs in simulate_pairs(doc, orders):
                rows += [{"ellipticity": f"{eps:.6f}", "order": p.order, "f_low_hz": f"{p.f_low:.3f}",
                          "f_high_hz": f"{p.f_high:.3f}", "delta_hz": f"{frequency_splitting(p):.3f}",
                          "ratio": f"{p.ratio:.6f}"} for p in pairs]
            return point, rows, None, None
        cfg = SpectrumConfig.from_dict({**doc, "seed": seed})
        report = analyze(synthesize(cfg), options_from_dict(options))
        row = {"seed": seed, "status": report.status,
               "epsilon": _num(report.epsilon, ".8f"), "sigma_epsilon": _num(report.sigma_epsilon, ".3e"),
               "theta_deg": _num(report.theta_deg, ".3f"), "sigma_theta_deg": _num(report.sigma_theta_deg, ".3f"),
               "cutoff": report.cutoff if report.cutoff is not None else "",
               "pairs_used": report.pairs_used if report.pairs_used is not None else ""}
        return point, [row], None, report.to_dict()
    except ModesplitError as exc:
        return point, [], f"{type(exc).__name__}: {exc}", None


def _num(v, fmt):
    return "" if v is None else format(v, fmt)


def _sort_key(point: dict[str, Any]):
    return tuple((k, (0, v) if isinstance(v, (int, float)) else (1, str(v))) for k, v in sorted(point.items()))


def cmd_sweep(args) -> int:
    doc, pinned = load_config(args.config)
    mode = doc.get("mode", "simulate")
    if mode not in ("simulate", "roundtrip"):
        raise InputError(f"sweep mode must be 'simulate' or 'roundtrip', got {mode!r}")
    base = doc.get("base")
    if not isinstance(base, dict):
        raise InputError("sweep config needs a 'base' config object")
    points = grid_points(doc.get("grid") or {})
    options = doc.get("analyze") or {}
    if mode == "roundtrip":
        options_from_dict(options)  # fail early on bad options
        seeds = doc.get("seeds")
        if seeds is None:
            n = int(doc.get("samples", 1))
            first = resolve_seed(args.seed, pinned)
            seeds = [(first + i) % 2**64 for i in range(n)]
        tasks = [(mode, base, p, None, options, int(s)) for p in points for s in seeds]
    else:
        orders = parse_orders(args.orders or doc.get("orders") or base.get("orders", "1..40"))
        tasks = [(mode, base, p, orders, options, None) for p in points]

    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]

    out = Path(args.out or "sweep")
    out.mkdir(parents=True, exist_ok=True)
    keys = sorted(points[0]) if points else []
    rows, failures, reports = [], [], []
    order = sorted(range(len(results)), key=lambda i: (_sort_key(results[i][0]), i))
    for i in order:
        point, point_rows, error, report = results[i]
        if error is not None:
            failures.append({**point, "error": error})
            rows.append({**{k: point[k] for k in keys}, "status": "error", "error": error})
        for r in point_rows:
            rows.append({**{k: point[k] for k in keys}, **r})
        if report is not None:
            reports.append(report)
            name = f"point_{i:04d}.json"
            atomic_write(out / "reports" / name, json.dumps(report, indent=2, sort_keys=True) + "\n")
    columns = list(keys)
    for r in rows:
        columns += [c for c in r if c not in columns]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    table = out / "sweep.csv"
    atomic_write(table, buf.getvalue())
    outputs = [str(table)]
    if reports:
        agg = aggregate_reports([EllipticityReport.from_dict(r) for r in reports if r.get("epsilon") is not None]) \
            if any(r.get("epsilon") is not None for r in reports) else {}
        atomic_write(out / "aggregate.json", json.dumps(agg, indent=2, sort_keys=True) + "\n")
        outputs.append(str(out / "aggregate.json"))
    if failures:
        atomic_write(out / "failures.json", json.dumps(failures, indent=2, sort_keys=True) + "\n")
        outputs.append(str(out / "failures.json"))
    RunManifest("sweep", config_digest(doc), None, [str(args.config)] if args.config else [],
                outputs, doc).write(out / ("sweep" + MANIFEST_SUFFIX))
    print(f"{len(tasks)} runs, {len(failures)} failed; table in {table}")
    return EXIT_OK


# -- report-aggregate -----------------------------------------------------------


def cmd_report_aggregate(args) -> int:
    if not args.reports:
        raise InputError("report-aggregate needs at least one report JSON")
    reports = []
    for path in args.reports:
        try:
            reports.append(EllipticityReport.from_dict(read_json(path)))
        except (TypeError, KeyError) as exc:
            raise InputError(f"{path}: not a report ({exc!r})") from exc
    agg = aggregate_reports(reports)
    text = json.dumps(agg, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        atomic_write(out, text)
        RunManifest("report-aggregate", config_digest(agg), None, [str(p) for p in args.reports],
                    [str(out)], {}).write(manifest_path(out))
    sys.stdout.write(text)
    if args.svg and args.out:
        eps = [r.epsilon for r in reports if r.epsilon is not None]
        n = list(range(1, len(eps) + 1))
        plot = Plot(title="Ellipticity by sample", xlabel="sample", ylabel="epsilon")
        plot.add(n, eps, label="samples", markers=True)
        plot.add(n, [agg["epsilon_mean"]] * len(n), label="mean")
        for sgn in (1, -1):
            plot.add(n, [agg["epsilon_mean"] + sgn * agg["epsilon_std"]] * len(n), color="#2ca02c")
        atomic_write(Path(args.out).with_suffix(".svg"), plot.to_svg())
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modesplit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False, orders=False, jobs=False):
        p.add_argument("--config", help="config JSON (or a run manifest to reproduce)")
        p.add_argument("--out", help="output path")
        p.add_argument("--svg", action="store_true", help="also write SVG plots")
        if seed:
            p.add_argument("--seed", type=_u64, help="RNG seed (U64); drawn from entropy if absent")
        if orders:
            p.add_argument("--orders", help="order range A..B")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        return p

    p = common(sub.add_parser("simulate", help="mode-pair table from beam theory"), orders=True)
    p.set_defaults(func=cmd_simulate)
    p = common(sub.add_parser("synth", help="synthetic spectrum"), seed=True)
    p.set_defaults(func=cmd_synth)
    p = common(sub.add_parser("analyze", help="ellipticity report from a spectrum CSV"))
    p.add_argument("spectrum", nargs="?", help="spectrum CSV (frequency_hz,psd)")
    p.set_defaults(func=cmd_analyze)
    p = common(sub.add_parser("sweep", help="parameter grid of simulate or round-trip runs"),
               seed=True, orders=True, jobs=True)
    p.set_defaults(func=cmd_sweep)
    p = common(sub.add_parser("report-aggregate", help="mean and spread of epsilon over reports"))
    p.add_argument("reports", nargs="*", help="report JSON files")
    p.set_defaults(func=cmd_report_aggregate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
