"""Command-line front end: simulate / calibrate / localize / evaluate / plotdata.

Configuration comes from a JSON file mirroring RunConfig; every subcommand
is deterministic given the config plus the seed. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .geometry import LinkGeometry, Point2D, SubcarrierSet
from .localize import SensingArea, localization_error
from .pathfit import DEFAULT_FOLD_MAX
from .phase import CalibrationError, WindowConfig, MIN_WINDOW_SAMPLES
from .pipeline import (
    estimate_path_lengths,
    localize_series,
    single_gap_path_lengths,
)
from .simulate import (
    CsiSeries,
    MultipathSpec,
    NoiseSpec,
    ReflectorSpec,
    Trajectory,
    free_space_multipath,
    make_trajectory,
    random_multipath,
    simulate_multipath,
)
from .traceio import (
    TraceFile,
    TraceFormatError,
    read_calibration,
    read_estimates,
    read_trace,
    write_calibration,
    write_estimates,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

WINDOW_SWEEP_SECONDS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)

GAP_GROUPS = (1, 15, 29)

CDF_STEP = 0.05


class ConfigError(ValueError):
    """Invalid configuration file or command-line combination."""


class DataError(ValueError):
    """Inconsistent or unusable input data."""


@dataclass
class RunConfig:
    """Validated run configuration, with paper-style defaults."""

    seed: int = 0
    sample_rate: float = 500.0
    subcarriers: SubcarrierSet = field(
        default_factory=lambda: SubcarrierSet(5.745e9, 1.25e6, 30)
    )
    links: list[LinkGeometry] = field(
        default_factory=lambda: [LinkGeometry(Point2D(0.0, 0.0), Point2D(4.0, 0.0))]
    )
    trajectory_spec: dict = field(
        default_factory=lambda: {
            "kind": "perpendicular_bisector_sweep",
            "link_index": 0,
            "start_offset": 1.0308,
            "end_offset": 3.9192,
            "speed": 1.8,
        }
    )
    reflector: ReflectorSpec = field(default_factory=ReflectorSpec)
    multipath_spec: dict | None = None
    noise_sigma: float = 0.0
    window: WindowConfig = field(default_factory=WindowConfig)
    fold_max: int = DEFAULT_FOLD_MAX
    area: SensingArea = field(default_factory=lambda: SensingArea(0.0, 6.0, 0.0, 6.0))

    def build_trajectory(self) -> Trajectory:
        spec = dict(self.trajectory_spec)
        kind = spec.pop("kind")
        if kind == "perpendicular_bisector_sweep":
            idx = int(spec.pop("link_index", 0))
            if not 0 <= idx < len(self.links):
                raise ConfigError(f"trajectory link_index {idx} out of range")
            spec["link"] = self.links[idx]
        for key in ("start", "end", "corner"):
            if key in spec:
                spec[key] = tuple(float(v) for v in spec[key])
        try:
            return make_trajectory(kind, **spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad trajectory: {exc}") from exc

    def build_multipath(self) -> MultipathSpec | None:
        spec = self.multipath_spec
        if spec is None:
            return None
        if "static_amp" in spec:
            return MultipathSpec(
                np.asarray(spec["static_amp"], dtype=float),
                np.asarray(spec["static_phase"], dtype=float),
            )
        return random_multipath(
            self.subcarriers,
            int(spec.get("n_paths", 4)),
            int(spec.get("seed", self.seed + 17)),
        )


def load_config(path: str | None, seed_override: int | None = None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    cfg = RunConfig()
    try:
        if "seed" in raw:
            cfg.seed = int(raw["seed"])
        if "sample_rate" in raw:
            cfg.sample_rate = float(raw["sample_rate"])
            if cfg.sample_rate <= 0:
                raise ConfigError("sample_rate must be positive")
        if "subcarriers" in raw:
            s = raw["subcarriers"]
            cfg.subcarriers = SubcarrierSet(
                float(s["center_freq"]), float(s["spacing"]), int(s["count"])
            )
        if "links" in raw:
            cfg.links = [
                LinkGeometry(
                    Point2D(float(l["tx"][0]), float(l["tx"][1])),
                    Point2D(float(l["rx"][0]), float(l["rx"][1])),
                )
                for l in raw["links"]
            ]
            if not cfg.links:
                raise ConfigError("links must not be empty")
        if "trajectory" in raw:
            cfg.trajectory_spec = dict(raw["trajectory"])
        if "reflector" in raw:
            r = raw["reflector"]
            cfg.reflector = ReflectorSpec(
                float(r.get("reflection_gain", 0.5)),
                float(r.get("path_loss_exponent", 0.0)),
            )
        if "multipath" in raw:
            cfg.multipath_spec = raw["multipath"]
        if "noise" in raw and raw["noise"] is not None:
            cfg.noise_sigma = float(raw["noise"].get("amplitude_sigma", 0.0))
            if cfg.noise_sigma < 0:
                raise ConfigError("noise sigma must be >= 0")
        if "window" in raw:
            w = raw["window"]
            cfg.window = WindowConfig(int(w.get("samples", 25)), int(w.get("hop", 25)))
        if "fold_max" in raw:
            cfg.fold_max = int(raw["fold_max"])
            if cfg.fold_max < 0:
                raise ConfigError("fold_max must be >= 0")
        if "area" in raw:
            a = raw["area"]
            cfg.area = SensingArea(
                float(a["min_x"]), float(a["max_x"]), float(a["min_y"]), float(a["max_y"])
            )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    if seed_override is not None:
        cfg.seed = seed_override
    return cfg


def _simulate_scenario(cfg: RunConfig) -> list[TraceFile]:
    trajectory = cfg.build_trajectory()
    multipath = cfg.build_multipath()
    traces = []
    for i, link in enumerate(cfg.links):
        noise = NoiseSpec(cfg.noise_sigma, seed=cfg.seed + 1000 * i)
        series = simulate_multipath(
            link,
            cfg.subcarriers,
            trajectory,
            cfg.reflector,
            multipath if multipath is not None else free_space_multipath(cfg.subcarriers),
            noise,
            sample_rate=cfg.sample_rate,
        )
        traces.append(TraceFile(series=series, truth=trajectory, multipath=multipath is not None))
    return traces


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed)
    traces = _simulate_scenario(cfg)
    os.makedirs(args.out, exist_ok=True)
    for i, trace in enumerate(traces):
        path = os.path.join(args.out, f"link_{i:02d}.fpt")
        write_trace(path, trace)
        print(path)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    from .phase import estimate_offsets

    cfg = load_config(args.config, args.seed)
    trace = read_trace(args.trace)
    if trace.truth is None:
        raise DataError(f"{args.trace} carries no ground-truth trajectory")
    matrix = estimate_offsets(trace.series, trace.truth, cfg.window)
    write_calibration(args.out, matrix)
    print(args.out)
    return EXIT_OK


def cmd_localize(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed)
    if len(args.trace) < 2:
        raise ConfigError("localization needs at least 2 trace files")
    traces = [read_trace(p) for p in args.trace]
    first = traces[0].series
    for p, t in zip(args.trace, traces):
        s = t.series
        if s.sample_rate != first.sample_rate or s.subcarriers != first.subcarriers:
            raise DataError(f"{p}: sample rate or subcarrier set differs across traces")
        if s.start_time != first.start_time:
            raise DataError(f"{p}: traces are not time-aligned")
    matrix = None
    if args.calib is not None:
        matrix = read_calibration(args.calib)
        if matrix.subcarriers != first.subcarriers:
            raise DataError(f"{args.calib}: calibration subcarriers differ from traces")
    elif any(t.multipath for t in traces):
        raise ConfigError("multipath-flagged traces require --calib")
    estimates = localize_series(
        [t.series for t in traces], cfg.window, cfg.area, matrix, cfg.fold_max
    )
    write_estimates(args.out, estimates)
    print(f"{args.out}: {len(estimates)} estimates")
    return EXIT_OK


def _paired_errors(estimates_path: str, truth_path: str) -> list[float]:
    estimates = read_estimates(estimates_path)
    trace = read_trace(truth_path)
    if trace.truth is None:
        raise DataError(f"{truth_path} carries no ground-truth trajectory")
    truth = trace.truth
    errors = []
    slack = 0.5
    for e in estimates:
        if not truth.start_time - slack <= e.time <= truth.end_time + slack:
            raise DataError(
                f"estimate at t={e.time} outside truth span "
                f"[{truth.start_time}, {truth.end_time}]"
            )
        px, py = truth.positions_at(np.asarray([e.time]))[0]
        errors.append(localization_error(e.position, Point2D(float(px), float(py))))
    return errors


def cmd_evaluate(args: argparse.Namespace) -> int:
    if len(args.estimates) != len(args.truth):
        raise ConfigError("need one --truth per --estimates")
    per_path = [_paired_errors(e, t) for e, t in zip(args.estimates, args.truth)]
    pooled = [v for errs in per_path for v in errs]
    if not pooled:
        raise DataError("no estimates to evaluate")

    lines = ["# fresnelloc evaluation report"]
    lines.append(f"paths {len(per_path)}")
    lines.append(f"estimates {len(pooled)}")
    lines.append(f"median_error_m {np.median(pooled):.6f}")
    for i, errs in enumerate(per_path):
        med = np.median(errs) if errs else math.nan
        lines.append(f"path {i} estimates {len(errs)} median_error_m {med:.6f}")
    lines.append("# cdf: fraction error_m")
    qs = np.arange(0.0, 1.0 + 1e-9, CDF_STEP)
    for q, v in zip(qs, np.quantile(pooled, qs)):
        lines.append(f"{q:.2f} {v:.6f}")
    report = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(report)
    sys.stdout.write(report)
    return EXIT_OK


def _heatmap_table(cfg: RunConfig) -> str:
    """Noiseless free-space amplitude heatmap over the configured sweep."""
    trajectory = cfg.build_trajectory()
    link = cfg.links[0]
    series = simulate_multipath(
        link,
        cfg.subcarriers,
        trajectory,
        cfg.reflector,
        free_space_multipath(cfg.subcarriers),
        NoiseSpec(0.0, 0),
        sample_rate=cfg.sample_rate,
    )
    d_hat = trajectory.path_lengths_at(series.sample_times(), link)
    lines = ["# rows: d_hat then one row per subcarrier (freq_hz followed by amplitudes)"]
    lines.append("d_hat\t" + "\t".join(f"{v:.6f}" for v in d_hat))
    for k, freq in enumerate(cfg.subcarriers.freqs):
        amps = "\t".join(f"{v:.6f}" for v in series.amplitudes[k])
        lines.append(f"{freq:.0f}\t{amps}")
    return "\n".join(lines) + "\n"


def _truth_d_hat_at(series: CsiSeries, truth: Trajectory, window: WindowConfig, times: np.ndarray) -> np.ndarray:
    half = (window.window_samples - 1) / (2.0 * series.sample_rate)
    return truth.path_lengths_at(times - half, series.link)


def _window_sweep_table(cfg: RunConfig) -> str:
    """Median path-length error of the full pipeline per window size."""
    trace = _simulate_scenario(cfg)[0]
    series, truth = trace.series, trace.truth
    lines = ["# window_size_s\teffective_samples\tn_windows\tmedian_abs_dhat_error_m"]
    for size in WINDOW_SWEEP_SECONDS:
        w = max(MIN_WINDOW_SAMPLES, int(round(size * cfg.sample_rate)))
        window = WindowConfig(w, w)
        fits = [f for f in estimate_path_lengths(series, window, fold_max=cfg.fold_max) if f.ok]
        if fits:
            times = np.array([f.window_end_time for f in fits])
            d_true = _truth_d_hat_at(series, truth, window, times)
            errs = np.abs(np.array([f.d_hat for f in fits]) - d_true)
            med = float(np.median(errs))
        else:
            med = math.nan
        lines.append(f"{size}\t{w}\t{len(fits)}\t{med:.6f}")
    return "\n".join(lines) + "\n"


def _gap_group_table(cfg: RunConfig) -> str:
    """Median path-length error of fixed-gap groups vs the full fit."""
    trace = _simulate_scenario(cfg)[0]
    series, truth = trace.series, trace.truth
    window = cfg.window
    lines = ["# group\tn_values\tmedian_abs_dhat_error_m"]
    for gap in GAP_GROUPS:
        all_errs: list[float] = []
        for end_time, d_hats in single_gap_path_lengths(series, window, gap):
            d_true = float(_truth_d_hat_at(series, truth, window, np.asarray([end_time]))[0])
            all_errs.extend(abs(d - d_true) for d in d_hats)
        med = float(np.median(all_errs)) if all_errs else math.nan
        lines.append(f"gap_{gap}\t{len(all_errs)}\t{med:.6f}")
    fits = [f for f in estimate_path_lengths(series, window, fold_max=cfg.fold_max) if f.ok]
    times = np.array([f.window_end_time for f in fits])
    d_true = _truth_d_hat_at(series, truth, window, times)
    errs = np.abs(np.array([f.d_hat for f in fits]) - d_true)
    med = float(np.median(errs)) if len(errs) else math.nan
    lines.append(f"full\t{len(errs)}\t{med:.6f}")
    return "\n".join(lines) + "\n"


def cmd_plotdata(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    outputs = {
        "heatmap.tsv": _heatmap_table(cfg),
        "window_sweep.tsv": _window_sweep_table(cfg),
        "gap_groups.tsv": _gap_group_table(cfg),
    }
    for name, content in outputs.items():
        path = os.path.join(args.out, name)
        with open(path, "w", encoding="ascii") as fh:
            fh.write(content)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fresnelloc",
        description="Device-free localization toolkit on multicarrier amplitude traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize one trace file per link")
    p_sim.add_argument("--config", help="JSON run configuration")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="estimate static phase offsets")
    p_cal.add_argument("--config", help="JSON run configuration")
    p_cal.add_argument("--seed", type=int)
    p_cal.add_argument("--trace", required=True, help="calibration trace with ground truth")
    p_cal.add_argument("--out", required=True, help="calibration file to write")
    p_cal.set_defaults(func=cmd_calibrate)

    p_loc = sub.add_parser("localize", help="track a target from >= 2 traces")
    p_loc.add_argument("--config", help="JSON run configuration")
    p_loc.add_argument("--seed", type=int)
    p_loc.add_argument("--trace", action="append", default=[], help="trace file (repeat)")
    p_loc.add_argument("--calib", help="calibration file")
    p_loc.add_argument("--out", required=True, help="estimates file to write")
    p_loc.set_defaults(func=cmd_localize)

    p_eval = sub.add_parser("evaluate", help="score estimates against ground truth")
    p_eval.add_argument("--estimates", action="append", default=[], required=True)
    p_eval.add_argument("--truth", action="append", default=[], help="trace with ground truth")
    p_eval.add_argument("--out", help="write the report here as well as stdout")
    p_eval.set_defaults(func=cmd_evaluate)

    p_plot = sub.add_parser("plotdata", help="emit figure data tables")
    p_plot.add_argument("--config", help="JSON run configuration")
    p_plot.add_argument("--seed", type=int)
    p_plot.add_argument("--out", required=True, help="output directory")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, TraceFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CalibrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
