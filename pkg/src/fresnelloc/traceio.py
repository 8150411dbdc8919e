"""Self-describing file formats: amplitude traces, offset matrices, estimates.

Traces carry their own subcarrier set, link geometry and optional ground
truth so a pipeline can never be run against mismatched metadata. Headers
are plain text with repr-exact floats; trace bodies are little-endian
binary records of a uint32 sample index followed by K float32 amplitudes.
All writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .geometry import LinkGeometry, Point2D, SubcarrierSet
from .localize import LocationEstimate
from .phase import PhaseOffsetMatrix
from .simulate import CsiSeries, Trajectory

TRACE_MAGIC = "fpmtrace"
CALIB_MAGIC = "fpmcalib"
ESTIMATES_MAGIC = "fpmest"
FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    """Malformed or inconsistent trace/calibration/estimates file."""


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fpm-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f(x: float) -> str:
    return repr(float(x))


@dataclass(eq=False)
class TraceFile:
    """A CSI series plus optional ground-truth trajectory and a multipath
    marker set by the simulator."""

    series: CsiSeries
    truth: Trajectory | None = None
    multipath: bool = False


def write_trace(path: str, trace: TraceFile) -> None:
    s = trace.series
    lines = [
        f"{TRACE_MAGIC} {FORMAT_VERSION}",
        f"sample_rate {_f(s.sample_rate)}",
        f"start_time {_f(s.start_time)}",
        f"n_samples {s.n_samples}",
        f"subcarriers {_f(s.subcarriers.center_freq)} {_f(s.subcarriers.spacing)} {s.subcarriers.count}",
        f"link {_f(s.link.tx.x)} {_f(s.link.tx.y)} {_f(s.link.rx.x)} {_f(s.link.rx.y)}",
        f"multipath {int(trace.multipath)}",
    ]
    if trace.truth is not None:
        lines.append(f"truth_samples {len(trace.truth.times)}")
        for t, (x, y) in zip(trace.truth.times, trace.truth.positions):
            lines.append(f"truth {_f(t)} {_f(x)} {_f(y)}")
    lines.append("end_header")
    header = ("\n".join(lines) + "\n").encode("ascii")

    k = s.subcarriers.count
    rec = np.empty(s.n_samples, dtype=[("idx", "<u4"), ("amp", "<f4", (k,))])
    rec["idx"] = np.arange(s.n_samples, dtype=np.uint32)
    rec["amp"] = s.amplitudes.T.astype("<f4")
    _atomic_write(path, header + rec.tobytes())


def read_trace(path: str) -> TraceFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        header_end = raw.index(b"end_header\n")
    except ValueError:
        raise TraceFormatError(f"{path}: missing end_header")
    header = raw[:header_end].decode("ascii").splitlines()
    body = raw[header_end + len(b"end_header\n") :]

    if not header or header[0].split() != [TRACE_MAGIC, str(FORMAT_VERSION)]:
        raise TraceFormatError(f"{path}: not a version-{FORMAT_VERSION} trace file")

    fields: dict[str, list[str]] = {}
    truth_rows: list[tuple[float, float, float]] = []
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "truth":
            truth_rows.append((float(parts[1]), float(parts[2]), float(parts[3])))
        else:
            fields[parts[0]] = parts[1:]
    try:
        sample_rate = float(fields["sample_rate"][0])
        start_time = float(fields["start_time"][0])
        n_samples = int(fields["n_samples"][0])
        cf, sp, cnt = fields["subcarriers"]
        subc = SubcarrierSet(float(cf), float(sp), int(cnt))
        lx = [float(v) for v in fields["link"]]
        link = LinkGeometry(Point2D(lx[0], lx[1]), Point2D(lx[2], lx[3]))
        multipath = bool(int(fields.get("multipath", ["0"])[0]))
    except (KeyError, ValueError, IndexError) as exc:
        raise TraceFormatError(f"{path}: bad header field ({exc})") from exc

    k = subc.count
    rec_dtype = np.dtype([("idx", "<u4"), ("amp", "<f4", (k,))])
    if len(body) != n_samples * rec_dtype.itemsize:
        raise TraceFormatError(
            f"{path}: body has {len(body)} bytes, expected {n_samples * rec_dtype.itemsize}"
        )
    rec = np.frombuffer(body, dtype=rec_dtype)
    if not np.array_equal(rec["idx"], np.arange(n_samples, dtype=np.uint32)):
        raise TraceFormatError(f"{path}: sample indices are not contiguous")
    series = CsiSeries(
        sample_rate=sample_rate,
        start_time=start_time,
        amplitudes=rec["amp"].T.astype(float),
        subcarriers=subc,
        link=link,
    )

    truth = None
    if "truth_samples" in fields:
        n_truth = int(fields["truth_samples"][0])
        if n_truth != len(truth_rows):
            raise TraceFormatError(f"{path}: truth_samples does not match truth rows")
        arr = np.array(truth_rows)
        truth = Trajectory(arr[:, 0], arr[:, 1:3])
    return TraceFile(series=series, truth=truth, multipath=multipath)


def write_calibration(path: str, matrix: PhaseOffsetMatrix) -> None:
    subc = matrix.subcarriers
    lines = [
        f"{CALIB_MAGIC} {FORMAT_VERSION}",
        f"subcarriers {_f(subc.center_freq)} {_f(subc.spacing)} {subc.count}",
        f"matrix {subc.count}",
    ]
    for row in matrix.offsets:
        lines.append(" ".join(_f(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_calibration(path: str) -> PhaseOffsetMatrix:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].split() != [CALIB_MAGIC, str(FORMAT_VERSION)]:
        raise TraceFormatError(f"{path}: not a version-{FORMAT_VERSION} calibration file")
    try:
        _, cf, sp, cnt = lines[1].split()
        subc = SubcarrierSet(float(cf), float(sp), int(cnt))
        k = int(lines[2].split()[1])
        rows = [[float(v) for v in lines[3 + i].split()] for i in range(k)]
    except (ValueError, IndexError) as exc:
        raise TraceFormatError(f"{path}: bad calibration content ({exc})") from exc
    return PhaseOffsetMatrix(np.array(rows), subc)


def write_estimates(path: str, estimates: list[LocationEstimate]) -> None:
    lines = [
        f"# {ESTIMATES_MAGIC} {FORMAT_VERSION}",
        "# time_s x_m y_m residual_m contributing_links",
    ]
    for e in estimates:
        lines.append(
            f"{_f(e.time)} {_f(e.position.x)} {_f(e.position.y)} "
            f"{_f(e.residual)} {e.contributing_links}"
        )
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_estimates(path: str) -> list[LocationEstimate]:
    out: list[LocationEstimate] = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                t, x, y, r, n = line.split()
                out.append(
                    LocationEstimate(
                        position=Point2D(float(x), float(y)),
                        time=float(t),
                        residual=float(r),
                        contributing_links=int(n),
                    )
                )
            except ValueError as exc:
                raise TraceFormatError(f"{path}: bad estimate line {line!r}") from exc
    return out
