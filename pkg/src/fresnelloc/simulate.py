"""Forward channel model: per-subcarrier CSI amplitude for a moving reflector.

The received amplitude on each subcarrier is the magnitude of a static
vector (LoS plus any static multipath) summed with a dynamic vector
reflected off the target. The dynamic vector rotates by one turn per
wavelength of reflected-path change, which is what every downstream
estimate keys on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    LinkGeometry,
    Point2D,
    SubcarrierSet,
    TWO_PI,
    reflected_path_lengths,
)

SPEED_RANGE = (0.1, 3.0)  # m/s, plausible walking/plate-moving speeds

TRAJECTORY_POINT_RATE = 100.0  # Hz, >= 50 so linear resampling is benign


@dataclass(frozen=True)
class ReflectorSpec:
    """Magnitude model of the reflected (dynamic) signal component.

    reflection_gain is the relative dynamic magnitude at d_hat = d0;
    path_loss_exponent controls decay as (d0/d_hat)**exponent.
    """

    reflection_gain: float = 0.5
    path_loss_exponent: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.reflection_gain <= 1.0:
            raise ValueError("reflection_gain must be in (0, 1]")
        if self.path_loss_exponent < 0.0:
            raise ValueError("path_loss_exponent must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise on amplitude, with a fixed seed."""

    amplitude_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.amplitude_sigma < 0.0:
            raise ValueError("amplitude_sigma must be >= 0")


@dataclass(eq=False)
class MultipathSpec:
    """Per-subcarrier static vector: magnitude and phase offset."""

    static_amp: np.ndarray
    static_phase: np.ndarray

    def __post_init__(self) -> None:
        self.static_amp = np.asarray(self.static_amp, dtype=float)
        self.static_phase = np.asarray(self.static_phase, dtype=float)
        if self.static_amp.shape != self.static_phase.shape or self.static_amp.ndim != 1:
            raise ValueError("static_amp and static_phase must be 1-D and equal length")
        if np.any(self.static_amp < 0.0):
            raise ValueError("static magnitudes must be >= 0")


def free_space_multipath(subcarriers: SubcarrierSet) -> MultipathSpec:
    """Degenerate multipath: unit static magnitude, zero phase offset."""
    k = subcarriers.count
    return MultipathSpec(np.ones(k), np.zeros(k))


def random_multipath(
    subcarriers: SubcarrierSet,
    n_paths: int,
    seed: int,
    amp_range: tuple[float, float] = (0.15, 0.45),
    excess_range: tuple[float, float] = (1.0, 8.0),
) -> MultipathSpec:
    """Static vector from `n_paths` random reflectors added to the LoS.

    Each path gets a random magnitude, a random excess length (which makes
    its phase rotate across the band) and a random initial phase, so the
    resulting per-subcarrier offsets vary smoothly with frequency the way a
    static room does.
    """
    if n_paths < 1:
        raise ValueError("need at least one static path")
    rng = np.random.default_rng(seed)
    amps = rng.uniform(*amp_range, size=n_paths)
    lengths = rng.uniform(*excess_range, size=n_paths)
    phases0 = rng.uniform(0.0, TWO_PI, size=n_paths)
    freqs = subcarriers.freqs
    static = np.ones(subcarriers.count, dtype=complex)
    for a, ell, p0 in zip(amps, lengths, phases0):
        static += a * np.exp(1j * (TWO_PI * freqs * ell / 299_792_458.0 + p0))
    return MultipathSpec(np.abs(static), -np.angle(static))


@dataclass(eq=False)
class Trajectory:
    """Timestamped 2D positions, strictly increasing in time."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("trajectory needs at least 2 samples")
        if self.positions.shape != (len(self.times), 2):
            raise ValueError("positions must be (N, 2)")
        if not np.all(np.diff(self.times) > 0.0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.times)) or not np.all(np.isfinite(self.positions)):
            raise ValueError("trajectory samples must be finite")

    @property
    def start_time(self) -> float:
        return float(self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def path_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.positions, axis=0).T)))

    def positions_at(self, t: np.ndarray) -> np.ndarray:
        """Linearly interpolated positions, shape (len(t), 2)."""
        t = np.asarray(t, dtype=float)
        x = np.interp(t, self.times, self.positions[:, 0])
        y = np.interp(t, self.times, self.positions[:, 1])
        return np.column_stack([x, y])

    def path_lengths_at(self, t: np.ndarray, link: LinkGeometry) -> np.ndarray:
        return reflected_path_lengths(self.positions_at(t), link)


@dataclass(eq=False)
class CsiSeries:
    """Per-subcarrier amplitude time series at a fixed sample rate."""

    sample_rate: float
    start_time: float
    amplitudes: np.ndarray  # (K, N)
    subcarriers: SubcarrierSet
    link: LinkGeometry

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be positive")
        if self.amplitudes.ndim != 2 or self.amplitudes.shape[1] < 1:
            raise ValueError("amplitudes must be (K, N) with N >= 1")
        if self.amplitudes.shape[0] != self.subcarriers.count:
            raise ValueError("row count must equal the subcarrier count")
        if np.any(self.amplitudes < 0.0):
            raise ValueError("amplitudes must be >= 0")

    @property
    def n_samples(self) -> int:
        return self.amplitudes.shape[1]

    def sample_times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_samples) / self.sample_rate


def dynamic_amplitude(d_hat: float, link: LinkGeometry, reflector: ReflectorSpec) -> float:
    """Relative magnitude of the reflected component at path length d_hat."""
    excess = d_hat - link.d0
    if excess < -1e-9 * link.d0:
        raise ValueError(f"d_hat={d_hat} is below the LoS length d0={link.d0}")
    d_hat = max(d_hat, link.d0)
    return reflector.reflection_gain * (link.d0 / d_hat) ** reflector.path_loss_exponent


def simulate_multipath(
    link: LinkGeometry,
    subcarriers: SubcarrierSet,
    trajectory: Trajectory,
    reflector: ReflectorSpec,
    multipath: MultipathSpec,
    noise: NoiseSpec,
    sample_rate: float = 500.0,
) -> CsiSeries:
    """Synthesize amplitudes for a target moving through a static scene.

    The trajectory is resampled to `sample_rate` by linear position
    interpolation; per subcarrier k and sample t the amplitude is
    |static_k + dyn(t) * exp(j*(phase_k(t) + offset_k))| plus AWGN,
    clamped at zero.
    """
    if len(multipath.static_amp) != subcarriers.count:
        raise ValueError("multipath arrays must match the subcarrier count")
    duration = trajectory.end_time - trajectory.start_time
    n = int(math.floor(duration * sample_rate)) + 1
    t = trajectory.start_time + np.arange(n) / sample_rate
    d_hat = trajectory.path_lengths_at(t, link)

    excess = np.maximum(d_hat - link.d0, 0.0)
    dyn = reflector.reflection_gain * (link.d0 / np.maximum(d_hat, link.d0)) ** reflector.path_loss_exponent

    freqs = subcarriers.freqs[:, None]
    phases = TWO_PI * excess[None, :] * freqs / 299_792_458.0 + multipath.static_phase[:, None]
    static = multipath.static_amp[:, None]
    power = static**2 + dyn[None, :] ** 2 + 2.0 * static * dyn[None, :] * np.cos(phases)
    amps = np.sqrt(np.maximum(power, 0.0))

    if noise.amplitude_sigma > 0.0:
        rng = np.random.default_rng(noise.seed)
        amps = amps + rng.normal(0.0, noise.amplitude_sigma, size=amps.shape)
        amps = np.maximum(amps, 0.0)

    return CsiSeries(
        sample_rate=sample_rate,
        start_time=trajectory.start_time,
        amplitudes=amps,
        subcarriers=subcarriers,
        link=link,
    )


def simulate_free_space(
    link: LinkGeometry,
    subcarriers: SubcarrierSet,
    trajectory: Trajectory,
    reflector: ReflectorSpec,
    noise: NoiseSpec,
    sample_rate: float = 500.0,
) -> CsiSeries:
    """Free-space special case: unit static vector, no phase offsets."""
    return simulate_multipath(
        link,
        subcarriers,
        trajectory,
        reflector,
        free_space_multipath(subcarriers),
        noise,
        sample_rate=sample_rate,
    )


def _polyline_trajectory(
    vertices: np.ndarray, speed: float, stride_hz: float, stride_depth: float
) -> Trajectory:
    seg = np.diff(vertices, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    if total <= 0.0:
        raise ValueError("trajectory path has zero length")
    if not SPEED_RANGE[0] <= speed <= SPEED_RANGE[1]:
        raise ValueError(f"speed must be within {SPEED_RANGE} m/s, got {speed}")
    if stride_hz < 0.0 or not 0.0 <= stride_depth < 1.0:
        raise ValueError("stride_hz must be >= 0 and stride_depth in [0, 1)")

    def arc_at(t: np.ndarray) -> np.ndarray:
        if stride_hz > 0.0 and stride_depth > 0.0:
            wobble = stride_depth / (TWO_PI * stride_hz) * (1.0 - np.cos(TWO_PI * stride_hz * t))
            return speed * (t + wobble)
        return speed * t

    # Duration such that the (possibly stride-modulated) arc length covers
    # the whole path; solved on a fine grid since arc_at is monotone.
    t_hi = total / speed + 1.0
    grid = np.linspace(0.0, t_hi, 20001)
    duration = float(np.interp(total, arc_at(grid), grid))
    n = int(math.ceil(duration * TRAJECTORY_POINT_RATE)) + 1
    times = np.linspace(0.0, duration, n)
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.clip(arc_at(times), 0.0, total)
    x = np.interp(s, arc, vertices[:, 0])
    y = np.interp(s, arc, vertices[:, 1])
    return Trajectory(times, np.column_stack([x, y]))


def make_trajectory(
    kind: str,
    *,
    speed: float = 1.0,
    stride_hz: float = 0.0,
    stride_depth: float = 0.0,
    **params,
) -> Trajectory:
    """Trajectory of a named shape at nominally constant speed.

    Kinds and their keyword parameters:
      linear / diagonal: start=(x, y), end=(x, y)
      rectangle: corner=(x, y), width, height  (counterclockwise loop)
      perpendicular_bisector_sweep: link, start_offset, end_offset
        (signed offsets from the LoS midpoint along the bisector)

    stride_hz/stride_depth optionally superimpose a periodic speed
    oscillation (human gait): instantaneous speed is
    speed * (1 + stride_depth * sin(2*pi*stride_hz*t)).
    """
    if kind in ("linear", "diagonal"):
        start = np.asarray(params["start"], dtype=float)
        end = np.asarray(params["end"], dtype=float)
        vertices = np.vstack([start, end])
    elif kind == "rectangle":
        cx, cy = (float(v) for v in params["corner"])
        w = float(params["width"])
        h = float(params["height"])
        if w <= 0.0 or h <= 0.0:
            raise ValueError("rectangle needs positive width and height")
        vertices = np.array(
            [[cx, cy], [cx + w, cy], [cx + w, cy + h], [cx, cy + h], [cx, cy]]
        )
    elif kind == "perpendicular_bisector_sweep":
        link: LinkGeometry = params["link"]
        a = float(params["start_offset"])
        b = float(params["end_offset"])
        p0 = link.bisector_point(a)
        p1 = link.bisector_point(b)
        vertices = np.array([[p0.x, p0.y], [p1.x, p1.y]])
    else:
        raise ValueError(f"unknown trajectory kind: {kind!r}")
    return _polyline_trajectory(vertices, speed, stride_hz, stride_depth)


def stationary_trajectory(p: Point2D, duration: float) -> Trajectory:
    """Target that does not move; useful for degenerate-scene tests."""
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    return Trajectory(np.array([0.0, duration]), np.array([[p.x, p.y], [p.x, p.y]]))
