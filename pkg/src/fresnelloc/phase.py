"""Phase-gap estimation from amplitude windows, and static-offset calibration.

Per sliding window, the waveforms of two subcarriers are time-shifted
copies of one another; the shift divided by the common fluctuation period
gives their Fresnel phase gap modulo one turn. Zero-variance windows and
windows without a dominant spectral peak are flagged (returned as None /
omitted) rather than guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import LinkGeometry, SubcarrierSet, TWO_PI, theoretical_phase_diff
from .simulate import CsiSeries, Trajectory

# Window variance below this fraction of the squared mean counts as "no
# moving target": correlation and period estimates would be meaningless.
DEGENERATE_REL_VAR = 1e-12

# A spectral peak must exceed the median non-DC magnitude by this factor
# to count as a dominant periodicity.
PEAK_TO_MEDIAN_MIN = 3.0

# Pairs are only usable when the window holds at least this many cycles of
# the estimated period. Below roughly one cycle the spectral peak pins to
# the window length itself, which would scale every phase in the window by
# a common, undetectable factor.
MIN_WINDOW_CYCLES = 1.2

ZERO_PAD_FACTOR = 16

MIN_WINDOW_SAMPLES = 8

MIN_CALIB_WINDOWS_PER_PAIR = 5

MIN_CALIB_ZONE_SPAN = 10


class CalibrationError(RuntimeError):
    """Raised when a calibration trace cannot support offset estimation."""


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window shape: length and hop, both in samples."""

    window_samples: int = 25
    hop_samples: int = 25

    def __post_init__(self) -> None:
        if self.window_samples < MIN_WINDOW_SAMPLES:
            raise ValueError(f"window must be >= {MIN_WINDOW_SAMPLES} samples")
        if not 1 <= self.hop_samples <= self.window_samples:
            raise ValueError("hop must be in [1, window_samples]")

    @property
    def default_max_shift(self) -> int:
        return self.window_samples // 2 - 1


@dataclass(frozen=True)
class PhaseDiffObservation:
    """Measured phase gap for one subcarrier pair in one window.

    pair holds (a, b) with a < b (b is the higher frequency); phase_diff is
    wrapped to [0, 2*pi); quality is the peak correlation, clipped to [0, 1].
    """

    pair: tuple[int, int]
    window_end_time: float
    phase_diff: float
    quality: float

    def __post_init__(self) -> None:
        a, b = self.pair
        if not a < b:
            raise ValueError("pair must satisfy a < b")
        if not 0.0 <= self.phase_diff < TWO_PI:
            raise ValueError("phase_diff must lie in [0, 2*pi)")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError("quality must lie in [0, 1]")


@dataclass(eq=False)
class PhaseOffsetMatrix:
    """Antisymmetric K x K matrix of static-multipath phase offsets."""

    offsets: np.ndarray
    subcarriers: SubcarrierSet

    def __post_init__(self) -> None:
        self.offsets = np.asarray(self.offsets, dtype=float)
        k = self.subcarriers.count
        if self.offsets.shape != (k, k):
            raise ValueError("offset matrix must be K x K")
        if np.any(np.abs(np.diag(self.offsets)) > 1e-9):
            raise ValueError("offset matrix diagonal must be zero")
        skew = wrap_pm_pi(self.offsets + self.offsets.T)
        if np.any(np.abs(skew) > 1e-6):
            raise ValueError("offset matrix must be antisymmetric modulo 2*pi")


def wrap_two_pi(x):
    """Wrap angles into [0, 2*pi)."""
    return np.mod(x, TWO_PI)


def wrap_pm_pi(x):
    """Wrap angles into [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi


def _is_degenerate(x: np.ndarray) -> bool:
    m = float(np.mean(x))
    return float(np.var(x)) <= DEGENERATE_REL_VAR * m * m + 1e-300


def _normalized_segments(win: np.ndarray, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows demeaned and scaled so a plain dot product is a Pearson r."""
    seg = win[:, lo:hi]
    seg = seg - seg.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(seg * seg, axis=1))
    ok = norm > 1e-30
    seg = np.where(ok[:, None], seg / np.where(ok, norm, 1.0)[:, None], 0.0)
    return seg, ok


def _lag_correlations(win_a: np.ndarray, win_b: np.ndarray, max_shift: int) -> np.ndarray:
    """corr[l + max_shift, i, j] = Pearson(win_a[i, t], win_b[j, t + l]).

    Invalid entries (zero variance in an overlap segment) are set to -2 so
    they can never win the peak search.
    """
    w = win_a.shape[1]
    n_lags = 2 * max_shift + 1
    out = np.full((n_lags, win_a.shape[0], win_b.shape[0]), -2.0)
    for lag in range(0, max_shift + 1):
        a_seg, a_ok = _normalized_segments(win_a, 0, w - lag)
        b_seg, b_ok = _normalized_segments(win_b, lag, w)
        r = a_seg @ b_seg.T
        r[~a_ok, :] = -2.0
        r[:, ~b_ok] = -2.0
        out[max_shift + lag] = r
        if lag > 0:
            # Pearson(a[t], b[t - lag]) equals Pearson(b[t], a[t + lag]).
            a_seg2, a_ok2 = _normalized_segments(win_a, lag, w)
            b_seg2, b_ok2 = _normalized_segments(win_b, 0, w - lag)
            r2 = b_seg2 @ a_seg2.T
            r2[~b_ok2, :] = -2.0
            r2[:, ~a_ok2] = -2.0
            out[max_shift - lag] = r2.T
    return out


def _refine_peaks(corr: np.ndarray, max_shift: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-sample peak location (in samples, signed) and peak value.

    corr has shape (n_lags, ...); a parabola through the peak and its two
    neighbours refines the integer argmax, except at the search boundary.
    """
    idx = np.argmax(corr, axis=0)
    peak = np.take_along_axis(corr, idx[None, ...], axis=0)[0]
    shift = idx.astype(float) - max_shift

    inner = (idx > 0) & (idx < corr.shape[0] - 1)
    if np.any(inner):
        left = np.take_along_axis(corr, np.maximum(idx - 1, 0)[None, ...], axis=0)[0]
        right = np.take_along_axis(corr, np.minimum(idx + 1, corr.shape[0] - 1)[None, ...], axis=0)[0]
        denom = left - 2.0 * peak + right
        safe = inner & (np.abs(denom) > 1e-15) & (left > -1.5) & (right > -1.5)
        delta = np.where(safe, 0.5 * (left - right) / np.where(safe, denom, 1.0), 0.0)
        delta = np.clip(delta, -1.0, 1.0)
        shift = shift + delta
    return shift, peak


def estimate_time_shift(
    series_a: np.ndarray,
    series_b: np.ndarray,
    sample_rate: float,
    max_shift: int | None = None,
) -> tuple[float, float] | None:
    """Delay of series_b relative to series_a, in seconds, with peak Pearson
    correlation. Positive when series_b's waveform occurs later. Returns
    None when either window is flat (no moving target).
    """
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("both windows must be 1-D and the same length")
    w = len(a)
    if max_shift is None:
        max_shift = w // 2 - 1
    if not 1 <= max_shift < w / 2:
        raise ValueError("max_shift must be in [1, w/2)")
    if _is_degenerate(a) or _is_degenerate(b):
        return None
    corr = _lag_correlations(a[None, :], b[None, :], max_shift)[:, 0, 0]
    if np.max(corr) <= -1.5:
        return None
    shift, peak = _refine_peaks(corr[:, None], max_shift)
    return float(shift[0]) / sample_rate, float(np.clip(peak[0], -1.0, 1.0))


def estimate_period(series: np.ndarray, sample_rate: float) -> float | None:
    """Dominant fluctuation period of one amplitude window, in seconds.

    Mean removal, a Hann taper and heavy zero padding sharpen the discrete
    spectrum; the non-DC magnitude peak is refined by quadratic
    interpolation. Returns None when no dominant periodicity exists.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < MIN_WINDOW_SAMPLES:
        raise ValueError(f"window must be 1-D with >= {MIN_WINDOW_SAMPLES} samples")
    if _is_degenerate(x):
        return None
    w = len(x)
    # Periodic Hann (the DFT-matched variant) keeps the spectral peak of a
    # short tone within a fraction of a bin of its true location.
    tapered = (x - x.mean()) * np.hanning(w + 1)[:-1]
    n_fft = ZERO_PAD_FACTOR * w
    mags = np.abs(np.fft.rfft(tapered, n_fft))
    if len(mags) < 4:
        return None
    body = mags[1:]
    k = int(np.argmax(body)) + 1
    peak = mags[k]
    if peak <= PEAK_TO_MEDIAN_MIN * float(np.median(body)):
        return None
    delta = 0.0
    if 1 < k < len(mags) - 1:
        denom = mags[k - 1] - 2.0 * mags[k] + mags[k + 1]
        if abs(denom) > 1e-30:
            delta = float(np.clip(0.5 * (mags[k - 1] - mags[k + 1]) / denom, -1.0, 1.0))
    f_peak = (k + delta) * sample_rate / n_fft
    if f_peak <= 0.0:
        return None
    return 1.0 / f_peak


def raw_phase_diff(delta_t: float, period: float) -> float:
    """Phase gap implied by a time shift: 2*pi*delta_t/period in [0, 2*pi)."""
    if period <= 0.0:
        raise ValueError("period must be positive")
    return float(wrap_two_pi(TWO_PI * delta_t / period))


def window_end_indices(n_samples: int, config: WindowConfig) -> np.ndarray:
    """End indices of every full window on the hop grid."""
    first = config.window_samples - 1
    if first >= n_samples:
        return np.array([], dtype=int)
    return np.arange(first, n_samples, config.hop_samples)


def _window_observations(
    win: np.ndarray,
    sample_rate: float,
    end_time: float,
    max_shift: int,
) -> list[PhaseDiffObservation]:
    """All-pairs observations for one (K, w) window of amplitudes."""
    k = win.shape[0]
    valid = np.array([not _is_degenerate(win[i]) for i in range(k)])
    if not np.any(valid):
        return []
    window_duration = win.shape[1] / sample_rate
    periods = np.full(k, np.nan)
    for i in range(k):
        if valid[i]:
            p = estimate_period(win[i], sample_rate)
            if p is not None and p * MIN_WINDOW_CYCLES <= window_duration:
                periods[i] = p

    corr = _lag_correlations(win, win, max_shift)
    shifts, peaks = _refine_peaks(corr, max_shift)

    out: list[PhaseDiffObservation] = []
    for a in range(k - 1):
        if not valid[a] or not np.isfinite(periods[a]):
            continue
        for b in range(a + 1, k):
            if not valid[b] or peaks[b, a] <= -1.5:
                continue
            # Delay of the lower-frequency waveform relative to the higher
            # one; positive for outward motion, matching the sign of the
            # theoretical phase gap. The period comes from the lower
            # frequency subcarrier of the pair.
            delta_t = shifts[b, a] / sample_rate
            phase = raw_phase_diff(delta_t, periods[a])
            quality = float(np.clip(peaks[b, a], 0.0, 1.0))
            out.append(PhaseDiffObservation((a, b), end_time, phase, quality))
    return out


def observations_for_slice(
    series: CsiSeries,
    start_idx: int,
    n_samples: int,
    label_time: float,
    max_shift: int | None = None,
) -> list[PhaseDiffObservation]:
    """Observations for an explicit sample slice, labelled with label_time."""
    if start_idx < 0 or start_idx + n_samples > series.n_samples:
        raise ValueError("window is not fully inside the series")
    if n_samples < MIN_WINDOW_SAMPLES:
        raise ValueError(f"window must span >= {MIN_WINDOW_SAMPLES} samples")
    if max_shift is None:
        max_shift = n_samples // 2 - 1
    win = series.amplitudes[:, start_idx : start_idx + n_samples]
    return _window_observations(win, series.sample_rate, label_time, max_shift)


def compute_all_pairs(
    series: CsiSeries,
    config: WindowConfig,
    t0: float,
    max_shift: int | None = None,
) -> list[PhaseDiffObservation]:
    """Observations for the window ending at time t0, one per usable pair.

    Degenerate pairs (flat amplitude or no dominant period) are omitted; a
    static scene therefore yields an empty list.
    """
    w = config.window_samples
    if max_shift is None:
        max_shift = config.default_max_shift
    end_idx = int(round((t0 - series.start_time) * series.sample_rate))
    if end_idx < w - 1 or end_idx >= series.n_samples:
        raise ValueError("window is not fully inside the series")
    end_time = series.start_time + end_idx / series.sample_rate
    return observations_for_slice(series, end_idx - w + 1, w, end_time, max_shift)


def estimate_offsets(
    calib_series: CsiSeries,
    calib_trajectory: Trajectory,
    config: WindowConfig,
) -> PhaseOffsetMatrix:
    """Static phase-offset matrix from a trace with known target motion.

    Per window and pair, the offset sample is the measured phase gap minus
    the gap a free-space target at the known path length would produce;
    samples are aggregated with a circular mean. The trajectory must sweep
    enough zones for the gaps to be informative.
    """
    link = calib_series.link
    subc = calib_series.subcarriers
    freqs = subc.freqs

    d_ends = calib_trajectory.path_lengths_at(
        np.asarray([calib_trajectory.start_time, calib_trajectory.end_time]), link
    )
    d_all = calib_trajectory.path_lengths_at(calib_trajectory.times, link)
    span_zones = (d_all.max() - d_all.min()) / (float(np.mean(subc.wavelengths)) / 2.0)
    if span_zones < MIN_CALIB_ZONE_SPAN:
        raise CalibrationError(
            f"calibration trajectory spans {span_zones:.1f} zones, "
            f"need >= {MIN_CALIB_ZONE_SPAN}"
        )
    del d_ends

    k = subc.count
    acc = np.zeros((k, k), dtype=complex)
    counts = np.zeros((k, k), dtype=int)
    half_window = (config.window_samples - 1) / (2.0 * calib_series.sample_rate)
    dt = max(half_window / 2.0, 1.0 / calib_series.sample_rate)

    for end_idx in window_end_indices(calib_series.n_samples, config):
        end_time = calib_series.start_time + end_idx / calib_series.sample_rate
        t_center = end_time - half_window
        obs = compute_all_pairs(calib_series, config, end_time)
        if not obs:
            continue
        d_c, d_lo, d_hi = calib_trajectory.path_lengths_at(
            np.asarray([t_center, t_center - dt, t_center + dt]), link
        )
        direction = math.copysign(1.0, d_hi - d_lo)
        for o in obs:
            a, b = o.pair
            phase = o.phase_diff if direction > 0 else wrap_two_pi(-o.phase_diff)
            theory = theoretical_phase_diff(d_c, link, freqs[a], freqs[b])
            eps = phase - wrap_two_pi(theory)
            acc[a, b] += np.exp(1j * eps)
            counts[a, b] += 1

    iu = np.triu_indices(k, 1)
    min_count = int(counts[iu].min()) if len(iu[0]) else 0
    if min_count < MIN_CALIB_WINDOWS_PER_PAIR:
        raise CalibrationError(
            f"only {min_count} valid windows for the worst pair, "
            f"need >= {MIN_CALIB_WINDOWS_PER_PAIR}"
        )

    offsets = np.zeros((k, k))
    upper = np.angle(acc[iu])
    offsets[iu] = upper
    offsets[(iu[1], iu[0])] = -upper
    return PhaseOffsetMatrix(offsets, subc)


def apply_calibration(
    obs: list[PhaseDiffObservation], matrix: PhaseOffsetMatrix
) -> list[PhaseDiffObservation]:
    """Subtract the static offsets from each observation's phase gap."""
    k = matrix.subcarriers.count
    out = []
    for o in obs:
        a, b = o.pair
        if b >= k:
            raise ValueError(f"pair {o.pair} not covered by a {k} x {k} offset matrix")
        phase = float(wrap_two_pi(o.phase_diff - matrix.offsets[a, b]))
        out.append(replace(o, phase_diff=phase))
    return out
