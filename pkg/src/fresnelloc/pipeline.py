"""End-to-end processing chains shared by the CLI and the test harness."""

from __future__ import annotations

import numpy as np

from .geometry import SPEED_OF_LIGHT, TWO_PI
from .localize import LocationEstimate, SensingArea, track
from .pathfit import (
    DEFAULT_FOLD_MAX,
    FitResult,
    InsufficientObservationsError,
    fit_path_length_bidirectional,
)
from .phase import (
    PhaseOffsetMatrix,
    WindowConfig,
    apply_calibration,
    compute_all_pairs,
    observations_for_slice,
    window_end_indices,
)
from .simulate import CsiSeries

# When the base window holds less than a full fluctuation cycle (slow
# radial motion relative to this link), retry with longer windows sharing
# the same center; slow dynamics are exactly the ones that stay coherent
# over the longer span.
ESCALATION_SCALES = (1, 2, 4)


def estimate_path_lengths(
    series: CsiSeries,
    config: WindowConfig,
    matrix: PhaseOffsetMatrix | None = None,
    fold_max: int = DEFAULT_FOLD_MAX,
    scales: tuple[int, ...] = ESCALATION_SCALES,
) -> list[FitResult]:
    """Per-window reflected path lengths for one link's trace.

    Fits are labelled with the base window's end time; escalated windows
    share the base window's center so fits from different links stay
    comparable. Windows without enough usable pairs at any scale are
    skipped; low-confidence fits are kept but flagged.
    """
    w = config.window_samples
    fits: list[FitResult] = []
    for end_idx in window_end_indices(series.n_samples, config):
        label_time = series.start_time + end_idx / series.sample_rate
        fallback: FitResult | None = None
        for scale in scales:
            length = scale * (w - 1) + 1
            start = end_idx - (w + length - 2) // 2
            if start < 0 or start + length > series.n_samples:
                continue
            obs = observations_for_slice(series, start, length, label_time)
            if matrix is not None:
                obs = apply_calibration(obs, matrix)
            try:
                fit = fit_path_length_bidirectional(obs, series.link, series.subcarriers, fold_max)
            except InsufficientObservationsError:
                continue
            if fit.ok:
                fits.append(fit)
                fallback = None
                break
            if fallback is None or fit.rms_residual < fallback.rms_residual:
                fallback = fit
        if fallback is not None:
            fits.append(fallback)
    return fits


def localize_series(
    series_list: list[CsiSeries],
    config: WindowConfig,
    area: SensingArea,
    matrix: PhaseOffsetMatrix | None = None,
    fold_max: int = DEFAULT_FOLD_MAX,
) -> list[LocationEstimate]:
    """Full chain for two or more links sharing a sample clock."""
    if len(series_list) < 2:
        raise ValueError("localization needs at least 2 links")
    fits = [estimate_path_lengths(s, config, matrix, fold_max) for s in series_list]
    links = [s.link for s in series_list]
    return track(fits, links, series_list[0].subcarriers, area)


def window_count(series: CsiSeries, config: WindowConfig) -> int:
    return len(window_end_indices(series.n_samples, config))


def single_gap_path_lengths(
    series: CsiSeries,
    config: WindowConfig,
    gap_index: int,
    matrix: PhaseOffsetMatrix | None = None,
) -> list[tuple[float, list[float]]]:
    """Per-window path lengths inverted pair-by-pair at one fixed gap.

    Each pair's wrapped phase gap is inverted directly into a path length
    under the outward-motion sign convention (no fold handling, no
    cross-gap fitting); used to compare fixed-gap groups against the full
    fit on a known outward sweep. Returns (window_end_time, d_hat values).
    """
    freqs = series.subcarriers.freqs
    link = series.link
    out: list[tuple[float, list[float]]] = []
    for end_idx in window_end_indices(series.n_samples, config):
        end_time = series.start_time + end_idx / series.sample_rate
        obs = compute_all_pairs(series, config, end_time)
        if matrix is not None:
            obs = apply_calibration(obs, matrix)
        d_hats: list[float] = []
        for o in obs:
            a, b = o.pair
            if b - a != gap_index or o.quality <= 0.0:
                continue
            gap_hz = freqs[b] - freqs[a]
            excess = o.phase_diff * SPEED_OF_LIGHT / (TWO_PI * gap_hz)
            d_hats.append(link.d0 + excess)
        if d_hats:
            out.append((end_time, d_hats))
    return out
