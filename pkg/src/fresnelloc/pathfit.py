"""Recover the reflected path length from calibrated phase-gap observations.

The true phase gap grows linearly with the frequency gap, passing through
the origin, but observations arrive wrapped modulo 2*pi: at wide gaps the
cloud of points folds into zig-zag branches. The fitter tries a bounded
number of fold hypotheses, assigns each frequency gap a branch that is
monotone in the gap, and keeps the hypothesis with the smallest weighted
residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    LinkGeometry,
    SPEED_OF_LIGHT,
    SubcarrierSet,
    TWO_PI,
    theoretical_phase_diff,
)
from .phase import PhaseDiffObservation, wrap_pm_pi, wrap_two_pi

MIN_OBSERVATIONS = 10

MIN_DISTINCT_GAPS = 5

# RMS residual (radians) above which a fit is flagged low-confidence and
# skipped by the localizer; roughly half a zone of phase.
LOW_CONFIDENCE_RMS = 0.8

DEFAULT_FOLD_MAX = 3

_MAX_REFIT_ROUNDS = 16


class InsufficientObservationsError(ValueError):
    """Too few usable observations (or too few distinct gaps) to fit."""


@dataclass(frozen=True)
class FitResult:
    """One window's fitted reflected path length.

    slope is the phase gap per Hz of frequency gap; d_hat derives from it.
    ok is False when the residual exceeds the low-confidence threshold.
    """

    d_hat: float
    slope: float
    fold_count: int
    rms_residual: float
    n_observations: int
    window_end_time: float
    ok: bool


def _circular_mean(phases: np.ndarray, weights: np.ndarray) -> float:
    z = np.sum(weights * np.exp(1j * phases))
    return float(wrap_two_pi(np.angle(z)))


def fit_path_length(
    obs: list[PhaseDiffObservation],
    link: LinkGeometry,
    subcarriers: SubcarrierSet,
    fold_max: int = DEFAULT_FOLD_MAX,
) -> FitResult:
    """Quality-weighted, fold-aware line fit of phase gap against frequency gap.

    Observations with zero quality are dropped up front and have no
    influence. For each fold hypothesis F in 0..fold_max, every distinct
    gap gets a branch in 0..F, non-decreasing with the gap; the slope is
    refit through the origin until the branch assignment stabilizes. The
    hypothesis with minimal weighted RMS residual wins; the slope is
    clamped non-negative since path lengths cannot undercut the LoS.
    """
    if fold_max < 0:
        raise ValueError("fold_max must be >= 0")
    usable = [o for o in obs if o.quality > 0.0]
    if len(usable) < MIN_OBSERVATIONS:
        raise InsufficientObservationsError(
            f"{len(usable)} usable observations, need >= {MIN_OBSERVATIONS}"
        )
    freqs = subcarriers.freqs
    gaps = np.array([freqs[b] - freqs[a] for a, b in (o.pair for o in usable)])
    phases = np.array([o.phase_diff for o in usable])
    weights = np.array([o.quality for o in usable]) ** 2
    end_time = max(o.window_end_time for o in usable)

    gap_vals, inverse = np.unique(gaps, return_inverse=True)
    if len(gap_vals) < MIN_DISTINCT_GAPS:
        raise InsufficientObservationsError(
            f"{len(gap_vals)} distinct gaps, need >= {MIN_DISTINCT_GAPS}"
        )

    # Per-gap circular means; individual observations are then unwrapped
    # toward their gap's mean so noise straddling 0/2*pi cannot split a gap
    # across branches.
    gap_means = np.array(
        [_circular_mean(phases[inverse == g], weights[inverse == g]) for g in range(len(gap_vals))]
    )
    adjusted = gap_means[inverse] + wrap_pm_pi(phases - gap_means[inverse])

    denom = float(np.sum(weights * gaps * gaps))
    if denom <= 0.0:
        raise InsufficientObservationsError("observations carry no weight")

    gap_max = gap_vals[-1]
    theta_max = gap_means[-1]

    best: tuple[float, float, np.ndarray] | None = None  # (rms, slope, branches)
    for hypothesis in range(fold_max + 1):
        slope = (theta_max + TWO_PI * hypothesis) / gap_max
        branches = np.zeros(len(gap_vals), dtype=int)
        for _ in range(_MAX_REFIT_ROUNDS):
            new_branches = np.rint((slope * gap_vals - gap_means) / TWO_PI).astype(int)
            new_branches = np.maximum.accumulate(np.clip(new_branches, 0, hypothesis))
            unwrapped = adjusted + TWO_PI * new_branches[inverse]
            slope = max(float(np.sum(weights * gaps * unwrapped)) / denom, 0.0)
            if np.array_equal(new_branches, branches):
                break
            branches = new_branches
        resid = adjusted + TWO_PI * branches[inverse] - slope * gaps
        rms = math.sqrt(float(np.sum(weights * resid * resid)) / float(np.sum(weights)))
        if best is None or rms < best[0] - 1e-12:
            best = (rms, slope, branches)

    rms, slope, branches = best
    d_hat = link.d0 + slope * SPEED_OF_LIGHT / TWO_PI
    return FitResult(
        d_hat=d_hat,
        slope=slope,
        fold_count=int(branches.max()),
        rms_residual=rms,
        n_observations=len(usable),
        window_end_time=end_time,
        ok=rms <= LOW_CONFIDENCE_RMS,
    )


def fit_path_length_bidirectional(
    obs: list[PhaseDiffObservation],
    link: LinkGeometry,
    subcarriers: SubcarrierSet,
    fold_max: int = DEFAULT_FOLD_MAX,
) -> FitResult:
    """Fit under both motion-direction hypotheses and keep the better one.

    A target moving toward the link produces the negated (mod 2*pi) phase
    gaps of one moving away; the path length itself is direction-free, so
    both sign hypotheses are fitted and the smaller residual wins.
    """
    forward = fit_path_length(obs, link, subcarriers, fold_max)
    flipped = [
        PhaseDiffObservation(
            o.pair, o.window_end_time, float(wrap_two_pi(-o.phase_diff)), o.quality
        )
        for o in obs
    ]
    reverse = fit_path_length(flipped, link, subcarriers, fold_max)
    return forward if forward.rms_residual <= reverse.rms_residual else reverse


def expected_max_phase(link: LinkGeometry, subcarriers: SubcarrierSet, d_hat: float) -> float:
    """Phase gap at the widest frequency gap; predicts the fold count."""
    freqs = subcarriers.freqs
    if d_hat == link.d0:
        return 0.0
    return theoretical_phase_diff(d_hat, link, float(freqs[0]), float(freqs[-1]))
