"""Shared scenario fixtures; expensive simulations are session-cached."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fresnelloc import (
    LinkGeometry,
    NoiseSpec,
    Point2D,
    ReflectorSpec,
    SubcarrierSet,
    make_trajectory,
    simulate_free_space,
)
from fresnelloc.phase import WindowConfig


def bisector_offset_for_path_length(d_hat: float, d0: float) -> float:
    """Offset from the LoS giving reflected path d_hat on the bisector."""
    return math.sqrt(d_hat * d_hat - d0 * d0) / 2.0


@pytest.fixture(scope="session")
def subc30() -> SubcarrierSet:
    return SubcarrierSet(5.745e9, 1.25e6, 30)


@pytest.fixture(scope="session")
def link4() -> LinkGeometry:
    return LinkGeometry(Point2D(0.0, 0.0), Point2D(4.0, 0.0))


@pytest.fixture(scope="session")
def link6() -> LinkGeometry:
    return LinkGeometry(Point2D(0.0, 0.0), Point2D(6.0, 0.0))


@pytest.fixture(scope="session")
def window25() -> WindowConfig:
    return WindowConfig(25, 25)


@pytest.fixture(scope="session")
def verification_sweep(link4):
    """Outward bisector sweep covering reflected paths 4.5 m to 8.8 m."""
    return make_trajectory(
        "perpendicular_bisector_sweep",
        speed=1.8,
        link=link4,
        start_offset=bisector_offset_for_path_length(4.5, link4.d0),
        end_offset=bisector_offset_for_path_length(8.8, link4.d0),
    )


@pytest.fixture(scope="session")
def sweep_series(link4, subc30, verification_sweep):
    """Noiseless free-space trace of the verification sweep."""
    return simulate_free_space(
        link4, subc30, verification_sweep, ReflectorSpec(0.5, 0.0), NoiseSpec(0.0, 0)
    )


def sweep_true_path_length(trajectory, link, times, window_samples, sample_rate=500.0):
    """Ground-truth reflected path at each window's center time."""
    centers = np.asarray(times) - (window_samples - 1) / (2.0 * sample_rate)
    return trajectory.path_lengths_at(centers, link)


def snr_sigma(series, snr_db: float) -> float:
    """Noise sigma giving the requested amplitude SNR against the
    time-varying part of a noiseless series."""
    return float(np.std(series.amplitudes)) / 10 ** (snr_db / 20.0)
