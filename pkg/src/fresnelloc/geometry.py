"""Fresnel zone geometry and closed-form phase identities for one link.

A link is a transmitter/receiver pair in a 2D horizontal plane. The
elliptical Fresnel zones around the pair are indexed from 1 outwards;
the n-th zone boundary is the locus where the reflected path exceeds
the line-of-sight length by n half-wavelengths. Wavelengths are always
derived from frequency via the vacuum speed of light so the two can
never drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

TWO_PI = 2.0 * math.pi

# Relative slack when checking d_hat >= d0, so that points computed to lie
# exactly on the LoS segment are not rejected by float rounding.
_EXCESS_TOL = 1e-9


@dataclass(frozen=True)
class Point2D:
    """A point in the horizontal plane, in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class LinkGeometry:
    """One transmitter/receiver pair; the LoS length d0 is derived."""

    tx: Point2D
    rx: Point2D

    def __post_init__(self) -> None:
        if self.tx.distance_to(self.rx) <= 0.0:
            raise ValueError("tx and rx must not coincide")

    @property
    def d0(self) -> float:
        return self.tx.distance_to(self.rx)

    def midpoint(self) -> Point2D:
        return Point2D((self.tx.x + self.rx.x) / 2.0, (self.tx.y + self.rx.y) / 2.0)

    def bisector_point(self, offset: float) -> Point2D:
        """Point at signed `offset` from the LoS midpoint, along the
        normal obtained by rotating the tx->rx direction +90 degrees."""
        dx = self.rx.x - self.tx.x
        dy = self.rx.y - self.tx.y
        d = math.hypot(dx, dy)
        mid = self.midpoint()
        return Point2D(mid.x - dy / d * offset, mid.y + dx / d * offset)

    def same_foci(self, other: "LinkGeometry") -> bool:
        """True when both links use the same (unordered) focus pair."""
        a = {(self.tx.x, self.tx.y), (self.rx.x, self.rx.y)}
        b = {(other.tx.x, other.tx.y), (other.rx.x, other.rx.y)}
        return a == b


@dataclass(frozen=True)
class SubcarrierSet:
    """K OFDM subcarrier frequencies of one channel, centered on center_freq."""

    center_freq: float
    spacing: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 2:
            raise ValueError("need at least 2 subcarriers")
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")
        if self.center_freq - (self.count - 1) / 2.0 * self.spacing <= 0.0:
            raise ValueError("lowest subcarrier frequency must be positive")

    @property
    def freqs(self) -> np.ndarray:
        """Frequencies in Hz, strictly increasing."""
        k = np.arange(self.count, dtype=float)
        return self.center_freq + (k - (self.count - 1) / 2.0) * self.spacing

    @property
    def wavelengths(self) -> np.ndarray:
        """Wavelengths in meters, strictly decreasing."""
        return SPEED_OF_LIGHT / self.freqs

    @property
    def max_gap(self) -> float:
        """Widest pairwise frequency gap, (K-1) * spacing."""
        return (self.count - 1) * self.spacing


def reflected_path_length(p: Point2D, link: LinkGeometry) -> float:
    """Length of the tx -> p -> rx reflected path; >= d0, with equality
    exactly when p lies on the LoS segment."""
    return p.distance_to(link.tx) + p.distance_to(link.rx)


def reflected_path_lengths(points: np.ndarray, link: LinkGeometry) -> np.ndarray:
    """Vectorized reflected path length for an (N, 2) array of positions."""
    pts = np.asarray(points, dtype=float)
    d_tx = np.hypot(pts[..., 0] - link.tx.x, pts[..., 1] - link.tx.y)
    d_rx = np.hypot(pts[..., 0] - link.rx.x, pts[..., 1] - link.rx.y)
    return d_tx + d_rx


def path_excess(d_hat: float, link: LinkGeometry) -> float:
    """d_hat - d0, clamped at zero; rejects d_hat meaningfully below d0."""
    excess = d_hat - link.d0
    if excess < -_EXCESS_TOL * link.d0:
        raise ValueError(f"d_hat={d_hat} is below the LoS length d0={link.d0}")
    return max(excess, 0.0)


def fresnel_phase(d_hat: float, link: LinkGeometry, wavelength: float) -> float:
    """Phase angle between the static and reflected signal components,
    2*pi*(d_hat - d0)/wavelength, unbounded and non-negative."""
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    return TWO_PI * path_excess(d_hat, link) / wavelength


def theoretical_phase_diff(d_hat: float, link: LinkGeometry, f_a: float, f_b: float) -> float:
    """Fresnel phase gap between subcarriers at f_b and f_a (f_b > f_a):
    2*pi*(d_hat - d0)*(f_b - f_a)/c. Linear in both the path excess and
    the frequency gap."""
    if f_b <= f_a:
        raise ValueError(f"need f_b > f_a, got f_a={f_a}, f_b={f_b}")
    return TWO_PI * path_excess(d_hat, link) * (f_b - f_a) / SPEED_OF_LIGHT


def zone_index(d_hat: float, link: LinkGeometry, wavelength: float) -> int:
    """1-based index of the Fresnel zone containing a point with reflected
    path length d_hat. Boundary points belong to the outer zone (half-open
    annuli), so the mapping is right-continuous in d_hat."""
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    return int(math.floor(2.0 * path_excess(d_hat, link) / wavelength)) + 1


def catch_up_zone(f_a: float, f_b: float) -> tuple[int, int, float]:
    """Zone indices at which the boundaries of two subcarriers collide.

    Moving outward, the i-th boundary of the lower frequency f_a meets the
    (i+1)-th boundary of the higher frequency f_b where i*lambda_a is
    (i+1)*lambda_b, i.e. i = round(f_a / (f_b - f_a)). Up to that path
    excess the boundary gap grows monotonically, which bounds the usable
    range of the phase-gap-to-zone mapping.

    Returns (zone_of_lower_freq, zone_of_higher_freq, path_excess_m).
    """
    if f_b <= f_a:
        raise ValueError(f"need f_b > f_a, got f_a={f_a}, f_b={f_b}")
    i = int(round(f_a / (f_b - f_a)))
    lambda_a = SPEED_OF_LIGHT / f_a
    return i, i + 1, i * lambda_a / 2.0


def zone_crossing_point(link: LinkGeometry, n: int, wavelength: float) -> Point2D:
    """Point on the perpendicular bisector of the link (positive-offset
    side) lying exactly on the n-th zone boundary, i.e. with reflected
    path length d0 + n*wavelength/2."""
    if n < 1:
        raise ValueError("zone boundary index must be >= 1")
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    d_hat = link.d0 + n * wavelength / 2.0
    offset = math.sqrt(d_hat * d_hat / 4.0 - link.d0 * link.d0 / 4.0)
    return link.bisector_point(offset)
