"""2D localization by intersecting confocal ellipse constraints.

Each link's fitted reflected path length pins the target to an ellipse
with the transceivers as foci. Candidate positions come from pairwise
ellipse intersections found by damped Newton iteration from a seed grid;
with three or more links the candidate that best satisfies all
constraints is refined by weighted least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    LinkGeometry,
    Point2D,
    SPEED_OF_LIGHT,
    SubcarrierSet,
    TWO_PI,
    reflected_path_length,
    reflected_path_lengths,
)
from .pathfit import FitResult

BODY_RADIUS = 0.20  # m, half a typical human body width

SIGMA_FLOOR = 0.02  # m, about one zone of path-length granularity at 5 GHz

NEWTON_TOL = 1e-6  # m, convergence tolerance on both path-length residuals

NEWTON_MAX_ITER = 50

SEED_GRID = 16

DEDUPE_RADIUS = 0.01  # m


class NoCandidateError(RuntimeError):
    """No pairwise ellipse intersection lies inside the sensing area."""


@dataclass(frozen=True)
class SensingArea:
    """Axis-aligned rectangular sensing region."""

    min_x: float
    max_x: float
    min_y: float
    max_y: float

    def __post_init__(self) -> None:
        if self.max_x <= self.min_x or self.max_y <= self.min_y:
            raise ValueError("sensing area must have positive extent")

    def center(self) -> Point2D:
        return Point2D((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)

    def contains(self, x: float, y: float, pad: float = 1e-6) -> bool:
        return (
            self.min_x - pad <= x <= self.max_x + pad
            and self.min_y - pad <= y <= self.max_y + pad
        )


@dataclass(frozen=True)
class EllipseConstraint:
    """One link's path-length constraint with 1-sigma uncertainty."""

    link: LinkGeometry
    d_hat: float
    sigma: float

    def __post_init__(self) -> None:
        if self.d_hat < self.link.d0:
            raise ValueError("d_hat must be >= the link's LoS length")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LocationEstimate:
    """Fused 2D position with the path-length residual it leaves behind."""

    position: Point2D
    time: float
    residual: float
    contributing_links: int

    def __post_init__(self) -> None:
        if self.residual < 0.0:
            raise ValueError("residual must be >= 0")
        if self.contributing_links < 2:
            raise ValueError("an estimate needs at least 2 links")


def ellipse_residual(p: Point2D, c: EllipseConstraint) -> float:
    """Signed path-length miss: reflected path at p minus constraint d_hat."""
    return reflected_path_length(p, c.link) - c.d_hat


def _residuals(points: np.ndarray, constraints: list[EllipseConstraint]) -> np.ndarray:
    """(N, C) matrix of signed path-length residuals."""
    return np.stack(
        [reflected_path_lengths(points, c.link) - c.d_hat for c in constraints], axis=-1
    )


def _gradients(points: np.ndarray, link: LinkGeometry) -> np.ndarray:
    """(N, 2) gradient of the reflected path length; sum of unit vectors
    away from each focus. Ill-defined exactly at a focus."""
    d_tx = points - np.array([link.tx.x, link.tx.y])
    d_rx = points - np.array([link.rx.x, link.rx.y])
    n_tx = np.maximum(np.hypot(d_tx[:, 0], d_tx[:, 1]), 1e-12)[:, None]
    n_rx = np.maximum(np.hypot(d_rx[:, 0], d_rx[:, 1]), 1e-12)[:, None]
    return d_tx / n_tx + d_rx / n_rx


def intersect_two(
    a: EllipseConstraint,
    b: EllipseConstraint,
    area: SensingArea,
    grid: int = SEED_GRID,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> list[Point2D]:
    """All points inside the area where both ellipse residuals vanish.

    Damped Newton iterations run in parallel from a grid of seeds spread
    over the area; converged roots are deduplicated within 1 cm. An empty
    list means the two path-length estimates are inconsistent.
    """
    if a.link.same_foci(b.link):
        raise ValueError("constraints must come from distinct links")

    gx = np.linspace(area.min_x, area.max_x, grid + 1)
    gy = np.linspace(area.min_y, area.max_y, grid + 1)
    cx = (gx[:-1] + gx[1:]) / 2.0
    cy = (gy[:-1] + gy[1:]) / 2.0
    pts = np.stack(np.meshgrid(cx, cy), axis=-1).reshape(-1, 2)

    constraints = [a, b]
    active = np.ones(len(pts), dtype=bool)
    res = _residuals(pts, constraints)
    for _ in range(max_iter):
        if not np.any(active):
            break
        ga = _gradients(pts[active], a.link)
        gb = _gradients(pts[active], b.link)
        det = ga[:, 0] * gb[:, 1] - ga[:, 1] * gb[:, 0]
        solvable = np.abs(det) > 1e-9
        r = res[active]
        # Explicit 2x2 solve of J step = r with rows (ga, gb).
        step = np.zeros_like(pts[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            step[:, 0] = (r[:, 0] * gb[:, 1] - r[:, 1] * ga[:, 1]) / det
            step[:, 1] = (r[:, 1] * ga[:, 0] - r[:, 0] * gb[:, 0]) / det
        step[~solvable] = 0.0

        act_idx = np.flatnonzero(active)
        active[act_idx[~solvable]] = False
        idx = act_idx[solvable]
        step = step[solvable]
        if len(idx) == 0:
            break

        old_norm = np.max(np.abs(res[idx]), axis=1)
        scale = np.ones(len(idx))
        trial = pts[idx] - step
        trial_res = _residuals(trial, constraints)
        for _ in range(6):
            worse = np.max(np.abs(trial_res), axis=1) > old_norm
            if not np.any(worse):
                break
            scale[worse] *= 0.5
            trial[worse] = pts[idx[worse]] - scale[worse, None] * step[worse]
            trial_res[worse] = _residuals(trial[worse], constraints)
        pts[idx] = trial
        res[idx] = trial_res
        done = np.max(np.abs(trial_res), axis=1) < tol * 0.1
        active[idx[done]] = False

    final_res = _residuals(pts, constraints)
    good = np.max(np.abs(final_res), axis=1) < tol
    roots = pts[good]

    out: list[Point2D] = []
    for x, y in roots:
        if not area.contains(x, y):
            continue
        if any(math.hypot(x - q.x, y - q.y) < DEDUPE_RADIUS for q in out):
            continue
        out.append(Point2D(float(x), float(y)))
    return out


def _weighted_objective(p: np.ndarray, constraints: list[EllipseConstraint]) -> float:
    r = _residuals(p[None, :], constraints)[0]
    w = np.array([1.0 / (c.sigma**2) for c in constraints])
    return float(np.sum(w * r * r))


def _refine(p0: np.ndarray, constraints: list[EllipseConstraint]) -> np.ndarray:
    """Gauss-Newton descent on the sigma-weighted squared residuals.

    Backtracking keeps every accepted step an improvement, so refinement
    never worsens the objective it starts from.
    """
    p = p0.copy()
    obj = _weighted_objective(p, constraints)
    w = np.array([1.0 / (c.sigma**2) for c in constraints])
    for _ in range(NEWTON_MAX_ITER):
        r = _residuals(p[None, :], constraints)[0]
        jac = np.stack([_gradients(p[None, :], c.link)[0] for c in constraints])
        jtj = (jac * w[:, None]).T @ jac
        jtr = (jac * w[:, None]).T @ r
        try:
            step = np.linalg.solve(jtj + 1e-12 * np.eye(2), jtr)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        improved = False
        for _ in range(20):
            trial = p - scale * step
            trial_obj = _weighted_objective(trial, constraints)
            if trial_obj < obj:
                p, obj = trial, trial_obj
                improved = True
                break
            scale *= 0.5
        if not improved or np.linalg.norm(scale * step) < 1e-10:
            break
    return p


def fuse(
    constraints: list[EllipseConstraint],
    area: SensingArea,
    prior: Point2D | None = None,
    time: float = 0.0,
) -> LocationEstimate:
    """Fuse two or more ellipse constraints into a single position.

    With exactly two constraints the intersection candidate nearest the
    prior (or the area center) wins. With three or more, the pairwise
    candidate with the smallest total absolute residual across all
    constraints is refined by weighted least squares.
    """
    if len(constraints) < 2:
        raise ValueError("need at least 2 constraints")

    candidates: list[Point2D] = []
    for i in range(len(constraints) - 1):
        for j in range(i + 1, len(constraints)):
            if constraints[i].link.same_foci(constraints[j].link):
                continue
            candidates.extend(intersect_two(constraints[i], constraints[j], area))
    if not candidates:
        raise NoCandidateError("no pairwise ellipse intersection inside the area")

    if len(constraints) == 2:
        anchor = prior if prior is not None else area.center()
        best = min(candidates, key=lambda p: p.distance_to(anchor))
        final = np.array([best.x, best.y])
    else:
        scores = [
            sum(abs(ellipse_residual(p, c)) for c in constraints) for p in candidates
        ]
        start = candidates[int(np.argmin(scores))]
        final = _refine(np.array([start.x, start.y]), constraints)

    res = _residuals(final[None, :], constraints)[0]
    return LocationEstimate(
        position=Point2D(float(final[0]), float(final[1])),
        time=time,
        residual=float(np.sqrt(np.sum(res * res))),
        contributing_links=len(constraints),
    )


def localization_error(estimate: Point2D, truth: Point2D, body_radius: float = BODY_RADIUS) -> float:
    """Distance from the estimate to the edge of a body-sized cylinder at
    the true location; zero when the estimate falls inside it."""
    return max(0.0, estimate.distance_to(truth) - body_radius)


def constraint_sigma(fit: FitResult, subcarriers: SubcarrierSet) -> float:
    """Path-length uncertainty implied by a fit's phase residual."""
    return max(SIGMA_FLOOR, fit.rms_residual * SPEED_OF_LIGHT / (TWO_PI * subcarriers.max_gap))


def track(
    per_link_fits: list[list[FitResult]],
    links: list[LinkGeometry],
    subcarriers: SubcarrierSet,
    area: SensingArea,
) -> list[LocationEstimate]:
    """Chain per-window fits from several links into a position track.

    Windows are matched across links by their end times; a window needs at
    least two confident fits to produce an estimate, and each estimate
    seeds the next window's mirror disambiguation. Skipped windows are
    legal gaps, not errors.
    """
    if len(per_link_fits) != len(links):
        raise ValueError("need one fit list per link")

    by_time: dict[float, list[tuple[int, FitResult]]] = {}
    for li, fits in enumerate(per_link_fits):
        for f in fits:
            if not f.ok:
                continue
            key = round(f.window_end_time, 9)
            by_time.setdefault(key, []).append((li, f))

    estimates: list[LocationEstimate] = []
    prior: Point2D | None = None
    for key in sorted(by_time):
        entries = by_time[key]
        if len(entries) < 2:
            continue
        constraints = [
            EllipseConstraint(links[li], max(f.d_hat, links[li].d0), constraint_sigma(f, subcarriers))
            for li, f in entries
        ]
        try:
            est = fuse(constraints, area, prior=prior, time=key)
        except NoCandidateError:
            continue
        estimates.append(est)
        prior = est.position
    return estimates
