"""Device-free localization from multicarrier Wi-Fi amplitude traces.

The toolkit simulates per-subcarrier CSI amplitudes for a moving
reflector, estimates per-pair Fresnel phase gaps from amplitude windows,
calibrates static-multipath offsets, recovers the reflected path length
by fold-aware line fitting, and localizes the target by intersecting
confocal ellipse constraints from several links.
"""

from .geometry import (
    LinkGeometry,
    Point2D,
    SPEED_OF_LIGHT,
    SubcarrierSet,
    catch_up_zone,
    fresnel_phase,
    reflected_path_length,
    theoretical_phase_diff,
    zone_crossing_point,
    zone_index,
)
from .localize import (
    EllipseConstraint,
    LocationEstimate,
    NoCandidateError,
    SensingArea,
    ellipse_residual,
    fuse,
    intersect_two,
    localization_error,
    track,
)
from .pathfit import (
    FitResult,
    InsufficientObservationsError,
    expected_max_phase,
    fit_path_length,
    fit_path_length_bidirectional,
)
from .phase import (
    CalibrationError,
    PhaseDiffObservation,
    PhaseOffsetMatrix,
    WindowConfig,
    apply_calibration,
    compute_all_pairs,
    estimate_offsets,
    estimate_period,
    estimate_time_shift,
    raw_phase_diff,
)
from .pipeline import estimate_path_lengths, localize_series
from .simulate import (
    CsiSeries,
    MultipathSpec,
    NoiseSpec,
    ReflectorSpec,
    Trajectory,
    dynamic_amplitude,
    make_trajectory,
    random_multipath,
    simulate_free_space,
    simulate_multipath,
)

__version__ = "0.1.0"
