"""Site percolation Monte Carlo on triangulations."""

from .core import (
    ColorSwitchReport,
    CrossingEstimate,
    CrossingSpec,
    EdgeProbabilities,
    ObservableField,
    PercolationSample,
    RSWRow,
    color_switch_check,
    contour_integral,
    crosses,
    crossing_outcomes,
    crossing_probability,
    dual_cycle,
    estimate_H,
    estimate_P,
    exploration_geometry,
    face_centroids,
    rectangle_spec,
    resolve_threads,
    rsw_harness,
    sample,
    separating_event,
    separation_geometry,
    separation_indicators,
)

__all__ = [
    "ColorSwitchReport",
    "CrossingEstimate",
    "CrossingSpec",
    "EdgeProbabilities",
    "ObservableField",
    "PercolationSample",
    "RSWRow",
    "color_switch_check",
    "contour_integral",
    "crosses",
    "crossing_outcomes",
    "crossing_probability",
    "dual_cycle",
    "estimate_H",
    "estimate_P",
    "exploration_geometry",
    "face_centroids",
    "rectangle_spec",
    "resolve_threads",
    "rsw_harness",
    "sample",
    "separating_event",
    "separation_geometry",
    "separation_indicators",
]
