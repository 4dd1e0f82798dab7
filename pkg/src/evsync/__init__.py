"""Hardware-free temporal synchronization of event-camera streams.

Offsets between cameras are recovered by aligning their normalized
event-density distributions; see :func:`estimate_offset` and
:func:`synchronize`.
"""

__version__ = "0.1.0"

from .density import DensityDistribution, density_distribution, percentile_timestamp
from .estimator import (
    OffsetEstimate,
    SearchBounds,
    SyncConfig,
    argmin_offset,
    dissimilarity,
    dissimilarity_curve,
    estimate_offset,
    exhaustive_offset,
    search_bounds,
)
from .events import Event, EventStream, SensorGeometry, build_stream, duration
from .formats import export_density_table, read_events_csv, write_events_csv, write_report_json
from .synchronizer import SyncReport, apply_offset, synchronize
from .synthgen import ActivityProfile, GeneratorConfig, make_profile, sample_streams

__all__ = [
    "ActivityProfile", "DensityDistribution", "Event", "EventStream", "GeneratorConfig",
    "OffsetEstimate", "SearchBounds", "SensorGeometry", "SyncConfig", "SyncReport",
    "apply_offset", "argmin_offset", "build_stream", "density_distribution",
    "dissimilarity", "dissimilarity_curve", "duration", "estimate_offset", "exhaustive_offset",
    "export_density_table", "make_profile", "percentile_timestamp", "read_events_csv",
    "sample_streams", "search_bounds", "synchronize", "write_events_csv",
    "write_report_json",
]
