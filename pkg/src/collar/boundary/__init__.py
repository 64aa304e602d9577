"""Boundary-map verification: sections, transitions, cone verdicts, Markov cells, slopes."""
from .sections import (
    EscapedCollar,
    NonReturning,
    ReturnRecord,
    SectionSpec,
    TransitionBatch,
    VerificationFailed,
    in_section,
    transition,
    transitions,
)
from .verify import (
    BoundaryMapReport,
    ConeStructure,
    FixedPoint,
    SearchBudget,
    boundary_fixed_points,
    cone_arrays,
    entry_grid,
    run_transitions,
    targeted_entries,
    verify_boundary_map,
)
from .markov import CrossingFailed, MarkovCell, crossing_floor, partition_markov
from .slopes import (
    Region,
    RegionMiss,
    SlopeConstants,
    SlopeSummary,
    SlopeTrace,
    region_constants,
    slope_tracking,
    slope_tracking_batch,
)
