"""Desk-scale bifurcation-entropy laboratory for critically marked families."""

__version__ = "0.1.0"

from .bowen import (
    PackingResult,
    SampleCloud,
    band_cloud,
    bif_dist,
    bif_dist_tilde,
    greedy_separated,
    grid_cloud,
    packing_curve,
)
from .entropy import (
    BrinKatokResult,
    CloudSpec,
    EntropyReport,
    MetricEntropyResult,
    VolumeGrowthReport,
    brin_katok_sample,
    estimate_h_bif,
    estimate_h_metric,
    graph_volume_growth,
    pointwise_dimension,
)
from .families import (
    MarkedFamily,
    family_from_id,
    make_cubic_two_critical,
    make_unicritical,
)
from .geometry import AT_INFINITY, Annulus, Disk, Rect, chordal_dist, param_dist
from .measure import (
    MeasureGrid,
    ball_mass,
    bowen_ball_mass,
    build_measure_grid,
    kappa_trim,
    support_mask,
)
from .orbits import (
    OrbitTable,
    critical_lyapunov_exponent,
    green_function,
    lyapunov_L,
    lyapunov_backward_mc,
    orbit_table,
)
