"""Numerical evaluation of the interferer-induced outage and cooperator
spatial distributions in three/four node topologies under carrier sense."""

from .scenarios import (
    BirthTimeDist,
    GridSpec,
    QuadratureConfig,
    Scenario3,
    ScenarioCoop,
    Rect,
    DEFAULT_REGION,
)
from .outage import (
    QuadratureError,
    cs_idle_prob,
    decode_power_thresholds,
    interference_tolerance,
    cs_binding_power,
    outage_prob,
    interferer_outage,
    coop_avail_decode_only,
    coop_avail_cs_constrained,
)
from .spatial import (
    HeatmapResult,
    interferer_distribution,
    coop_conditional,
    coop_distribution,
    heatmap,
)

__all__ = [
    "BirthTimeDist", "GridSpec", "QuadratureConfig", "Scenario3",
    "ScenarioCoop", "Rect", "DEFAULT_REGION",
    "QuadratureError", "cs_idle_prob", "decode_power_thresholds",
    "interference_tolerance", "cs_binding_power", "outage_prob",
    "interferer_outage", "coop_avail_decode_only", "coop_avail_cs_constrained",
    "HeatmapResult", "interferer_distribution", "coop_conditional",
    "coop_distribution", "heatmap",
]
