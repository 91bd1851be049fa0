"""Discrete-event network simulator: slotted carrier-sense MAC over a
time-correlated Rayleigh field, with reactive coded cooperation."""

from .topology import Topology, TopologySpec, generate_topology
from .metrics import MetricsReport, relay_distance_cdf, mean_report
from .runner import RunConfig, RunResult, SimConfig, TrafficConfig, run, sweep

__all__ = [
    "Topology", "TopologySpec", "generate_topology",
    "MetricsReport", "relay_distance_cdf", "mean_report",
    "RunConfig", "RunResult", "SimConfig", "TrafficConfig", "run", "sweep",
]
