"""Discrete-event simulator of IEEE 802.11e HCCA polling with feedback-based (F-Poll) scheduling."""

from .config import ScenarioConfig, load_config, loads_config, run_scenario, serialize_config
from .qos import PhyProfile, TrafficSpec
from .traces import VideoTrace, parse_trace, synthesize_trace

__all__ = [
    "PhyProfile",
    "ScenarioConfig",
    "TrafficSpec",
    "VideoTrace",
    "load_config",
    "loads_config",
    "parse_trace",
    "run_scenario",
    "serialize_config",
    "synthesize_trace",
]
__version__ = "0.1.0"
