"""Scenario configuration: presets, INI loading/serialization and scenario runs.

A minimal scenario is three lines::

    [scenario]
    preset = formula1
    stations = 6

Everything else (802.11g PHY timing, TSPEC per preset, synthetic traces
matched to the preset's mean frame size and 16 kbit/s rate) has defaults.
Station positions are accepted but unused: the channel is ideal.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .engine import Simulation, StationSetup
from .qos import PhyProfile, ScheduleState, TrafficSpec, admit
from .traces import Jitter, VideoTrace, read_trace, synthesize_trace
from .policies import POLICIES, make_policy

DEFAULT_DURATION_MS = 500_000
DEFAULT_TRAFFIC_START_MS = 20_000
# synthetic traces run past the simulated window so the last generated frame
# still announces a successor
TRACE_TAIL_MS = 10_000


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = str(path) if path else "<config>"
        if line:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class AdmissionError(RuntimeError):
    def __init__(self, station: int, load, budget):
        super().__init__(f"station {station} rejected: TXOP load {float(load):.4f} exceeds budget {float(budget):.4f}")
        self.station = station
        self.load = load
        self.budget = budget


@dataclass(frozen=True)
class SynthSpec:
    mean_interarrival_ms: int
    interarrival_jitter: str = "geometric"
    mean_size_bits: int = 4152
    size_jitter: str = "exp"
    max_size_bits: int | None = None
    seed: int | None = None  # None: derived from the scenario seed and station id
    duration_ms: int | None = None  # None: cover the simulated window


@dataclass(frozen=True)
class StationConfig:
    tspec: TrafficSpec
    trace: Path | SynthSpec
    start_offset_ms: int = 0
    preset: str | None = None
    position: tuple[float, float] | None = None


def _tspec(nominal: int, maximum: int) -> TrafficSpec:
    return TrafficSpec(
        mean_data_rate=16_000,
        nominal_msdu_size=nominal,
        max_msdu_size=maximum,
        delay_bound=80_000,
        min_service_interval=40_000,
        max_service_interval=40_000,
        min_phy_rate=54_000_000,
    )


PRESET_TSPECS = {
    "formula1": _tspec(519, 4831),
    "soccer": _tspec(655, 4647),
    "mrbean": _tspec(403, 3265),
}


def preset_synth(name: str) -> SynthSpec:
    spec = PRESET_TSPECS[name]
    mean_gap = round(spec.nominal_msdu_size * 8 * 1000 / spec.mean_data_rate)
    return SynthSpec(mean_gap, "geometric", spec.nominal_msdu_size * 8, "exp", spec.max_msdu_size * 8)


def preset_station(name: str) -> StationConfig:
    if name not in PRESET_TSPECS:
        raise KeyError(name)
    return StationConfig(PRESET_TSPECS[name], preset_synth(name), preset=name)


@dataclass(frozen=True)
class ScenarioConfig:
    stations: tuple[StationConfig, ...]
    phy: PhyProfile = field(default_factory=PhyProfile)
    scheduler: str = "hcca"
    duration_ms: int = DEFAULT_DURATION_MS
    traffic_start_ms: int = DEFAULT_TRAFFIC_START_MS
    seed: int = 1
    drops: frozenset = frozenset()  # {(station id, trace frame index)}
    name: str = "scenario"
    preset: str | None = None
    output_dir: str | None = None
    event_log: bool = False

    def __post_init__(self):
        if self.scheduler not in POLICIES:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.duration_ms <= self.traffic_start_ms:
            raise ConfigError("simulation duration must exceed the traffic start time")
        if self.traffic_start_ms < 0:
            raise ConfigError("traffic start must be non-negative")
        if self.preset is not None and self.preset not in PRESET_TSPECS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        for sid, _ in self.drops:
            if not 1 <= sid <= len(self.stations):
                raise ConfigError(f"loss schedule names unknown station {sid}")

    @property
    def station_ids(self) -> list[int]:
        return list(range(1, len(self.stations) + 1))


def with_station_count(config: ScenarioConfig, n: int) -> ScenarioConfig:
    """First ``n`` stations, extending with preset stations when needed."""
    stations = list(config.stations[:n])
    if len(stations) < n:
        if config.preset is None:
            raise ConfigError(f"scenario defines {len(config.stations)} stations and has no preset to add more")
        stations += [preset_station(config.preset)] * (n - len(stations))
    drops = frozenset(d for d in config.drops if d[0] <= n)
    return dataclasses.replace(config, stations=tuple(stations), drops=drops)


# ---- INI format ----------------------------------------------------------

PHY_KEYS = {
    "sifs_us": "sifs", "pifs_us": "pifs", "slot_time_us": "slot_time",
    "preamble_bits": "preamble_bits", "plcp_header_bits": "plcp_header_bits",
    "plcp_rate_bps": "plcp_rate", "mac_header_bytes": "mac_header_bytes",
    "data_rate_bps": "data_rate", "basic_rate_bps": "basic_rate",
    "beacon_interval_us": "beacon_interval", "contention_budget_us": "contention_budget",
    "ack_body_bytes": "ack_body_bytes", "poll_body_bytes": "poll_body_bytes",
}
TSPEC_KEYS = {
    "mean_data_rate_bps": ("mean_data_rate", 1), "nominal_msdu_bytes": ("nominal_msdu_size", 1),
    "max_msdu_bytes": ("max_msdu_size", 1), "delay_bound_ms": ("delay_bound", 1000),
    "min_service_interval_ms": ("min_service_interval", 1000),
    "max_service_interval_ms": ("max_service_interval", 1000), "min_phy_rate_bps": ("min_phy_rate", 1),
}
SYNTH_KEYS = ("synth_mean_interarrival_ms", "synth_interarrival_jitter", "synth_mean_size_bits",
              "synth_size_jitter", "synth_max_size_bits", "synth_seed", "synth_duration_ms")
SCENARIO_KEYS = {"name", "scheduler", "duration_s", "traffic_start_s", "seed", "preset", "stations",
                 "output_dir", "event_log"}
STATION_KEYS = {"preset", "trace", "start_offset_ms", "position"} | set(TSPEC_KEYS) | set(SYNTH_KEYS)


_UNSET = object()


def _optional_int(text: str) -> int | None:
    return None if text.lower() == "none" else int(text)


def _seconds_to_ms(text: str) -> int:
    return int(Decimal(text) * 1000)


def _ms_to_seconds(ms: int) -> str:
    return format((Decimal(ms) / 1000).normalize(), "f")


class _Source:
    def __init__(self, text: str, path):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for i, raw in enumerate(self.lines, start=1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                if key is None and current == section:
                    return i
            elif key is not None and current == section:
                k = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
                if k == key:
                    return i
        return None

    def error(self, message: str, section: str, key: str | None = None) -> ConfigError:
        return ConfigError(message, self.path, self.line_of(section, key))


def loads_config(text: str, path=None, base_dir=None) -> ScenarioConfig:
    """Parse INI text. Relative trace paths resolve against ``base_dir``."""
    src = _Source(text, path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from None
    base_dir = Path(base_dir) if base_dir is not None else (Path(path).parent if path else Path.cwd())

    for sec in parser.sections():
        allowed = None
        if sec == "scenario":
            allowed = SCENARIO_KEYS
        elif sec == "phy":
            allowed = set(PHY_KEYS)
        elif sec == "loss":
            allowed = {"drops"}
        elif sec.startswith("station."):
            allowed = STATION_KEYS
        else:
            raise src.error(f"unknown section [{sec}]", sec)
        for key in parser[sec]:
            if key not in allowed:
                raise src.error(f"unknown key {key!r} in [{sec}]", sec, key)

    def get(sec, key, conv, default=None):
        if not parser.has_option(sec, key):
            return default
        raw = parser.get(sec, key).strip()
        try:
            return conv(raw)
        except (ValueError, InvalidOperation, KeyError) as exc:
            raise src.error(f"bad value for {key}: {raw!r} ({exc})", sec, key) from None

    def boolean(raw):
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError("expected a boolean")

    sc = "scenario"
    if not parser.has_section(sc):
        raise ConfigError("missing [scenario] section", path)
    preset = get(sc, "preset", str)
    if preset is not None and preset not in PRESET_TSPECS:
        raise src.error(f"unknown preset {preset!r}; expected one of {sorted(PRESET_TSPECS)}", sc, "preset")

    phy_kwargs = {}
    if parser.has_section("phy"):
        for key, attr in PHY_KEYS.items():
            v = get("phy", key, int)
            if v is not None:
                phy_kwargs[attr] = v
    try:
        phy = PhyProfile(**phy_kwargs)
    except ValueError as exc:
        raise src.error(str(exc), "phy") from None

    station_sections = sorted((s for s in parser.sections() if s.startswith("station.")),
                              key=lambda s: _station_index(s, src))
    stations = []
    for i, sec in enumerate(station_sections, start=1):
        if _station_index(sec, src) != i:
            raise src.error(f"station sections must be numbered 1..n, got [{sec}]", sec)
        stations.append(_load_station(parser, sec, get, src, preset, base_dir))
    count = get(sc, "stations", int)
    if station_sections:
        if count is not None and count != len(stations):
            raise src.error(f"stations = {count} but {len(stations)} [station.*] sections", sc, "stations")
    elif count is not None:
        if preset is None:
            raise src.error("stations count needs a preset", sc, "stations")
        if count < 0:
            raise src.error("stations must be non-negative", sc, "stations")
        stations = [preset_station(preset)] * count

    drops = set()
    if parser.has_option("loss", "drops"):
        for tok in parser.get("loss", "drops").replace(",", " ").split():
            try:
                s, m = tok.split(":")
                drops.add((int(s), int(m)))
            except ValueError:
                raise src.error(f"bad drop entry {tok!r}, expected station:frame", "loss", "drops") from None

    try:
        return ScenarioConfig(
            stations=tuple(stations),
            phy=phy,
            scheduler=get(sc, "scheduler", str, "hcca"),
            duration_ms=get(sc, "duration_s", _seconds_to_ms, DEFAULT_DURATION_MS),
            traffic_start_ms=get(sc, "traffic_start_s", _seconds_to_ms, DEFAULT_TRAFFIC_START_MS),
            seed=get(sc, "seed", int, 1),
            drops=frozenset(drops),
            name=get(sc, "name", str, Path(path).stem if path else "scenario"),
            preset=preset,
            output_dir=get(sc, "output_dir", str),
            event_log=get(sc, "event_log", boolean, False),
        )
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], path, src.line_of("scenario")) from None


def _station_index(section: str, src: _Source) -> int:
    try:
        return int(section.split(".", 1)[1])
    except ValueError:
        raise src.error(f"bad station section name [{section}]", section) from None


def _load_station(parser, sec, get, src, scenario_preset, base_dir) -> StationConfig:
    preset = get(sec, "preset", str, scenario_preset)
    if preset is not None and preset not in PRESET_TSPECS:
        raise src.error(f"unknown preset {preset!r}", sec, "preset")
    base_tspec = PRESET_TSPECS.get(preset)
    fields = {}
    for key, (attr, scale) in TSPEC_KEYS.items():
        v = get(sec, key, int)
        if v is not None:
            fields[attr] = v * scale
        elif base_tspec is not None:
            fields[attr] = getattr(base_tspec, attr)
        else:
            raise src.error(f"station without preset must set {key}", sec)
    try:
        tspec = TrafficSpec(**fields)
    except ValueError as exc:
        raise src.error(str(exc), sec) from None

    trace_src = get(sec, "trace", str, "synthetic")
    if trace_src == "synthetic":
        base = preset_synth(preset) if preset else None
        synth_fields = {}
        for key in SYNTH_KEYS:
            attr = key[len("synth_"):]
            conv = str if attr.endswith("jitter") else _optional_int
            v = get(sec, key, conv, _UNSET)
            if attr.endswith("jitter") and isinstance(v, str):
                try:
                    Jitter.parse(v)
                except ValueError as exc:
                    raise src.error(str(exc), sec, key) from None
            if v is _UNSET:
                v = getattr(base, attr) if base is not None else None
            if v is not None:
                synth_fields[attr] = v
        if "mean_interarrival_ms" not in synth_fields:
            raise src.error("synthetic trace needs synth_mean_interarrival_ms or a preset", sec)
        trace = SynthSpec(**synth_fields)
    else:
        p = Path(trace_src)
        if not p.is_absolute():
            p = (base_dir / p).resolve()
        if not p.is_file():
            raise src.error(f"trace file not found: {p}", sec, "trace")
        trace = p

    pos = get(sec, "position", lambda r: tuple(float(x) for x in r.split(",")))
    if pos is not None and len(pos) != 2:
        raise src.error("position must be x,y", sec, "position")
    return StationConfig(tspec, trace, get(sec, "start_offset_ms", int, 0), preset, pos)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", path)
    return loads_config(path.read_text(encoding="utf-8"), path=path)


def serialize_config(config: ScenarioConfig) -> str:
    """INI text that loads back to an equal ScenarioConfig."""
    out = ["[scenario]", f"name = {config.name}", f"scheduler = {config.scheduler}",
           f"duration_s = {_ms_to_seconds(config.duration_ms)}",
           f"traffic_start_s = {_ms_to_seconds(config.traffic_start_ms)}", f"seed = {config.seed}"]
    if config.preset:
        out.append(f"preset = {config.preset}")
    if config.output_dir:
        out.append(f"output_dir = {config.output_dir}")
    out.append(f"event_log = {'yes' if config.event_log else 'no'}")
    out += ["", "[phy]"]
    out += [f"{key} = {getattr(config.phy, attr)}" for key, attr in PHY_KEYS.items()]
    for i, st in enumerate(config.stations, start=1):
        out += ["", f"[station.{i}]"]
        if st.preset:
            out.append(f"preset = {st.preset}")
        for key, (attr, scale) in TSPEC_KEYS.items():
            out.append(f"{key} = {getattr(st.tspec, attr) // scale}")
        out.append(f"start_offset_ms = {st.start_offset_ms}")
        if st.position is not None:
            out.append(f"position = {st.position[0]!r},{st.position[1]!r}")
        if isinstance(st.trace, SynthSpec):
            out.append("trace = synthetic")
            for key in SYNTH_KEYS:
                v = getattr(st.trace, key[len("synth_"):])
                out.append(f"{key} = {'none' if v is None else v}")
        else:
            out.append(f"trace = {st.trace}")
    if config.drops:
        out += ["", "[loss]", "drops = " + " ".join(f"{s}:{m}" for s, m in sorted(config.drops))]
    return "\n".join(out) + "\n"


# ---- building and running ------------------------------------------------

def station_trace(config: ScenarioConfig, sid: int, st: StationConfig) -> VideoTrace:
    if isinstance(st.trace, Path):
        return read_trace(st.trace)
    syn = st.trace
    seed = syn.seed if syn.seed is not None else config.seed * 1000 + sid
    duration = syn.duration_ms
    if duration is None:
        duration = config.duration_ms - config.traffic_start_ms - st.start_offset_ms + TRACE_TAIL_MS
    return synthesize_trace(seed, syn.mean_interarrival_ms, syn.interarrival_jitter, syn.mean_size_bits,
                            syn.size_jitter, duration, max_size_bits=syn.max_size_bits)


def admit_all(config: ScenarioConfig) -> ScheduleState:
    state = ScheduleState()
    for sid, st in zip(config.station_ids, config.stations):
        result = admit(state, st.tspec, config.phy, stream_id=sid)
        if not result.accepted:
            raise AdmissionError(sid, result.load, result.budget)
        state = result.state
    return state


def build_simulation(config: ScenarioConfig, event_log: bool | None = None) -> Simulation:
    schedule = admit_all(config)
    setups = {
        sid: StationSetup(station_trace(config, sid, st), st.tspec,
                          (config.traffic_start_ms + st.start_offset_ms) * 1000)
        for sid, st in zip(config.station_ids, config.stations)
    }
    policy = make_policy(config.scheduler, schedule, config.phy)
    return Simulation(config.phy, schedule, setups, policy, config.duration_ms * 1000,
                      drops=config.drops, event_log=config.event_log if event_log is None else event_log)


def run_scenario(config: ScenarioConfig, event_log: bool | None = None):
    """Run one scenario; returns ``(ledger, simulation)``."""
    sim = build_simulation(config, event_log)
    ledger = sim.run()
    return ledger, sim


def default_output_dir() -> str:
    return os.environ.get("HCCASIM_OUT", "results")
