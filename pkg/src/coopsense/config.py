"""Experiment configuration: flat sectioned key-value text overriding the
stock parameter table. Unknown keys are rejected; power-like quantities take
a ``_dbm`` suffix at this boundary and are converted to watts on parse."""

from __future__ import annotations

import configparser
import dataclasses
import io

from .channel import PropagationParams, RateParams, free_space_ref_loss
from .dharq import DharqConfig
from .mac import MacConfig
from .sim import RunConfig, SimConfig, TopologySpec, TrafficConfig
from .sim.runner import CARRIER_HZ
from .units import dbm_to_watts

__all__ = ["ConfigError", "parse_config", "load_config", "render_config"]


class ConfigError(ValueError):
    pass


def _dbm(raw: str) -> float:
    return dbm_to_watts(float(raw))


# section -> key -> (target dataclass field, converter)
_SCHEMA = {
    "propagation": {
        "tx_power_dbm": ("tx_power", _dbm),
        "path_loss_exp": ("path_loss_exp", float),
        "noise_floor_dbm": ("noise_floor", _dbm),
        "bandwidth_hz": ("bandwidth", float),
        "cs_threshold_dbm": ("cs_threshold", _dbm),
        "relay_cs_threshold_dbm": ("relay_cs_threshold", _dbm),
        "detection_threshold_dbm": ("detection_threshold", _dbm),
        "max_doppler_hz": ("max_doppler", float),
        "ref_loss_db": ("ref_loss", lambda s: 10.0 ** (float(s) / 10.0)),
        "carrier_freq_ghz": (None, float),
    },
    "rates": {
        "rho_data_bps": ("rho_data", float),
        "rho_ctrl_bps": ("rho_ctrl", float),
        "payload_bits": ("payload_bits", int),
        "header_bits": ("header_bits", int),
        "ack_bits": ("ack_bits", int),
    },
    "mac": {
        "cw_start": ("cw_start", int),
        "srl": ("srl", int),
        "slot_s": ("slot", float),
        "difs_s": ("difs", float),
        "sifs_s": ("sifs", float),
        "cs_threshold_dbm": ("cs_threshold", _dbm),
    },
    "dharq": {
        "relay_cs_threshold_dbm": ("relay_cs_threshold", _dbm),
        "cw_rel": ("cw_rel", int),
        "epsilon": ("epsilon", float),
        "quant_levels": ("quant_levels", int),
        "quant_lo_db": (None, float),
        "quant_hi_db": (None, float),
    },
    "topology": {
        "n_nodes": ("n_nodes", int),
        "width_m": ("width", float),
        "height_m": ("height", float),
        "pinned_delta_sd_m": ("pinned_delta_sd", float),
        "neighbor_radius_m": ("neighbor_radius", float),
    },
    "traffic": {
        "lambda_kbps": ("lambda_kbps", float),
        "neighbor_radius_m": ("neighbor_radius", float),
        "duration_s": ("duration", float),
        "payload_bits": ("payload_bits", int),
        "dest_ring_frac": ("dest_ring_frac", float),
    },
    "sim": {
        "fading_block_slots": ("fading_block_slots", int),
        "oscillators": ("oscillators", int),
        "warmup_frac": ("warmup_frac", float),
        "sync_capture_db": ("sync_capture_db", float),
        "collect_events": ("collect_events", lambda s: s.lower() in ("1", "true", "yes")),
    },
    "run": {
        "seed": (None, int),
        "protocol": (None, str),
        "replications": (None, int),
    },
}


def parse_config(text: str, seed=None, protocol=None, replications=None) -> RunConfig:
    """Build a RunConfig from sectioned key-value text; every omitted key
    keeps its stock default. Explicit arguments override the text."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {sec: {} for sec in _SCHEMA}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            _, conv = _SCHEMA[sec][key]
            try:
                values[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{sec}] {key}: {raw!r}") from exc

    def build(cls, sec, extra=None):
        kwargs = dict(extra or {})
        for key, val in values[sec].items():
            field, _ = _SCHEMA[sec][key]
            if field is not None:
                kwargs[field] = val
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid [{sec}] settings: {exc}") from exc

    prop_extra = {}
    carrier = values["propagation"].pop("carrier_freq_ghz", None)
    if carrier is not None:
        if "ref_loss_db" in values["propagation"]:
            raise ConfigError("set either carrier_freq_ghz or ref_loss_db, not both")
        prop_extra["ref_loss"] = free_space_ref_loss(carrier * 1e9)
    elif "ref_loss_db" not in values["propagation"]:
        prop_extra["ref_loss"] = free_space_ref_loss(CARRIER_HZ)

    quant_extra = {}
    lo = values["dharq"].pop("quant_lo_db", None)
    hi = values["dharq"].pop("quant_hi_db", None)
    if (lo is None) != (hi is None):
        raise ConfigError("quant_lo_db and quant_hi_db must be set together")
    if lo is not None:
        quant_extra["quant_range_db"] = (lo, hi)

    props = build(PropagationParams, "propagation", prop_extra)
    rates = build(RateParams, "rates")
    mac = build(MacConfig, "mac", {"cs_threshold": props.cs_threshold})
    dharq = build(DharqConfig, "dharq",
                  dict(quant_extra, relay_cs_threshold=props.relay_cs_threshold))
    topo = build(TopologySpec, "topology")
    traffic = build(TrafficConfig, "traffic", {"payload_bits": rates.payload_bits})
    sim = build(SimConfig, "sim")

    run_vals = values["run"]
    try:
        return RunConfig(
            seed=seed if seed is not None else run_vals.get("seed", 1),
            protocol=protocol if protocol is not None else run_vals.get("protocol", "dharq"),
            replications=(replications if replications is not None
                          else run_vals.get("replications", 1)),
            topology=topo, traffic=traffic, props=props, rates=rates,
            mac=mac, dharq=dharq, sim=sim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **kwargs) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), **kwargs)


def render_config(cfg: RunConfig) -> str:
    """Echo a RunConfig back as config text (the run manifest)."""
    from .units import watts_to_dbm

    def dbm(w):
        return f"{watts_to_dbm(w):.6g}"

    buf = io.StringIO()
    cp = configparser.ConfigParser()
    cp["run"] = {"seed": str(cfg.seed), "protocol": cfg.protocol,
                 "replications": str(cfg.replications)}
    cp["propagation"] = {
        "tx_power_dbm": dbm(cfg.props.tx_power),
        "path_loss_exp": f"{cfg.props.path_loss_exp:g}",
        "noise_floor_dbm": dbm(cfg.props.noise_floor),
        "bandwidth_hz": f"{cfg.props.bandwidth:g}",
        "cs_threshold_dbm": dbm(cfg.props.cs_threshold),
        "relay_cs_threshold_dbm": dbm(cfg.props.relay_cs_threshold),
        "detection_threshold_dbm": dbm(cfg.props.detection_threshold),
        "max_doppler_hz": f"{cfg.props.max_doppler:g}",
        "ref_loss_db": f"{10 * __import__('math').log10(cfg.props.ref_loss):.6g}",
    }
    cp["rates"] = {
        "rho_data_bps": f"{cfg.rates.rho_data:g}",
        "rho_ctrl_bps": f"{cfg.rates.rho_ctrl:g}",
        "payload_bits": str(cfg.rates.payload_bits),
        "header_bits": str(cfg.rates.header_bits),
        "ack_bits": str(cfg.rates.ack_bits),
    }
    cp["mac"] = {
        "cw_start": str(cfg.mac.cw_start), "srl": str(cfg.mac.srl),
        "slot_s": f"{cfg.mac.slot:g}", "difs_s": f"{cfg.mac.difs:g}",
        "sifs_s": f"{cfg.mac.sifs:g}",
        "cs_threshold_dbm": dbm(cfg.mac.cs_threshold),
    }
    cp["dharq"] = {
        "relay_cs_threshold_dbm": dbm(cfg.dharq.relay_cs_threshold),
        "cw_rel": str(cfg.dharq.cw_rel),
        "epsilon": f"{cfg.dharq.epsilon:g}",
        "quant_levels": str(cfg.dharq.quant_levels),
        "quant_lo_db": f"{cfg.dharq.quant_range_db[0]:g}",
        "quant_hi_db": f"{cfg.dharq.quant_range_db[1]:g}",
    }
    topo = {"n_nodes": str(cfg.topology.n_nodes),
            "width_m": f"{cfg.topology.width:g}",
            "height_m": f"{cfg.topology.height:g}",
            "neighbor_radius_m": f"{cfg.topology.neighbor_radius:g}"}
    if cfg.topology.pinned_delta_sd is not None:
        topo["pinned_delta_sd_m"] = f"{cfg.topology.pinned_delta_sd:g}"
    cp["topology"] = topo
    cp["traffic"] = {
        "lambda_kbps": f"{cfg.traffic.lambda_kbps:g}",
        "neighbor_radius_m": f"{cfg.traffic.neighbor_radius:g}",
        "duration_s": f"{cfg.traffic.duration:g}",
        "payload_bits": str(cfg.traffic.payload_bits),
        "dest_ring_frac": f"{cfg.traffic.dest_ring_frac:g}",
    }
    cp["sim"] = {
        "fading_block_slots": str(cfg.sim.fading_block_slots),
        "oscillators": str(cfg.sim.oscillators),
        "warmup_frac": f"{cfg.sim.warmup_frac:g}",
        "sync_capture_db": f"{cfg.sim.sync_capture_db:g}",
        "collect_events": str(cfg.sim.collect_events).lower(),
    }
    cp.write(buf)
    return buf.getvalue()
