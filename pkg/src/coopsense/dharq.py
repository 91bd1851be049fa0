"""Reactive coded cooperation on top of CSMA: quantized link-quality feedback,
conservative relay rate selection, distributed relay contention, and the
idealized best-relay selection used as a performance bound.

A destination that decoded the header but not the payload reports a quantized
average SINR; candidates that hold the payload compute the redundancy rate
that would complete the decoding with a safety margin, refuse if it does not
beat the source's own rate, and contend with a short sensing-gated backoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import RateParams, capacity
from .units import dbm_to_watts

__all__ = [
    "DharqConfig",
    "NackPayload",
    "RelayCandidateState",
    "RelayDecision",
    "quantize_sinr",
    "dequantize_sinr",
    "relay_rate",
    "contention_step",
    "ideal_relay_select",
]

GIVE_UP_REASONS = ("none", "cs_busy", "rate_too_low", "nav")


@dataclass(frozen=True)
class DharqConfig:
    relay_cs_threshold: float = dbm_to_watts(-100.0)
    cw_rel: int = 16
    epsilon: float = 0.06
    quant_levels: int = 8
    quant_range_db: tuple = (-5.0, 30.0)

    def __post_init__(self):
        if self.cw_rel < 1:
            raise ValueError("relay contention window must be at least 1 slot")
        if self.epsilon <= 0:
            raise ValueError("the rate-selection margin must be positive")
        if self.quant_levels < 2:
            raise ValueError("need at least 2 quantizer levels")
        lo, hi = self.quant_range_db
        if hi <= lo:
            raise ValueError("quantizer range must be increasing")

    @property
    def quant_step_db(self) -> float:
        lo, hi = self.quant_range_db
        return (hi - lo) / self.quant_levels


@dataclass(frozen=True)
class NackPayload:
    sinr_index: int
    source: int

    def __post_init__(self):
        if self.sinr_index < 0:
            raise ValueError("quantizer index must be non-negative")


@dataclass
class RelayCandidateState:
    node: int
    cached_payload_bits: float
    gamma_cd: float              # linear, averaged over the NACK reception
    computed_rate: float         # bits/s, fixed before contention
    backoff_remaining: int
    give_up_reason: str = "none"

    @property
    def active(self) -> bool:
        return self.give_up_reason == "none"


def quantize_sinr(gamma: float, cfg: DharqConfig) -> int:
    """Bin index of a linear SINR on the uniform-in-dB quantizer grid.

    Below-range values land in bin 0, above-range in the top bin.
    """
    if gamma < 0:
        raise ValueError("SINR must be non-negative")
    lo, hi = cfg.quant_range_db
    if gamma == 0.0:
        return 0
    gamma_db = 10.0 * math.log10(gamma)
    if gamma_db < lo:
        return 0
    idx = int((gamma_db - lo) / cfg.quant_step_db)
    return min(idx, cfg.quant_levels - 1)


def dequantize_sinr(index: int, cfg: DharqConfig) -> float:
    """Linear SINR credited for a bin: its lower edge, and zero for bin 0.

    The lower-edge rule keeps the credited mutual information a conservative
    underestimate of what the destination actually collected.
    """
    if not (0 <= index < cfg.quant_levels):
        raise ValueError("quantizer index out of range")
    if index == 0:
        return 0.0
    lo, _ = cfg.quant_range_db
    return 10.0 ** ((lo + index * cfg.quant_step_db) / 10.0)


@dataclass(frozen=True)
class RelayDecision:
    rate: float | None
    refusal: str | None  # None | "rate_too_low" | "already_decodable"

    @property
    def participates(self) -> bool:
        return self.refusal is None


def relay_rate(gamma_sd_tilde: float, gamma_cd: float, rates: RateParams,
               cfg: DharqConfig, bandwidth: float) -> RelayDecision:
    """Redundancy bitrate that completes the payload with the safety margin.

    Solving the two-transmission bit budget for the relay rate gives
    rho_data * C(gamma_cd) / ((1+eps) rho_data - C(gamma_sd~)). A rate at or
    below the source's own bitrate means relaying would outlast a plain
    retransmission, so the candidate refuses.
    """
    credited = capacity(gamma_sd_tilde, bandwidth)
    denom = (1.0 + cfg.epsilon) * rates.rho_data - credited
    if denom <= 0:
        return RelayDecision(None, "already_decodable")
    rate = rates.rho_data * capacity(gamma_cd, bandwidth) / denom
    if rate <= rates.rho_data:
        return RelayDecision(None, "rate_too_low")
    return RelayDecision(rate, None)


def contention_step(state: RelayCandidateState, event: str):
    """One contention event; returns (state, action).

    Actions: ("start_relay_tx", rate), ("give_up", reason), ("none",).
    """
    if not state.active:
        return state, ("none",)
    if event == "power_above_threshold":
        state.give_up_reason = "cs_busy"
        return state, ("give_up", "cs_busy")
    if event == "nav_active":
        state.give_up_reason = "nav"
        return state, ("give_up", "nav")
    if event == "slot_idle":
        if state.backoff_remaining > 0:
            state.backoff_remaining -= 1
        return state, ("none",)
    if event == "backoff_expired":
        if state.backoff_remaining != 0:
            raise ValueError("contention backoff has not elapsed")
        return state, ("start_relay_tx", state.computed_rate)
    raise ValueError(f"unknown contention event {event!r}")


def ideal_relay_select(candidates):
    """Best candidate by channel quality toward the destination, or None.

    ``candidates`` is an iterable of (node, gamma_cd); ties resolve to the
    earliest listed node so the choice is deterministic.
    """
    best = None
    best_gamma = -1.0
    for node, gamma in candidates:
        if gamma > best_gamma:
            best = node
            best_gamma = gamma
    return best
