"""CSMA/DCF medium access state machine: DIFS-gated backoff with freeze and
resume, retry accounting against the short retry limit, and NAV virtual
carrier sense.

The state machine is driven by discrete events; the simulator batches long
idle stretches through advance_idle_run, which is step-for-step equivalent to
repeated channel_idle_slot events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import dbm_to_watts

__all__ = [
    "MacConfig",
    "Frame",
    "MacState",
    "ProtocolError",
    "draw_backoff",
    "step",
    "nav_update",
    "advance_idle_run",
    "format_trace_line",
]

PHASES = ("idle", "backoff", "frozen", "transmitting", "awaiting_ack",
          "awaiting_nack_window")
EVENTS = ("channel_busy", "channel_idle_slot", "backoff_expired", "frame_rx",
          "ack_timeout", "enqueue", "tx_end")


class ProtocolError(RuntimeError):
    """An event arrived in a phase where it is not legal."""


@dataclass(frozen=True)
class MacConfig:
    cw_start: int = 5
    srl: int = 5                     # 5 basic, 4 cooperative
    slot: float = 10e-6
    difs: float = 128e-6
    sifs: float = 10e-6
    cs_threshold: float = dbm_to_watts(-100.0)

    def __post_init__(self):
        if self.srl < 1 or self.cw_start < 1:
            raise ValueError("srl and cw_start must be at least 1")
        if min(self.slot, self.difs, self.sifs) <= 0:
            raise ValueError("slot, DIFS and SIFS must be positive")

    @property
    def difs_slots(self) -> int:
        """Continuous idle slots required before the countdown may run."""
        return int(math.ceil(self.difs / self.slot - 1e-9))


@dataclass
class Frame:
    kind: str                  # DATA | ACK | NACK | RELAY
    src: int
    dst: int
    header_bits: int
    body_bits: int
    rate: float                # bits/s of the body portion
    header_rate: float         # bits/s of the header portion
    duration_field: float      # declared medium occupancy beyond frame end
    nack_sinr_index: int | None = None
    payload_id: int | None = None
    round_id: int | None = None

    def __post_init__(self):
        if self.kind not in ("DATA", "ACK", "NACK", "RELAY"):
            raise ValueError(f"unknown frame kind {self.kind!r}")
        if self.kind in ("ACK", "NACK") and self.rate != self.header_rate:
            raise ValueError("control frames are carried entirely at the control rate")

    @property
    def header_duration(self) -> float:
        return self.header_bits / self.header_rate

    @property
    def body_duration(self) -> float:
        return self.body_bits / self.rate if self.body_bits else 0.0

    @property
    def duration(self) -> float:
        return self.header_duration + self.body_duration


@dataclass
class MacState:
    node: int
    phase: str = "idle"
    attempt_index: int = 0
    backoff_remaining: int = 0
    idle_streak: int = 0       # continuous idle slots seen since last busy
    nav_until: float = 0.0
    queue: list = field(default_factory=list)

    def nav_active(self, now: float) -> bool:
        return now < self.nav_until - 1e-12


def draw_backoff(attempt_index: int, cfg: MacConfig, rng: np.random.Generator) -> int:
    """Uniform backoff in [1, 2^(cw_start + attempt_index - 1)] slots."""
    if attempt_index >= cfg.srl:
        raise ValueError("attempt index beyond the short retry limit")
    hi = 2 ** (cfg.cw_start + attempt_index - 1)
    return int(rng.integers(1, hi + 1))


def _begin_access(state: MacState, cfg: MacConfig, rng) -> None:
    state.backoff_remaining = draw_backoff(state.attempt_index, cfg, rng)
    state.idle_streak = 0
    state.phase = "frozen"


def _finish_payload(state: MacState, cfg: MacConfig, rng) -> None:
    state.queue.pop(0)
    state.attempt_index = 0
    if state.queue:
        _begin_access(state, cfg, rng)
    else:
        state.phase = "idle"


def step(state: MacState, event: str, now: float, cfg: MacConfig,
         rng: np.random.Generator | None = None, frame: Frame | None = None,
         payload=None):
    """Apply one event; returns the action list (the state mutates in place).

    Actions: ("start_tx", payload_id), ("drop_packet", payload_id),
    ("set_timer",), ("none",).
    """
    if event not in EVENTS:
        raise ProtocolError(f"unknown event {event!r}")
    phase = state.phase

    if event == "enqueue":
        state.queue.append(payload)
        if phase == "idle":
            _begin_access(state, cfg, rng)
        return [("none",)]

    if event == "channel_busy":
        if phase in ("frozen", "backoff"):
            state.idle_streak = 0
            state.phase = "frozen"
            return [("none",)]
        if phase in ("idle", "transmitting", "awaiting_ack", "awaiting_nack_window"):
            return [("none",)]

    if event == "channel_idle_slot":
        if phase == "frozen":
            if state.nav_active(now):
                state.idle_streak = 0
            else:
                state.idle_streak += 1
                if state.idle_streak >= cfg.difs_slots:
                    state.phase = "backoff"
            return [("none",)]
        if phase == "backoff":
            if state.nav_active(now):
                state.idle_streak = 0
                state.phase = "frozen"
            elif state.backoff_remaining > 0:
                state.backoff_remaining -= 1
            return [("none",)]
        if phase in ("idle", "transmitting", "awaiting_ack", "awaiting_nack_window"):
            return [("none",)]

    if event == "backoff_expired":
        if phase != "backoff" or state.backoff_remaining != 0:
            raise ProtocolError("backoff_expired outside an elapsed backoff")
        state.phase = "transmitting"
        return [("start_tx", state.queue[0])]

    if event == "tx_end":
        if phase != "transmitting":
            raise ProtocolError("tx_end while not transmitting")
        state.phase = "awaiting_ack"
        return [("set_timer",)]

    if event == "frame_rx":
        if frame is None:
            raise ProtocolError("frame_rx without a frame")
        if phase == "awaiting_ack":
            if frame.kind == "ACK" and frame.dst == state.node:
                _finish_payload(state, cfg, rng)
                return [("none",)]
            if frame.kind == "NACK" and frame.dst == state.node:
                state.phase = "awaiting_nack_window"
                return [("set_timer",)]
            return [("none",)]
        if phase == "awaiting_nack_window":
            if frame.kind == "ACK" and frame.dst == state.node:
                _finish_payload(state, cfg, rng)
                return [("none",)]
            if frame.kind == "RELAY" and frame.dst == state.node:
                return [("set_timer",)]
            return [("none",)]
        if phase in ("frozen", "backoff"):
            # a late acknowledgment for the head payload ends the retry
            if frame.kind == "ACK" and frame.dst == state.node and state.queue:
                _finish_payload(state, cfg, rng)
            return [("none",)]
        return [("none",)]

    if event == "ack_timeout":
        if phase not in ("awaiting_ack", "awaiting_nack_window"):
            raise ProtocolError("ack_timeout outside an acknowledgment wait")
        state.attempt_index += 1
        if state.attempt_index >= cfg.srl:
            payload = state.queue[0]
            _finish_payload(state, cfg, rng)
            return [("drop_packet", payload)]
        _begin_access(state, cfg, rng)
        return [("none",)]

    raise ProtocolError(f"event {event!r} not legal in phase {phase!r}")


def nav_update(state: MacState, overheard_header: Frame, now: float) -> MacState:
    """Extend the virtual carrier-sense horizon from an overheard header."""
    state.nav_until = max(state.nav_until, now + overheard_header.duration_field)
    return state


def advance_idle_run(state: MacState, n_slots: int, cfg: MacConfig,
                     slot_of_first: int):
    """Equivalent of n_slots channel_idle_slot events with no NAV inside.

    Returns the number of slots consumed until (and including) the one whose
    countdown reached zero, or None if the run ends with backoff pending.
    Callers must ensure the NAV is inactive over the whole run.
    """
    if state.phase == "frozen":
        need = cfg.difs_slots - state.idle_streak
        if n_slots < need:
            state.idle_streak += n_slots
            return None
        state.idle_streak = cfg.difs_slots
        state.phase = "backoff"
        used = need
    elif state.phase == "backoff":
        used = 0
    else:
        return None
    left = n_slots - used
    if left >= state.backoff_remaining:
        used += state.backoff_remaining
        state.backoff_remaining = 0
        return used
    state.backoff_remaining -= left
    return None


def format_trace_line(time_us: float, node: int, phase_before: str, event: str,
                      phase_after: str, action: str) -> str:
    return f"{time_us:.1f},{node},{phase_before},{event},{phase_after},{action}"


class MacTracer:
    """Conformance wrapper: drives step() and records one line per
    transition in the time_us,node,phase_before,event,phase_after,action
    format."""

    def __init__(self, state: MacState, cfg: MacConfig):
        self.state = state
        self.cfg = cfg
        self.lines = []

    def step(self, event: str, now: float, rng=None, frame=None, payload=None):
        before = self.state.phase
        actions = step(self.state, event, now, self.cfg, rng, frame, payload)
        label = ";".join(a[0] for a in actions)
        self.lines.append(format_trace_line(
            now * 1e6, self.state.node, before, event, self.state.phase, label))
        return actions
