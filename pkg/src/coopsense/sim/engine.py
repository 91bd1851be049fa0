"""Event-driven network core.

Time is continuous; medium access is slotted. Between transmission starts
and ends the channel composition is constant, so the engine advances in
"epochs": receiver bookkeeping integrates mutual information over fading
blocks, and contending nodes consume idle/busy slots in batch. Backoff
expiries inside an epoch are projected ahead and scheduled as transmission
starts; any channel change invalidates outstanding projections through a
generation counter.

Receiver model: an idle radio locks onto the earliest arriving frame whose
received power clears the detection threshold (strongest wins a tie); while
locked everything else is interference. Headers and payloads decode when
their integrated capacity reaches their bit count. A failed header releases
the radio; a decoded header of a foreign frame arms the NAV.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .. import mac as mac_mod
from ..channel import PropagationParams, RateParams
from ..dharq import DharqConfig, dequantize_sinr, ideal_relay_select, quantize_sinr, relay_rate
from ..mac import Frame, MacConfig, MacState
from ..units import watts_to_dbm
from .fading import FadingField
from .metrics import MetricsReport
from .topology import Topology

# event priorities at equal times: free the medium, settle headers, then new
# transmissions, then timers and bookkeeping
P_TX_END, P_HEADER_END, P_TX_START, P_TIMER, P_CLOSE, P_ARRIVAL = range(6)

_MI_EPS = 1e-6      # bits of slack against float rounding in decode checks


@dataclass
class _Payload:
    pid: int
    src: int
    dst: int
    bits: int
    born: float
    delivered_at: float | None = None
    dropped_at: float | None = None
    attempts: int = 0


@dataclass
class _Round:
    rid: int
    src: int
    dst: int
    pid: int
    t_start: float
    outcome: str | None = None
    payload_mi: float = 0.0
    relay_mi: float = 0.0
    gamma_bin: int | None = None
    gamma_avg_true: float = 0.0
    payload_decoders: list = field(default_factory=list)
    eligible: list = field(default_factory=list)
    relay_txs: int = 0
    delivered_via_relay: bool = False
    closed: bool = False
    ideal_horizon: float | None = None


@dataclass
class _Reception:
    frame: Frame
    rx: int
    t_lock: float
    last_update: float
    mi_header: float = 0.0
    mi_payload: float = 0.0
    sinr_int_payload: float = 0.0
    sinr_int_frame: float = 0.0
    header_decided: bool | None = None


@dataclass
class _ActiveTx:
    frame: Frame
    start: float
    end: float
    s0: int
    s1: int   # occupied slots [s0, s1)


class _NodeRt:
    """Per-node runtime: MAC state, radio, rngs, counters."""

    def __init__(self, idx, mac_rng, relay_rng, traffic_rng):
        self.idx = idx
        self.mac = MacState(node=idx)
        self.mac_rng = mac_rng
        self.relay_rng = relay_rng
        self.traffic_rng = traffic_rng
        self.advanced_to = 0        # MAC slot cursor
        self.pending_expiry = None  # slot of a scheduled DCF start
        self.timer_token = 0
        self.nav_entries = {}       # round id (or None) -> horizon seconds
        self.tx_until = 0.0         # own radio busy while transmitting

    def nav_until(self, exclude_round=None):
        vals = [u for r, u in self.nav_entries.items() if r != exclude_round]
        return max(vals) if vals else 0.0

    def prune_nav(self, now):
        self.nav_entries = {r: u for r, u in self.nav_entries.items() if u > now}


class _RelayContender:
    def __init__(self, node, rid, remaining, rate, start_slot):
        self.node = node
        self.rid = rid
        self.remaining = remaining
        self.rate = rate
        self.cursor = start_slot
        self.done = False


class Engine:
    def __init__(self, topo: Topology, protocol: str,
                 props: PropagationParams, rates: RateParams,
                 mac_cfg: MacConfig, dharq_cfg: DharqConfig,
                 lambda_kbps: float, neighbor_radius: float, duration: float,
                 seed_seq: np.random.SeedSequence, dest_ring_frac: float = 0.6,
                 block_slots: int = 16, oscillators: int = 16,
                 warmup_frac: float = 0.1, sync_capture_db: float = 20.0,
                 collect_events: bool = False,
                 check_invariants: bool = False):
        if protocol not in ("csma", "dharq", "dharq_ideal_bound"):
            raise ValueError(f"unknown protocol {protocol!r}")
        if props.cs_threshold <= props.noise_floor:
            raise ValueError("carrier sense threshold must exceed the noise floor")
        self.topo = topo
        self.protocol = protocol
        self.props = props
        self.rates = rates
        self.mac_cfg = mac_cfg
        self.dharq_cfg = dharq_cfg
        self.duration = duration
        self.warmup = warmup_frac * duration
        self.collect_events = collect_events
        self.check_invariants = check_invariants

        n = topo.n_nodes
        pos = topo.positions
        d = topo.distances()
        with np.errstate(divide="ignore"):
            self.mean_pw = props.tx_power * props.ref_loss \
                * d ** (-props.path_loss_exp)
        np.fill_diagonal(self.mean_pw, 0.0)
        self.neighbors = [np.where((d[i] <= neighbor_radius)
                                   & (np.arange(n) != i))[0] for i in range(n)]
        ring_lo = dest_ring_frac * neighbor_radius
        self.dest_pool = []
        for i in range(n):
            ring = np.where((d[i] <= neighbor_radius) & (d[i] > ring_lo)
                            & (np.arange(n) != i))[0]
            self.dest_pool.append(ring if ring.size else self.neighbors[i])
        self.dist = d

        fading_ss, traffic_ss, mac_ss, relay_ss, lock_ss = seed_seq.spawn(5)
        self.lock_rng = np.random.default_rng(lock_ss)
        self.sync_capture = 10.0 ** (sync_capture_db / 10.0)
        self.slot = mac_cfg.slot
        self.block_slots = block_slots
        self.block_dt = block_slots * mac_cfg.slot
        self.field = FadingField(n, props.max_doppler, self.block_dt,
                                 np.random.default_rng(fading_ss), oscillators)
        t_streams = traffic_ss.spawn(n)
        m_streams = mac_ss.spawn(n)
        r_streams = relay_ss.spawn(n)
        self.nodes = [
            _NodeRt(i, np.random.default_rng(m_streams[i]),
                    np.random.default_rng(r_streams[i]),
                    np.random.default_rng(t_streams[i]))
            for i in range(n)
        ]

        self.arrival_rate = lambda_kbps * 1e3 / rates.payload_bits  # payloads/s
        self.margin = props.cs_threshold - props.noise_floor
        self.relay_margin = dharq_cfg.relay_cs_threshold - props.noise_floor

        self.heap = []
        self._seq = 0
        self.now = 0.0
        self.channel_gen = 0
        self.active: list[_ActiveTx] = []
        self.receptions: dict[int, _Reception] = {}
        self.contenders: set[int] = set()
        self.relay_contenders: list[_RelayContender] = []
        self.payloads: dict[int, _Payload] = {}
        self.rounds: dict[int, _Round] = {}
        self._pid = 0
        self._rid = 0
        self.events: list[str] = []

        # metric counters (measurement window only)
        self.win = (self.warmup, duration)
        self.ctr_outcomes = {k: 0 for k in ("success_direct", "lost_header",
                                            "coop_requested")}
        self.ctr_coop = {k: 0 for k in ("success", "empty_contention",
                                        "failure_wo_tx", "failure_with_tx")}
        self.ctr_giveup = {k: 0 for k in ("cs_busy", "rate_too_low", "nav")}
        self.relay_samples = []
        self.relay_tx_count = 0
        self.nack_count = 0

        self.ack_airtime = rates.ack_bits / rates.rho_ctrl
        self.hdr_airtime = rates.header_bits / rates.rho_ctrl
        self.data_airtime = self.hdr_airtime + rates.payload_bits / rates.rho_data
        self.basic_timeout = mac_cfg.sifs + self.ack_airtime + mac_cfg.slot
        # a source that heard the NACK waits through the relay contention
        # window; a relay transmission it decodes extends the wait further
        self.contention_timeout = (mac_cfg.sifs
                                   + (dharq_cfg.cw_rel + 2) * mac_cfg.slot)

        if self.arrival_rate > 0:
            for node in self.nodes:
                self._schedule_arrival(node)

    # ------------------------------------------------------------ scheduling

    def _push(self, t, prio, kind, data):
        self._seq += 1
        heapq.heappush(self.heap, (t, prio, self._seq, kind, data))

    def _schedule_arrival(self, node):
        gap = node.traffic_rng.exponential(1.0 / self.arrival_rate)
        t = self.now + gap
        if t <= self.duration:
            self._push(t, P_ARRIVAL, "arrival", node.idx)

    def _log(self, t, etype, src, dst, detail=""):
        if self.collect_events:
            self.events.append(f"{t * 1e6:.1f},{etype},{src},{dst},{detail}")

    # ------------------------------------------------------------ gains

    def _powers(self, srcs, rx_nodes, blocks):
        """Received powers (n_src, n_rx, n_blocks) from fading and path loss."""
        srcs = np.asarray(srcs)
        rx_nodes = np.asarray(rx_nodes)
        pid_grid = self.field.pair_id(srcs[:, None], rx_nodes[None, :])
        flat = pid_grid.ravel()
        g = self.field.gains(flat, blocks).reshape(len(srcs), len(rx_nodes),
                                                   len(blocks))
        scale = self.mean_pw[srcs[:, None], rx_nodes[None, :]]
        return g * scale[:, :, None]

    def _sensed_power(self, node, slot):
        """Aggregate foreign power at a node during one slot (plus nothing:
        the noise floor is added by the caller's margin)."""
        frames = [a for a in self.active
                  if a.s0 <= slot < a.s1 and a.frame.src != node]
        if not frames:
            return 0.0
        block = (slot * self.slot) // self.block_dt
        total = 0.0
        for a in frames:
            total += self.mean_pw[a.frame.src, node] * self.field.gain_one(
                a.frame.src, node, int(block))
        return total

    # ------------------------------------------------------------ MI updates

    def _integrate_receptions(self, t):
        for rec in self.receptions.values():
            b = min(t, rec.frame.header_duration + rec.t_lock
                    + rec.frame.body_duration)
            self._integrate_one(rec, b)

    def _integrate_one(self, rec, t_to):
        a = rec.last_update
        if t_to <= a + 1e-15:
            return
        frame = rec.frame
        rx = rec.rx
        srcs = [ac.frame.src for ac in self.active]
        if frame.src not in srcs:
            srcs.append(frame.src)  # defensive; the own frame is active
        b0 = int(a / self.block_dt + 1e-12)
        b1 = int(math.ceil(t_to / self.block_dt - 1e-12))
        blocks = np.arange(b0, max(b1, b0 + 1))
        pw = self._powers(srcs, [rx], blocks)[:, 0, :]   # (n_src, n_blocks)
        own = srcs.index(frame.src)
        sig = pw[own]
        interf = pw.sum(axis=0) - sig
        sinr = sig / (self.props.noise_floor + interf)
        cap = self.props.bandwidth * np.log2(1.0 + sinr)

        hdr_end = rec.t_lock + frame.header_duration
        edges_lo = np.maximum(blocks * self.block_dt, a)
        edges_hi = np.minimum((blocks + 1) * self.block_dt, t_to)
        for p0, p1, is_hdr in ((a, min(t_to, hdr_end), True),
                               (max(a, hdr_end), t_to, False)):
            if p1 <= p0:
                continue
            dur = np.clip(np.minimum(edges_hi, p1) - np.maximum(edges_lo, p0),
                          0.0, None)
            mi = float(np.dot(dur, cap))
            if is_hdr:
                rec.mi_header += mi
            else:
                rec.mi_payload += mi
                rec.sinr_int_payload += float(np.dot(dur, sinr))
            rec.sinr_int_frame += float(np.dot(dur, sinr))
        rec.last_update = t_to

    # ------------------------------------------------------------ CS advance

    def _busy_matrix(self, node_ids, s0, s1):
        """Per-slot foreign-power busy mask for each node over [s0, s1)."""
        n_slots = s1 - s0
        agg = np.zeros((len(node_ids), n_slots))
        own = np.zeros((len(node_ids), n_slots), dtype=bool)
        frames = [a for a in self.active if a.s1 > s0 and a.s0 < s1]
        if frames:
            b_lo = (s0 * self.slot) // self.block_dt
            b_hi = ((s1 - 1) * self.slot) // self.block_dt
            blocks = np.arange(int(b_lo), int(b_hi) + 1)
            slot_block = ((np.arange(s0, s1) * self.slot) // self.block_dt
                          ).astype(int) - int(b_lo)
            srcs = [a.frame.src for a in frames]
            pw = self._powers(srcs, node_ids, blocks)   # (src, node, block)
            per_slot = pw[:, :, slot_block]             # (src, node, slot)
            for k, a in enumerate(frames):
                lo = max(a.s0, s0) - s0
                hi = min(a.s1, s1) - s0
                mask = np.zeros(n_slots, dtype=bool)
                mask[lo:hi] = True
                contrib = np.where(mask[None, :], per_slot[k], 0.0)
                for j, nid in enumerate(node_ids):
                    if a.frame.src == nid:
                        own[j] |= mask
                    else:
                        agg[j] += contrib[j]
        return agg, own

    def _walk_slots(self, phase, streak, remaining, busy_mask, limit):
        """Pure DIFS/backoff walk over up to ``limit`` slots.

        busy_mask may be None for an all-idle stretch. Returns
        (expiry_offset_or_None, phase, streak, remaining) where the offset
        counts consumed slots; the transmission starts at the next boundary.
        """
        need = self.mac_cfg.difs_slots
        if phase == "backoff" and remaining == 0:
            return 0, phase, streak, 0
        if busy_mask is None:
            used = 0
            if phase == "frozen":
                gap = need - streak
                if limit < gap:
                    return None, "frozen", streak + limit, remaining
                used = gap
                streak = need
                phase = "backoff"
            left = limit - used
            if left >= remaining:
                return used + remaining, "backoff", streak, 0
            return None, "backoff", streak, remaining - left
        for k in range(limit):
            if busy_mask[k]:
                streak = 0
                phase = "frozen"
                continue
            if phase == "frozen":
                streak += 1
                if streak >= need:
                    phase = "backoff"
                continue
            remaining -= 1
            if remaining == 0:
                return k + 1, "backoff", streak, 0
        return None, phase, streak, remaining

    def _relay_scan(self, contender, busy_mask, nav_until, s0, limit):
        """Pure contention scan: ('expire'|'giveup'|'none', offset, reason)."""
        remaining = contender.remaining
        for k in range(limit):
            if nav_until > (s0 + k) * self.slot + 1e-12:
                return "giveup", k, "nav"
            if busy_mask is not None and busy_mask[k]:
                return "giveup", k, "cs_busy"
            remaining -= 1
            if remaining == 0:
                return "expire", k + 1, None
        return "none", limit, None

    def _advance_all(self, to_slot):
        """Advance MAC contenders and relay contenders together, clipping at
        the earliest projected transmission start (which changes the channel
        for everyone past that slot)."""
        while True:
            mac_todo = [self.nodes[i] for i in sorted(self.contenders)
                        if self.nodes[i].advanced_to < to_slot
                        and self.nodes[i].pending_expiry is None]
            relay_todo = [c for c in self.relay_contenders
                          if not c.done and c.cursor < to_slot]
            if not mac_todo and not relay_todo:
                return
            s_lo = min([n.advanced_to for n in mac_todo]
                       + [c.cursor for c in relay_todo])
            busy = busy_rel = None
            if self.active:
                ids = sorted({n.idx for n in mac_todo}
                             | {c.node for c in relay_todo})
                agg, own = self._busy_matrix(ids, s_lo, to_slot)
                col = {nid: j for j, nid in enumerate(ids)}
                busy = (agg >= self.margin) | own
                busy_rel = (agg >= self.relay_margin) | own

            mac_proj = []
            earliest = to_slot + 1
            for node in mac_todo:
                start = node.advanced_to
                limit = to_slot - start
                nav_end = node.nav_until()
                nav_slots = int(math.ceil(nav_end / self.slot - 1e-9))
                mask = None
                if busy is not None:
                    mask = busy[col[node.idx], start - s_lo:to_slot - s_lo]
                if nav_slots > start:
                    mask = (np.zeros(limit, dtype=bool) if mask is None
                            else mask.copy())
                    mask[:min(nav_slots - start, limit)] = True
                res = self._walk_slots(node.mac.phase, node.mac.idle_streak,
                                       node.mac.backoff_remaining, mask, limit)
                mac_proj.append((node, start, mask, res))
                if res[0] is not None:
                    earliest = min(earliest, start + res[0])

            relay_proj = []
            for c in relay_todo:
                mask = None
                if busy_rel is not None:
                    mask = busy_rel[col[c.node], c.cursor - s_lo:to_slot - s_lo]
                nav_end = self.nodes[c.node].nav_until(exclude_round=c.rid)
                res = self._relay_scan(c, mask, nav_end, c.cursor,
                                       to_slot - c.cursor)
                relay_proj.append((c, res))
                if res[0] == "expire":
                    earliest = min(earliest, c.cursor + res[1])

            cap = min(to_slot, earliest)
            for node, start, mask, res in mac_proj:
                off, ph, st, rem = res
                if off is not None and start + off <= cap:
                    node.mac.phase, node.mac.idle_streak = ph, st
                    node.mac.backoff_remaining = 0
                    node.advanced_to = start + off
                    if start + off == earliest:
                        node.pending_expiry = earliest
                        self._push(earliest * self.slot, P_TX_START, "mac_tx",
                                   (node.idx, self.channel_gen))
                    continue
                span = cap - start
                if span <= 0:
                    continue
                _, ph, st, rem = self._walk_slots(
                    node.mac.phase, node.mac.idle_streak,
                    node.mac.backoff_remaining,
                    None if mask is None else mask[:span], span)
                node.mac.phase, node.mac.idle_streak = ph, st
                node.mac.backoff_remaining = rem
                node.advanced_to = cap

            for c, (kind, off, reason) in relay_proj:
                # off: idle slots consumed (expire: incl. the last; giveup:
                # before the blocking slot; none: the whole window)
                if kind == "expire" and c.cursor + off <= cap:
                    c.done = True
                    c.cursor += off
                    self._push(c.cursor * self.slot, P_TX_START, "relay_tx",
                               (c.node, c.rid, c.rate, self.channel_gen))
                elif kind == "giveup" and c.cursor + off < cap:
                    c.remaining -= off
                    c.cursor += off
                    self._giveup(c, reason)
                else:
                    partial = min(off, cap - c.cursor)
                    c.remaining -= partial
                    c.cursor += partial
            self.relay_contenders = [c for c in self.relay_contenders
                                     if not c.done]
            if cap >= to_slot:
                return
            if earliest <= to_slot:
                return  # a transmission start is scheduled; the loop resumes there

    def _giveup(self, contender, reason):
        contender.done = True
        rnd = self.rounds[contender.rid]
        if self._in_window(rnd.t_start):
            self.ctr_giveup[reason] += 1
        self._log(self.now, "give_up", contender.node, rnd.dst,
                  f"{reason},round={contender.rid}")
        if rnd.ideal_horizon is not None:
            # the idealized signalling also reports the abort instantly
            node = self.nodes[rnd.src]
            if node.mac.phase == "awaiting_nack_window":
                self._arm_timer(node, self.now + self.mac_cfg.slot)

    # ------------------------------------------------------------ helpers

    def _in_window(self, t):
        return self.win[0] <= t <= self.win[1]

    def _slot_of(self, t):
        return int(t / self.slot + 1e-9)

    def _sync_to(self, t):
        self._integrate_receptions(t)
        self._advance_all(self._slot_of(t))
        self.now = t

    def _project(self):
        if not self.heap:
            return
        horizon = min(self.heap[0][0], self.duration)
        self._advance_all(self._slot_of(horizon))

    def _refresh_contender(self, node):
        node.prune_nav(self.now)
        if node.mac.phase in ("frozen", "backoff"):
            self.contenders.add(node.idx)
            node.advanced_to = max(node.advanced_to, self._slot_of(self.now))
        else:
            self.contenders.discard(node.idx)

    def _arm_timer(self, node, deadline):
        node.timer_token += 1
        self._push(deadline, P_TIMER, "ack_timeout", (node.idx, node.timer_token))

    # ------------------------------------------------------------ frames

    def _make_data_frame(self, src, payload: _Payload, rid):
        reserve = self.rates.payload_bits / self.rates.rho_data \
            + self.mac_cfg.sifs + self.ack_airtime
        return Frame("DATA", src, payload.dst, self.rates.header_bits,
                     self.rates.payload_bits, self.rates.rho_data,
                     self.rates.rho_ctrl, duration_field=reserve,
                     payload_id=payload.pid, round_id=rid)

    def _make_ctrl_frame(self, kind, src, dst, rid, reserve, sinr_idx=None):
        return Frame(kind, src, dst, self.rates.ack_bits, 0,
                     self.rates.rho_ctrl, self.rates.rho_ctrl,
                     duration_field=reserve, nack_sinr_index=sinr_idx,
                     round_id=rid)

    def _make_relay_frame(self, src, dst, rid, rate):
        reserve = (self.rates.payload_bits / rate + self.mac_cfg.sifs
                   + self.ack_airtime)
        return Frame("RELAY", src, dst, self.rates.header_bits,
                     self.rates.payload_bits, rate, self.rates.rho_ctrl,
                     duration_field=reserve, round_id=rid)

    def _start_frames(self, frames, t):
        """All frames begin at t; lock idle radios onto the strongest
        detectable arrival."""
        started = []
        for fr in frames:
            node = self.nodes[fr.src]
            if fr.src in self.receptions:
                del self.receptions[fr.src]   # half duplex: tx preempts rx
            end = t + fr.duration
            node.tx_until = max(node.tx_until, end)
            s0 = self._slot_of(t)
            s1 = int(math.ceil(end / self.slot - 1e-9))
            tx = _ActiveTx(fr, t, end, s0, max(s1, s0 + 1))
            self.active.append(tx)
            started.append(tx)
            self._push(end, P_TX_END, "tx_end", tx)
            if fr.header_duration < fr.duration:
                self._push(t + fr.header_duration, P_HEADER_END, "hdr_end", tx)
            self._log(t, "tx_start", fr.src, fr.dst,
                      f"{fr.kind},round={fr.round_id}")
        # lock decisions: all arrivals here sit far above the detection
        # threshold, so simultaneous preambles contend for the correlator;
        # the strongest wins sync only if it clears the runner-up by the
        # capture margin, otherwise the outcome is an arbitrary pick
        block = int(t / self.block_dt)
        for node in self.nodes:
            i = node.idx
            if i in self.receptions or node.tx_until > t + 1e-12:
                continue
            detectable = []
            for tx in started:
                if tx.frame.src == i:
                    continue
                pw = self.mean_pw[tx.frame.src, i] * self.field.gain_one(
                    tx.frame.src, i, block)
                if pw >= self.props.detection_threshold:
                    detectable.append((pw, tx))
            if not detectable:
                continue
            if len(detectable) == 1:
                pick = detectable[0][1]
            else:
                detectable.sort(key=lambda e: -e[0])
                if detectable[0][0] >= self.sync_capture * detectable[1][0]:
                    pick = detectable[0][1]
                else:
                    pick = detectable[int(self.lock_rng.integers(
                        0, len(detectable)))][1]
            self.receptions[i] = _Reception(pick.frame, i, t, t)
        self.channel_gen += 1
        for n in self.nodes:
            if n.pending_expiry is not None and n.pending_expiry > self._slot_of(t):
                n.pending_expiry = None   # stale projection, will re-project

    # ------------------------------------------------------------ event core

    def run(self):
        while self.heap:
            t, prio, _, kind, data = self.heap[0]
            if t > self.duration:
                break
            heapq.heappop(self.heap)
            batch = [(kind, data)]
            while self.heap and self.heap[0][0] == t and self.heap[0][1] == prio:
                _, _, _, k2, d2 = heapq.heappop(self.heap)
                batch.append((k2, d2))
            self._sync_to(t)
            if prio == P_TX_START:
                self._handle_tx_starts(batch, t)
            elif prio == P_TX_END:
                self._handle_tx_ends(batch, t)
            elif prio == P_HEADER_END:
                for _, tx in batch:
                    self._handle_header_end(tx, t)
            else:
                for k2, d2 in batch:
                    self._dispatch(k2, d2, t)
            self._project()
        self.now = self.duration
        return self._report()

    def _dispatch(self, kind, data, t):
        if kind == "arrival":
            self._handle_arrival(data, t)
        elif kind == "ack_timeout":
            self._handle_timeout(data, t)
        elif kind == "round_close":
            self._close_round(data, t)
        else:
            raise RuntimeError(f"unhandled event {kind}")

    # -- transmission starts

    def _handle_tx_starts(self, batch, t):
        frames = []
        for kind, data in batch:
            if kind == "mac_tx":
                idx, gen = data
                node = self.nodes[idx]
                if gen != self.channel_gen or node.pending_expiry is None:
                    node.pending_expiry = None
                    continue
                node.pending_expiry = None
                if self.check_invariants and self._slot_of(t) > 0:
                    sensed = self._sensed_power(idx, self._slot_of(t) - 1)
                    level = watts_to_dbm(sensed + self.props.noise_floor)
                    assert sensed < self.margin, \
                        f"tx start while medium busy at {level:.1f} dBm"
                payload = self.payloads[node.mac.queue[0]]
                actions = mac_mod.step(node.mac, "backoff_expired", t,
                                       self.mac_cfg, node.mac_rng)
                assert actions[0][0] == "start_tx"
                self._refresh_contender(node)
                rid = self._rid
                self._rid += 1
                rnd = _Round(rid, idx, payload.dst, payload.pid, t)
                self.rounds[rid] = rnd
                payload.attempts += 1
                frames.append(self._make_data_frame(idx, payload, rid))
            elif kind == "relay_tx":
                rnode, rid, rate, gen = data
                # the relay sensed idle through its whole window; a same-slot
                # start elsewhere cannot retract it
                if self.check_invariants and self._slot_of(t) > 0:
                    sensed = self._sensed_power(rnode, self._slot_of(t) - 1)
                    assert sensed < self.relay_margin
                rnd = self.rounds[rid]
                rnd.relay_txs += 1
                self.relay_tx_count += 1
                frames.append(self._make_relay_frame(rnode, rnd.dst, rid, rate))
                self._log(t, "relay_tx", rnode, rnd.dst,
                          f"rate={rate:.0f},round={rid}")
            elif kind == "ctrl":
                fr = data
                if self.nodes[fr.src].tx_until > t + 1e-12:
                    continue   # radio already talking; drop the response
                frames.append(fr)
        if frames:
            self._start_frames(frames, t)

    # -- header settlement

    def _handle_header_end(self, tx, t):
        frame = tx.frame
        for rx in sorted(self.receptions):
            rec = self.receptions[rx]
            if rec.frame is not frame or rec.header_decided is not None:
                continue
            ok = rec.mi_header + _MI_EPS >= frame.header_bits
            rec.header_decided = ok
            if not ok:
                del self.receptions[rx]   # resync: radio free for later frames
                continue
            if frame.dst != rx:
                # the duration field declares occupancy from the header end
                node = self.nodes[rx]
                node.nav_entries[frame.round_id] = max(
                    node.nav_entries.get(frame.round_id, 0.0),
                    t + frame.duration_field)
                node.pending_expiry = None   # NAV may stretch past projections

    # -- transmission ends

    def _handle_tx_ends(self, batch, t):
        ended = [tx for _, tx in batch]
        recs_by_frame = {}
        for rx in sorted(self.receptions):
            rec = self.receptions[rx]
            for tx in ended:
                if rec.frame is tx.frame:
                    recs_by_frame.setdefault(id(tx), []).append(rec)
        for tx in ended:
            self.active.remove(tx)
        self.channel_gen += 1
        for tx in ended:
            recs = recs_by_frame.get(id(tx), [])
            for rec in recs:
                del self.receptions[rec.rx]
            kind = tx.frame.kind
            if kind == "DATA":
                self._finish_data(tx, recs, t)
            elif kind == "ACK":
                self._finish_ack(tx, recs, t)
            elif kind == "NACK":
                self._finish_nack(tx, recs, t)
            elif kind == "RELAY":
                self._finish_relay(tx, recs, t)
            self._log(t, "tx_end", tx.frame.src, tx.frame.dst, kind)

    def _finish_data(self, tx, recs, t):
        frame = tx.frame
        rnd = self.rounds[frame.round_id]
        payload = self.payloads[frame.payload_id]
        dst_rec = None
        for rec in recs:
            if rec.header_decided is not True:
                continue
            if rec.rx == frame.dst:
                dst_rec = rec
            elif rec.rx != frame.src and \
                    rec.mi_payload + _MI_EPS >= frame.body_bits:
                rnd.payload_decoders.append(rec.rx)

        payload_dur = frame.body_duration
        outcome = "lost_header"
        if dst_rec is not None:
            rnd.payload_mi = dst_rec.mi_payload
            rnd.gamma_avg_true = dst_rec.sinr_int_payload / payload_dur
            rnd.gamma_bin = quantize_sinr(rnd.gamma_avg_true, self.dharq_cfg)
            decoded = dst_rec.mi_payload + _MI_EPS >= frame.body_bits
            if decoded or payload.delivered_at is not None:
                outcome = "success_direct"
                if payload.delivered_at is None:
                    payload.delivered_at = t
                self._send_ctrl("ACK", frame.dst, frame.src, rnd.rid, t, 0.0)
            else:
                outcome = "coop_requested"
        rnd.outcome = outcome
        if self._in_window(rnd.t_start):
            self.ctr_outcomes[outcome] += 1
        self._log(t, "decode_result", frame.src, frame.dst,
                  f"{outcome},round={rnd.rid}")

        if outcome == "coop_requested":
            self.nack_count += 1
            if self._in_window(rnd.t_start):
                for c in rnd.payload_decoders:
                    self.relay_samples.append(
                        (self.dist[c, frame.dst], self.dist[frame.src, frame.dst]))
            if self.protocol == "dharq":
                reserve = (self.mac_cfg.sifs
                           + self.dharq_cfg.cw_rel * self.mac_cfg.slot
                           + self.mac_cfg.slot)
                self._send_ctrl("NACK", frame.dst, frame.src, rnd.rid, t,
                                reserve, sinr_idx=rnd.gamma_bin)
                self._log(t, "nack", frame.dst, frame.src,
                          f"bin={rnd.gamma_bin},round={rnd.rid}")
                self._push(t + self.mac_cfg.sifs + self.ack_airtime
                           + self.contention_timeout + self.data_airtime
                           + self.basic_timeout, P_CLOSE, "round_close", rnd.rid)
            elif self.protocol == "dharq_ideal_bound":
                self._ideal_relay_round(rnd, t)
            else:
                self._push(t + self.basic_timeout, P_CLOSE, "round_close",
                           rnd.rid)

        node = self.nodes[frame.src]
        mac_mod.step(node.mac, "tx_end", t, self.mac_cfg, node.mac_rng)
        if rnd.ideal_horizon is not None:
            node.mac.phase = "awaiting_nack_window"
            self._arm_timer(node, rnd.ideal_horizon)
        else:
            self._arm_timer(node, t + self.basic_timeout)

    def _send_ctrl(self, kind, src, dst, rid, t_now, reserve, sinr_idx=None):
        fr = self._make_ctrl_frame(kind, src, dst, rid, reserve, sinr_idx)
        self._push(t_now + self.mac_cfg.sifs, P_TX_START, "ctrl", fr)

    def _ideal_relay_round(self, rnd, t):
        """Free instantaneous best-relay selection: no NACK, no contention.

        Candidates are ranked by the destination's current SINR toward them;
        the destination knows its own interference floor, so the idealized
        feedback carries it.
        """
        block = int(t / self.block_dt)
        interf = 0.0
        for a in self.active:
            if a.frame.src not in (rnd.dst,):
                interf += self.mean_pw[a.frame.src, rnd.dst] * \
                    self.field.gain_one(a.frame.src, rnd.dst, block)
        floor = self.props.noise_floor + interf
        cands = []
        for c in rnd.payload_decoders:
            sinr = self.mean_pw[c, rnd.dst] * self.field.gain_one(
                c, rnd.dst, block) / floor
            cands.append((c, sinr))
        best = ideal_relay_select(cands)
        if best is None:
            self._push(t + self.basic_timeout, P_CLOSE, "round_close", rnd.rid)
            return
        rnd.eligible = [c for c, _ in cands]
        gamma_cd = dict(cands)[best]
        # same conservative rate rule as the distributed protocol, applied to
        # the best candidate; the idealization is the free, collision-less
        # selection, not a thinner link margin
        decision = relay_rate(dequantize_sinr(rnd.gamma_bin, self.dharq_cfg),
                              gamma_cd, self.rates, self.dharq_cfg,
                              self.props.bandwidth)
        rate = decision.rate if decision.participates else 0.0
        if rate <= self.rates.rho_data:
            if self._in_window(rnd.t_start):
                self.ctr_giveup["rate_too_low"] += 1
            self._push(t + self.basic_timeout, P_CLOSE, "round_close", rnd.rid)
            return
        # selection is free and collision-less, but the chosen relay still
        # respects carrier sense: contend with a single one-slot backoff
        start_slot = int(math.ceil((t + self.mac_cfg.sifs) / self.slot - 1e-9))
        self.relay_contenders.append(_RelayContender(
            best, rnd.rid, 1, rate, start_slot))
        relay_air = self.hdr_airtime + self.rates.payload_bits / rate
        horizon = (t + self.mac_cfg.sifs + 2 * self.mac_cfg.slot + relay_air
                   + self.basic_timeout)
        self._push(horizon, P_CLOSE, "round_close", rnd.rid)
        # the source is part of the idealized signalling: it learns a relay
        # phase is in flight (applied once its own tx_end settles)
        rnd.ideal_horizon = horizon

    def _finish_ack(self, tx, recs, t):
        frame = tx.frame
        self._log(t, "ack", frame.src, frame.dst, f"round={frame.round_id}")
        for rec in recs:
            if rec.rx != frame.dst:
                continue
            if rec.mi_header + _MI_EPS < frame.header_bits:
                continue
            node = self.nodes[rec.rx]
            rnd = self.rounds.get(frame.round_id)
            if rnd is None or rnd.pid not in node.mac.queue[:1]:
                continue
            if node.mac.phase in ("awaiting_ack", "awaiting_nack_window",
                                  "frozen", "backoff"):
                mac_mod.step(node.mac, "frame_rx", t, self.mac_cfg,
                             node.mac_rng, frame=frame)
                node.timer_token += 1   # cancel the pending timeout
                self._refresh_contender(node)

    def _finish_nack(self, tx, recs, t):
        frame = tx.frame
        rnd = self.rounds[frame.round_id]
        contention_start = int(math.ceil(
            (t + self.mac_cfg.sifs) / self.slot - 1e-9))
        for rec in recs:
            rx = rec.rx
            decoded = rec.mi_header + _MI_EPS >= frame.header_bits
            if not decoded:
                continue
            if rx == frame.dst:   # the source learns a relay phase is coming
                node = self.nodes[rx]
                if node.mac.phase == "awaiting_ack":
                    mac_mod.step(node.mac, "frame_rx", t, self.mac_cfg,
                                 node.mac_rng, frame=frame)
                    self._arm_timer(node, t + self.contention_timeout)
                continue
            if rx in rnd.payload_decoders:
                rnd.eligible.append(rx)
                node = self.nodes[rx]
                gamma_cd = rec.sinr_int_frame / frame.duration
                decision = relay_rate(
                    dequantize_sinr(frame.nack_sinr_index, self.dharq_cfg),
                    gamma_cd, self.rates, self.dharq_cfg, self.props.bandwidth)
                if not decision.participates:
                    if self._in_window(rnd.t_start):
                        self.ctr_giveup["rate_too_low"] += 1
                    self._log(t, "give_up", rx, rnd.dst,
                              f"rate_too_low,round={rnd.rid}")
                    continue
                if node.nav_until(exclude_round=rnd.rid) > \
                        contention_start * self.slot + 1e-12:
                    if self._in_window(rnd.t_start):
                        self.ctr_giveup["nav"] += 1
                    self._log(t, "give_up", rx, rnd.dst,
                              f"nav,round={rnd.rid}")
                    continue
                backoff = int(node.relay_rng.integers(
                    1, self.dharq_cfg.cw_rel + 1))
                self.relay_contenders.append(_RelayContender(
                    rx, rnd.rid, backoff, decision.rate, contention_start))
            else:
                node = self.nodes[rx]
                node.nav_entries[rnd.rid] = max(
                    node.nav_entries.get(rnd.rid, 0.0),
                    t + frame.duration_field)

    def _finish_relay(self, tx, recs, t):
        frame = tx.frame
        rnd = self.rounds[frame.round_id]
        payload = self.payloads[rnd.pid]
        for rec in recs:
            if rec.rx != frame.dst or rec.header_decided is not True:
                continue
            rnd.relay_mi += rec.mi_payload
            total = rnd.payload_mi + rnd.relay_mi
            if total + _MI_EPS >= self.rates.payload_bits \
                    or payload.delivered_at is not None:
                rnd.delivered_via_relay = True
                if payload.delivered_at is None:
                    payload.delivered_at = t
                self._send_ctrl("ACK", frame.dst, rnd.src, rnd.rid, t, 0.0)
        # the source stretches its wait to cover this relay's acknowledgment
        for rec in recs:
            if rec.rx == rnd.src and rec.header_decided is True:
                node = self.nodes[rec.rx]
                if node.mac.phase == "awaiting_nack_window":
                    self._arm_timer(node, t + self.basic_timeout)

    # -- timers, arrivals, round closing

    def _handle_timeout(self, data, t):
        idx, token = data
        node = self.nodes[idx]
        if token != node.timer_token:
            return
        if node.mac.phase not in ("awaiting_ack", "awaiting_nack_window"):
            return
        actions = mac_mod.step(node.mac, "ack_timeout", t, self.mac_cfg,
                               node.mac_rng)
        for act in actions:
            if act[0] == "drop_packet":
                payload = self.payloads[act[1]]
                if payload.delivered_at is None:
                    payload.dropped_at = t
                    self._log(t, "drop", idx, payload.dst,
                              f"payload={payload.pid}")
        self._refresh_contender(node)

    def _handle_arrival(self, idx, t):
        node = self.nodes[idx]
        pool = self.dest_pool[idx]
        if len(pool) == 0:
            self._schedule_arrival(node)
            return
        if self.topo.pinned_pair is not None and idx == self.topo.pinned_pair[0]:
            dst = self.topo.pinned_pair[1]
        else:
            dst = int(pool[node.traffic_rng.integers(0, len(pool))])
        payload = _Payload(self._pid, idx, dst, self.rates.payload_bits, t)
        self._pid += 1
        self.payloads[payload.pid] = payload
        mac_mod.step(node.mac, "enqueue", t, self.mac_cfg, node.mac_rng,
                     payload=payload.pid)
        self._refresh_contender(node)
        self._schedule_arrival(node)

    def _close_round(self, rid, t):
        # cooperative accounting only exists where a relay phase can occur;
        # "empty" means nobody holds the source's payload, candidates that
        # held it but never acted leave the round failed without transmission
        rnd = self.rounds[rid]
        if rnd.closed or rnd.outcome != "coop_requested" \
                or self.protocol == "csma":
            rnd.closed = True
            return
        rnd.closed = True
        if not self._in_window(rnd.t_start):
            return
        if rnd.delivered_via_relay:
            self.ctr_coop["success"] += 1
        elif not rnd.payload_decoders:
            self.ctr_coop["empty_contention"] += 1
        elif rnd.relay_txs == 0:
            self.ctr_coop["failure_wo_tx"] += 1
        else:
            self.ctr_coop["failure_with_tx"] += 1

    # ------------------------------------------------------------ reporting

    def _report(self) -> MetricsReport:
        rep = MetricsReport()
        w0, w1 = self.win
        rep.duration = w1 - w0
        delivered = [p for p in self.payloads.values()
                     if p.delivered_at is not None and w0 <= p.delivered_at <= w1]
        dropped = [p for p in self.payloads.values()
                   if p.dropped_at is not None and w0 <= p.dropped_at <= w1]
        rep.aggregate_throughput = sum(p.bits for p in delivered) / rep.duration
        terminated = len(delivered) + len(dropped)
        rep.pdr = len(delivered) / terminated if terminated else 0.0
        total_tx = sum(self.ctr_outcomes.values())
        rep.data_tx_count = total_tx
        if total_tx:
            for k, v in self.ctr_outcomes.items():
                rep.outcome_shares[k] = v / total_tx
            rep.coop_success_share = self.ctr_coop["success"] / total_tx
        failures = (self.ctr_coop["empty_contention"]
                    + self.ctr_coop["failure_wo_tx"]
                    + self.ctr_coop["failure_with_tx"])
        if failures:
            for k in ("empty_contention", "failure_wo_tx", "failure_with_tx"):
                rep.coop_failure_breakdown[k] = self.ctr_coop[k] / failures
        giveups = sum(self.ctr_giveup.values())
        if giveups:
            for k, v in self.ctr_giveup.items():
                rep.giveup_breakdown[k] = v / giveups
        rep.relay_distance_samples = self.relay_samples
        rep.nack_rounds = self.nack_count
        rep.relay_tx_count = self.relay_tx_count
        rep.payloads_enqueued = len(self.payloads)
        rep.payloads_delivered = sum(
            1 for p in self.payloads.values() if p.delivered_at is not None)
        rep.payloads_dropped = sum(
            1 for p in self.payloads.values()
            if p.dropped_at is not None and p.delivered_at is None)
        rep.payloads_in_flight = (rep.payloads_enqueued - rep.payloads_delivered
                                  - rep.payloads_dropped)
        rep.validate()
        return rep
