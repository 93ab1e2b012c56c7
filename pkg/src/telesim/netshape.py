"""Degraded-link emulator and field-relay buffering.

Models the competition link schedule: a 9600 bit/s uplink, an outdoor
downlink of 300 Mbit/s, and an indoor downlink of 9600 bit/s interleaved with
one-second 300 Mbit/s bursts whose period shrinks linearly until, after the
blackout horizon, the bursts are continuous.  All timing is virtual; the
caller injects time.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass

import numpy as np

MTU_BYTES = 1500


@dataclass
class LinkPolicy:
    uplink_rate: float = 9600.0          # bit/s, both modes
    downlink_mode: str = "indoor"        # "indoor" | "outdoor"
    outdoor_rate: float = 300e6          # bit/s
    indoor_base_rate: float = 9600.0     # bit/s between bursts
    burst_rate: float = 300e6            # bit/s during bursts
    burst_duration: float = 1.0          # s
    burst_period_t0: float = 30.0        # s, inter-burst start interval at t=0
    blackout_horizon: float = 2700.0     # s; bursts continuous afterwards
    loss_prob: float = 0.0
    seed: int = 0
    bucket_depth_bytes: int = 2 * MTU_BYTES
    max_queue_delay: float = 2.0         # s; beyond this the queue drops

    def burst_period(self, t: float) -> float:
        """Inter-burst start interval T(t); monotone non-increasing."""
        return max(
            self.burst_duration,
            self.burst_period_t0 * (1.0 - t / self.blackout_horizon),
        )


def load_policy(path) -> LinkPolicy:
    """Parse a key-value config file (lines of `name = value`, # comments)."""
    policy = LinkPolicy()
    types = {f: type(getattr(policy, f)) for f in vars(policy)}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            setattr(policy, key, types[key](value))
    return policy


class BurstSchedule:
    """Deterministic burst start times; burst k+1 starts T(s_k) after s_k."""

    def __init__(self, policy: LinkPolicy):
        self.policy = policy
        self._starts = [policy.burst_period(0.0)]

    def _extend_to(self, t: float):
        while self._starts[-1] <= t + self.policy.burst_duration:
            s = self._starts[-1]
            self._starts.append(s + self.policy.burst_period(s))

    def query(self, t: float):
        """(in_burst, next_burst_start) at time t >= 0."""
        if t < 0:
            raise ValueError("time must be non-negative")
        self._extend_to(t)
        starts = self._starts
        i = bisect.bisect_right(starts, t) - 1
        in_burst = i >= 0 and starts[i] <= t < starts[i] + self.policy.burst_duration
        next_start = starts[i + 1] if i + 1 < len(starts) else starts[-1]
        return in_burst, next_start

    def segments(self, t0: float, t1: float):
        """Yield (a, b, in_burst) covering [t0, t1] piecewise."""
        self._extend_to(t1)
        edges = {t0, t1}
        for s in self._starts:
            for e in (s, s + self.policy.burst_duration):
                if t0 < e < t1:
                    edges.add(e)
        pts = sorted(edges)
        for a, b in zip(pts[:-1], pts[1:]):
            yield a, b, self.query(0.5 * (a + b))[0]


class DceLink:
    """One direction of the emulated link: rate shaping + Bernoulli loss.

    Admission uses a token bucket earning at the scheduled rate; a packet
    that overdraws the bucket is queued (negative balance) and carries the
    queueing delay, up to ``max_queue_delay``, after which it is dropped.
    """

    def __init__(self, policy: LinkPolicy, direction: str = "down"):
        if direction not in ("up", "down"):
            raise ValueError("direction must be 'up' or 'down'")
        self.policy = policy
        self.direction = direction
        self.schedule = BurstSchedule(policy)
        self._rng = np.random.default_rng((policy.seed, hash(direction) & 0xFFFF))
        self._t_last = 0.0
        self._tokens = float(policy.bucket_depth_bytes * 8)
        self._stats = {}  # int(second) -> [delivered_bits, dropped_bits]

    # -- schedule integration ------------------------------------------------

    def rate(self, t: float) -> float:
        if self.direction == "up":
            return self.policy.uplink_rate
        if self.policy.downlink_mode == "outdoor":
            return self.policy.outdoor_rate
        in_burst, _ = self.schedule.query(t)
        return self.policy.burst_rate if in_burst else self.policy.indoor_base_rate

    def bits_between(self, t0: float, t1: float) -> float:
        if t1 <= t0:
            return 0.0
        if self.direction == "up":
            return self.policy.uplink_rate * (t1 - t0)
        if self.policy.downlink_mode == "outdoor":
            return self.policy.outdoor_rate * (t1 - t0)
        total = 0.0
        for a, b, burst in self.schedule.segments(t0, t1):
            r = self.policy.burst_rate if burst else self.policy.indoor_base_rate
            total += r * (b - a)
        return total

    def time_to_earn(self, t0: float, bits: float) -> float:
        """Time after t0 at which ``bits`` have accumulated."""
        if bits <= 0:
            return 0.0
        if self.direction == "up":
            return bits / self.policy.uplink_rate
        if self.policy.downlink_mode == "outdoor":
            return bits / self.policy.outdoor_rate
        t = t0
        remaining = bits
        while True:
            for a, b, burst in self.schedule.segments(t, t + 60.0):
                r = self.policy.burst_rate if burst else self.policy.indoor_base_rate
                seg = r * (b - a)
                if seg >= remaining:
                    return a + remaining / r - t0
                remaining -= seg
            t += 60.0

    # -- admission -----------------------------------------------------------

    def admit(self, size_bytes: int, t: float):
        """Returns ('delivered', delay) or ('dropped', reason)."""
        if t < self._t_last - 1e-12:
            raise ValueError("time must be non-decreasing per link")
        depth = self.policy.bucket_depth_bytes * 8
        self._tokens = min(depth, self._tokens + self.bits_between(self._t_last, t))
        self._t_last = max(self._t_last, t)
        bits = size_bytes * 8
        if self._rng.random() < self.policy.loss_prob:
            self._count(t, dropped=bits)
            return ("dropped", "loss")
        provisional = self._tokens - bits
        if provisional >= 0:
            self._tokens = provisional
            self._count(t, delivered=bits)
            return ("delivered", 0.0)
        delay = self.time_to_earn(t, -provisional)
        if delay > self.policy.max_queue_delay:
            self._count(t, dropped=bits)
            return ("dropped", "queue")
        self._tokens = provisional
        self._count(t + delay, delivered=bits)  # stats at completion time
        return ("delivered", delay)

    # -- statistics ----------------------------------------------------------

    def _count(self, t: float, delivered: float = 0.0, dropped: float = 0.0):
        cell = self._stats.setdefault(int(t), [0.0, 0.0])
        cell[0] += delivered
        cell[1] += dropped

    def stats_jsonl(self) -> str:
        lines = []
        for sec in sorted(self._stats):
            d, x = self._stats[sec]
            lines.append(
                json.dumps(
                    {
                        "t": sec,
                        "direction": self.direction,
                        "delivered_bits": int(d),
                        "dropped_bits": int(x),
                    }
                )
            )
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Field relay: latest-value buffering + burst streaming
# ---------------------------------------------------------------------------


@dataclass
class RelayEntry:
    message: bytes
    timestamp: float
    sequence: int


class RelayStore:
    """Keeps only the newest message per topic; streams them cyclically."""

    KEEPALIVE = ("__keepalive__", b"")

    def __init__(self, stream_rate: float = 200e6):
        self.stream_rate = stream_rate
        self._topics: dict[str, RelayEntry] = {}

    def ingest(self, topic: str, message: bytes, timestamp: float = 0.0, sequence: int = 0):
        cur = self._topics.get(topic)
        if cur is not None and sequence < cur.sequence:
            return  # stale
        self._topics[topic] = RelayEntry(bytes(message), timestamp, sequence)

    def latest(self, topic: str):
        e = self._topics.get(topic)
        return None if e is None else e.message

    def stream(self, duration: float, rate: float | None = None):
        """Packets emitted during a window of the given duration.

        Cycles over all stored topics until the bit budget runs out, so any
        burst window long enough for one full cycle carries every topic.
        """
        rate = self.stream_rate if rate is None else rate
        budget = duration * rate
        if not self._topics:
            return [self.KEEPALIVE]
        out = []
        items = sorted(self._topics.items())
        i = 0
        while budget > 0:
            topic, entry = items[i % len(items)]
            bits = max(len(entry.message) * 8, 8)
            if bits > budget and out:
                break
            out.append((topic, entry.message))
            budget -= bits
            i += 1
            if i >= 10_000 * len(items):  # tiny messages: bounded output
                break
        return out
