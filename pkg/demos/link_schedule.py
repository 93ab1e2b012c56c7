#!/usr/bin/env python3
"""Timeline of the degraded-link emulator.

Shows the indoor downlink schedule — a 9600 bit/s trickle interleaved with
one-second 300 Mbit/s bursts whose spacing shrinks until the bursts are
continuous — and measures what a greedy sender actually gets through in
the first two minutes.
"""

import numpy as np

from telesim.netshape import BurstSchedule, DceLink, LinkPolicy, RelayStore

policy = LinkPolicy(downlink_mode="indoor", loss_prob=0.0, seed=0)
sched = BurstSchedule(policy)

print("burst spacing over the mission (bursts become continuous at "
      f"t = {policy.blackout_horizon:.0f} s):")
for t in (0, 600, 1200, 1800, 2400, 2690):
    print(f"  t = {t:5d} s   period {policy.burst_period(t):6.1f} s")

# duty cycle per 5-minute slice
print("\nburst duty cycle:")
for t0 in range(0, 2700, 600):
    t1 = t0 + 600
    on = sum(b - a for a, b, burst in sched.segments(t0, t1) if burst)
    print(f"  [{t0:5d}, {t1:5d}) s   {on / 600:5.1%}")

# --- greedy sender over the first 120 s -------------------------------------

link = DceLink(policy)
delivered = np.zeros(120)
t, k = 0.0, 0
while t < 120.0:
    status, delay = link.admit(1500, t)           # one MTU every 0.4 ms
    if status == "delivered" and t + delay < 120.0:
        delivered[int(t + delay)] += 1500 * 8
    k += 1
    t = k * 0.0004

print("\ndelivered bits per second (greedy sender, first 2 minutes):")
for sec in range(0, 120, 5):
    bits = delivered[sec:sec + 5].sum() / 5
    bar = "#" * int(np.clip(np.log10(max(bits, 1)) * 4, 0, 40))
    print(f"  t = {sec:3d} s   {bits:12.0f} bit/s  {bar}")

# --- the burst channel carries latest-value topics ---------------------------

relay = RelayStore()
for seq in range(5):
    relay.ingest("heightmap", bytes([seq]) * 1000, timestamp=float(seq),
                 sequence=seq)
latest = relay.latest("heightmap")
print(f"\nrelay store keeps only the newest heightmap: "
      f"{len(latest)} bytes, payload byte {latest[0]} (last of 5 ingests)")
