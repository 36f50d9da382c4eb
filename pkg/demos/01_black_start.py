"""
Black start onto a 50 Hz bus
============================

Run the default scenario: a 4-pole machine spun up from standstill,
excited, matched against the bus and closed in.
"""

import numpy as np

from syncrelay import ScenarioConfig, run_scenario, summarize

log = run_scenario(ScenarioConfig())
c = log.columns

###############################################################################
# Speed, voltage and field every ten seconds.  The governor saturates at
# first, the exciter comes on near rated speed, and the voltage climbs half
# a volt of field per pulse.

print(f"{'t':>6} {'rpm':>9} {'V L-L':>8} {'field':>7}  phase")
for i in np.arange(0, len(log), 10_000):
    print(f"{c['t'][i]:6.1f} {c['gen_rpm'][i]:9.2f} {c['gen_v_ll'][i]:8.2f} "
          f"{c['field_v'][i]:7.2f}  {c['sync_phase'][i]}")

###############################################################################
# The synchronizer milestones, without the long train of field pulses.

for e in log.events:
    if e.kind not in ("PulseUp", "PulseDown"):
        print(f"{e.t:8.3f}  {e.kind:<14} {e.detail}")

s = summarize(log)
print(f"\nclosed at {s.t_close:.3f} s with {s.close_dphi:+.2f} deg, settled by {s.settle_time:.3f} s")
