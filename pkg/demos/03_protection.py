"""
Underfrequency trip after synchronizing
=======================================

The bus sags to 49.3 Hz a few seconds after the machine is connected.
The underfrequency element times out, the breaker opens and the exciter
is switched off.
"""

from pathlib import Path

from syncrelay import load_scenario_file, run_scenario, summarize

scenario = Path(__file__).resolve().parent.parent / "scenarios" / "underfrequency_trip.cfg"
log = run_scenario(load_scenario_file(scenario))

for e in log.events:
    if e.kind in ("BreakerClosed", "Trip", "Aborted"):
        print(f"{e.t:8.3f}  {e.kind:<14} {e.detail}")

###############################################################################
# The latched flag stays in the row log until the end of the run; the shaft
# coasts because the governor is locked out.

c = log.columns
for t in (64.0, 65.4, 65.6, 70.0, 75.0):
    i = int(round(t / log.dt))
    print(f"{t:5.1f} s  breaker={c['breaker'][i]}  rpm={c['gen_rpm'][i]:8.2f}  "
          f"flags={c['trip_flags'][i] or '-'}")

print("synced:", summarize(log).synced)
