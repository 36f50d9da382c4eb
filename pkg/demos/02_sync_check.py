"""
What the sync-check relay sees
==============================

Drive the synchronizer by hand with two measurement snapshots and watch
the hold timer run out.
"""

from syncrelay.synchronizer import SyncConfig, SyncPhase, SyncState, evaluate_conditions, sync_step
from syncrelay.waveform import MeasurementSnapshot, PhaseSequence

cfg = SyncConfig()

###############################################################################
# A generator 8 degrees behind the bus but 0.05 Hz fast.  The relay predicts
# the angle at the moment the breaker contacts touch, 60 ms from now.

gen = MeasurementSnapshot(398.0, 50.05, 352.0, 0.0, 10.0)
bus = MeasurementSnapshot(400.0, 50.00, 0.0, 0.0, 10.0)
status = evaluate_conditions(gen, bus, PhaseSequence.Positive, cfg)
print(f"dv {status.dv:+.1f} V, slip {status.slip:+.3f} Hz, "
      f"angle now {status.dphi_deg:+.2f}, at close {status.dphi_predicted:+.2f}")

###############################################################################
# Conditions have to hold for the whole 200 ms window.  One bad snapshot
# sends the relay back to matching.

bad = evaluate_conditions(MeasurementSnapshot(398.0, 50.3, 352.0, 0.0, 10.0), bus,
                          PhaseSequence.Positive, cfg)
state = SyncState(SyncPhase.Matching, seq_ok=True)
for k in range(40):
    state, close, events = sync_step(state, bad if k == 10 else status, cfg, 0.01,
                                     t=10.0 + 0.01 * k)
    for kind, detail in events:
        print(f"{10.0 + 0.01 * k:.2f}  {kind}  {detail}")
    if close:
        break
print("final phase:", state.phase.value)
