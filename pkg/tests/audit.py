"""Mechanical checks over a finished :class:`SimulationLog`."""
import numpy as np

PULSES = ("PulseUp", "PulseDown")

# the order the synchronizer may emit its milestones in
FLOW = ("ExciterOn", "HoldStart", "CloseCommand", "BreakerClosed")


def pulse_audit(log, pulse_duration=0.25):
    """Return a list of problems with the exciter pulses of ``log``."""
    problems = []
    dt = log.dt
    t = log.columns["t"]
    field_v = log.columns["field_v"]
    steps = np.diff(field_v)
    pulses = log.events_of(*PULSES)
    times = [e.t for e in pulses]
    if len(set(times)) != len(times):
        problems.append("simultaneous pulse commands")
    for a, b in zip(pulses, pulses[1:]):
        if b.t - a.t < pulse_duration - 1e-9:
            problems.append(f"pulses at {a.t} and {b.t} overlap")
    n_pulse = int(round(pulse_duration / dt))
    # after a trip the exciter is switched off and the field decays on its own
    stops = [int(round(e.t / dt)) for e in log.events_of("Trip")] + [len(t) - 1]
    for j, e in enumerate(pulses):
        i = int(round(e.t / dt))
        end = int(round(pulses[j + 1].t / dt)) if j + 1 < len(pulses) else len(t) - 1
        end = min(end, *(s for s in stops if s > i))
        window = steps[i:end]
        sign = 1.0 if e.kind == "PulseUp" else -1.0
        moving = np.flatnonzero(np.abs(window) > 1e-12)
        if moving.size == 0:
            problems.append(f"pulse at {e.t} never moved the field")
            continue
        if np.any(sign * window[moving] < 0):
            problems.append(f"pulse at {e.t} moved the field the wrong way")
        length = moving[-1] + 1
        clamped = field_v[i + length] == 0.0 or end - i < n_pulse
        if not clamped and abs(length - n_pulse) > 1:
            problems.append(f"pulse at {e.t} lasted {length} steps")
    return problems


def order_audit(log):
    """Flowchart legality of the event stream."""
    problems = []
    kinds = [e.kind for e in log.events]
    firsts = [kinds.index(k) for k in FLOW if k in kinds]
    if firsts != sorted(firsts):
        problems.append(f"milestones out of order: {kinds}")
    closes = [e.t for e in log.events_of("CloseCommand")]
    for e in log.events_of("BreakerClosed"):
        if not any(c <= e.t for c in closes):
            problems.append(f"BreakerClosed at {e.t} before any CloseCommand")
    if len(closes) > 1:
        problems.append("more than one CloseCommand")
    brk = log.columns["breaker"]
    for e in log.events_of("Trip"):
        i = int(round(e.t / log.dt))
        if brk[min(i + 1, len(brk) - 1)] != 0 and brk[i] != 0:
            problems.append(f"breaker still closed after trip at {e.t}")
    return problems


def sync_audit(log, sync_cfg):
    """Every closure inside the tolerances after a full hold, checked from the rows."""
    problems = []
    c = log.columns
    brk = c["breaker"]
    phase = c["sync_phase"]
    closed_at = np.flatnonzero(np.diff(brk.astype(int)) == 1) + 1
    for i in closed_at:
        dphi = c["dphi_deg"][i]
        slip = c["gen_freq"][i] - c["grid_freq"][i]
        dv = c["gen_v_ll"][i] - c["grid_v_ll"][i]
        if abs(dphi) > sync_cfg.angle_window_deg:
            problems.append(f"closed at {c['t'][i]} with dphi {dphi:.3f}")
        if abs(slip) > sync_cfg.slip_max:
            problems.append(f"closed at {c['t'][i]} with slip {slip:.4f}")
        if abs(dv) > sync_cfg.dv_max:
            problems.append(f"closed at {c['t'][i]} with dv {dv:.3f}")
        issued = phase.index("CloseIssued")
        j = issued
        while j > 0 and phase[j - 1] == "HoldWindow":
            j -= 1
        held = c["t"][issued] - c["t"][j]
        if held < sync_cfg.hold_time - 1e-9:
            problems.append(f"hold before {c['t'][issued]} lasted only {held:.3f} s")
    return problems
