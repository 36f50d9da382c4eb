"""Sync-check relay: the auto-synchronization flowchart as a state machine.

    Idle -> ExciterOn -> Matching <-> HoldWindow -> CloseIssued -> Synchronized
    (any state) -> Aborted

Idle waits for the prime mover to bring the shaft near synchronous speed,
ExciterOn waits for a measurable terminal voltage, Matching checks the
phase sequence once on entry and then waits for voltage, slip and predicted
angle to fall inside tolerance, HoldWindow requires them to stay there for
``hold_time`` before the close command goes out.
"""

from dataclasses import dataclass, replace
import enum

from .errors import InvalidArgumentError, StaleMeasurementError
from .waveform import PhaseSequence, phase_difference


class SyncPhase(enum.Enum):
    Idle = "Idle"
    ExciterOn = "ExciterOn"
    Matching = "Matching"
    HoldWindow = "HoldWindow"
    CloseIssued = "CloseIssued"
    Synchronized = "Synchronized"
    Aborted = "Aborted"


LEGAL_TRANSITIONS = {
    SyncPhase.Idle: {SyncPhase.ExciterOn},
    SyncPhase.ExciterOn: {SyncPhase.Matching},
    SyncPhase.Matching: {SyncPhase.HoldWindow},
    SyncPhase.HoldWindow: {SyncPhase.Matching, SyncPhase.CloseIssued},
    SyncPhase.CloseIssued: {SyncPhase.Synchronized},
    SyncPhase.Synchronized: set(),
    SyncPhase.Aborted: set(),
}
for _src in SyncPhase:
    if _src is not SyncPhase.Aborted:
        LEGAL_TRANSITIONS[_src].add(SyncPhase.Aborted)


@dataclass(frozen=True)
class SyncConfig:
    dv_max: float = 10.0
    slip_max: float = 0.1
    angle_window_deg: float = 10.0
    hold_time: float = 0.2
    breaker_delay: float = 0.06
    seq_required: PhaseSequence = PhaseSequence.Positive
    # slip (Hz) held while matching so the angle sweeps through the window
    slip_bias: float = 0.05
    # fraction of synchronous speed at which the exciter is switched on
    excite_speed_ratio: float = 0.95
    # largest allowed time skew between generator and grid snapshots
    max_skew: float = 0.01

    def __post_init__(self):
        for name in ("dv_max", "slip_max", "angle_window_deg", "hold_time"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.angle_window_deg > 30:
            raise InvalidArgumentError("angle_window_deg must not exceed 30")
        if self.breaker_delay < 0 or self.slip_bias < 0 or self.max_skew < 0:
            raise InvalidArgumentError("breaker_delay, slip_bias and max_skew must be >= 0")
        if not 0 < self.excite_speed_ratio <= 1:
            raise InvalidArgumentError("excite_speed_ratio must lie in (0, 1]")
        if self.seq_required is PhaseSequence.Indeterminate:
            raise InvalidArgumentError("seq_required must be Positive or Negative")


@dataclass(frozen=True)
class SyncStatus:
    dv: float
    slip: float
    dphi_deg: float
    dphi_predicted: float
    seq_ok: bool
    conditions_met: bool
    close_command: bool = False


@dataclass(frozen=True)
class SyncState:
    phase: SyncPhase = SyncPhase.Idle
    hold_elapsed: float = 0.0
    t_entered: float = 0.0
    seq_ok: bool = False


_SKEW_EPS = 1e-9
_HOLD_EPS = 1e-9


def evaluate_conditions(gen, grid, seq, cfg):
    """Compare generator and grid snapshots against the closing tolerances.

    The angle test uses the angle predicted at the moment the breaker
    contacts meet, ``dphi + 360*slip*breaker_delay``.
    """
    if abs(gen.t - grid.t) > cfg.max_skew + _SKEW_EPS:
        raise StaleMeasurementError(
            f"snapshots {gen.t:.6f} s and {grid.t:.6f} s are too far apart")
    dv = gen.v_rms_ll - grid.v_rms_ll
    slip = gen.frequency - grid.frequency
    dphi = phase_difference(gen.phase_deg, grid.phase_deg)
    predicted = phase_difference(dphi + 360.0 * slip * cfg.breaker_delay, 0.0)
    seq_ok = seq is cfg.seq_required
    met = (abs(dv) <= cfg.dv_max and abs(slip) <= cfg.slip_max
           and abs(predicted) <= cfg.angle_window_deg and seq_ok)
    return SyncStatus(dv, slip, dphi, predicted, seq_ok, met)


def _go(state, phase, t, **kw):
    assert phase in LEGAL_TRANSITIONS[state.phase], (state.phase, phase)
    return replace(state, phase=phase, t_entered=t, **kw)


def sync_step(state, status, cfg, dt, t=0.0, speed_ready=True, voltage_ready=True,
              breaker_closed=False):
    """Advance the relay by one control period.

    Returns ``(state, close_command, events)`` where ``events`` is a list of
    ``(kind, detail)`` pairs for the event log.  The close command is
    emitted once, on the step the hold timer completes.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    events = []
    close = False
    ph = state.phase

    if ph is SyncPhase.Idle:
        if speed_ready:
            state = _go(state, SyncPhase.ExciterOn, t)
            events.append(("ExciterOn", "shaft near synchronous speed"))
    elif ph is SyncPhase.ExciterOn:
        if voltage_ready:
            state = _go(state, SyncPhase.Matching, t, seq_ok=status.seq_ok)
    elif ph is SyncPhase.Matching:
        if state.seq_ok and status.conditions_met:
            state = _go(state, SyncPhase.HoldWindow, t, hold_elapsed=0.0)
            events.append(("HoldStart", _describe(status)))
    elif ph is SyncPhase.HoldWindow:
        if not status.conditions_met:
            state = _go(state, SyncPhase.Matching, t, hold_elapsed=0.0)
            events.append(("HoldReset", _describe(status)))
        else:
            held = min(state.hold_elapsed + dt, cfg.hold_time)
            if held >= cfg.hold_time - _HOLD_EPS:
                state = _go(state, SyncPhase.CloseIssued, t, hold_elapsed=cfg.hold_time)
                close = True
                events.append(("CloseCommand", _describe(status)))
            else:
                state = replace(state, hold_elapsed=held)
    elif ph is SyncPhase.CloseIssued:
        if breaker_closed:
            state = _go(state, SyncPhase.Synchronized, t)
    return state, close, events


def abort(state, t):
    """Move to Aborted (protection trip); already-aborted state is returned as is."""
    if state.phase is SyncPhase.Aborted:
        return state
    return _go(state, SyncPhase.Aborted, t, hold_elapsed=0.0)


def _describe(status):
    return (f"dv={status.dv:.3f} slip={status.slip:.4f} dphi={status.dphi_deg:.3f} "
            f"dphi_pred={status.dphi_predicted:.3f}")
