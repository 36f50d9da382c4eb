"""Governor PID speed loop, pulse AVR, and post-close P/Q regulation."""

from dataclasses import dataclass
import math

from .errors import InvalidArgumentError, InvalidStateError
from .plant import ExciterCommand, rpm_from_frequency

# rated torque of the 1 kW / 1500 rpm machine, rounded up
T_MAX = 6.4


@dataclass(frozen=True)
class PidParams:
    kp: float
    ki: float
    kd: float = 0.0
    out_min: float = -math.inf
    out_max: float = math.inf

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            g = getattr(self, name)
            if not (math.isfinite(g) and g >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0")
        if not self.out_min < self.out_max:
            raise InvalidArgumentError("out_min must be below out_max")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def governor_defaults():
    """Speed-loop gains: error in rpm, output in N m."""
    return PidParams(kp=0.1, ki=0.5, kd=0.0, out_min=0.0, out_max=T_MAX)


def power_loop_defaults():
    """Active-power loop gains: error in W, output in N m.

    Integral only: any proportional gain large enough to matter excites the
    lightly damped rotor swing mode (about 4.5 Hz on the bus).
    """
    return PidParams(kp=0.0, ki=0.004, kd=0.0, out_min=0.0, out_max=T_MAX)


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def pid_step(params, state, setpoint, measured, dt):
    """One PID update; returns ``(output, new_state)``.

    The integral is frozen while the output is saturated in the direction of
    the error, and kept within the band that alone would drive the output
    to its limits.  The derivative acts on the error and is zero on the
    first call.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    if not (math.isfinite(setpoint) and math.isfinite(measured)):
        raise InvalidArgumentError("setpoint and measurement must be finite")
    e = setpoint - measured
    deriv = (e - state.prev_error) / dt if state.initialized else 0.0
    p_d = params.kp * e + params.kd * deriv

    integral = state.integral + e * dt
    u = p_d + params.ki * integral
    if (u > params.out_max and e > 0) or (u < params.out_min and e < 0):
        integral = state.integral
    if params.ki > 0:
        integral = _clamp(integral, params.out_min / params.ki, params.out_max / params.ki)
    u = _clamp(p_d + params.ki * integral, params.out_min, params.out_max)
    return u, PidState(integral, e, True)


def bumpless_state(params, output):
    """PID state that reproduces ``output`` at zero error (mode transfer)."""
    if params.ki == 0:
        return PidState()
    return PidState(integral=_clamp(output, params.out_min, params.out_max) / params.ki)


def governor_step(params, state, grid_freq, gen_speed, poles, dt, freq_offset=0.0):
    """Speed loop: drive the shaft to the speed matching ``grid_freq``.

    ``freq_offset`` (Hz) lets the synchronizer hold a small slip so the
    phase angle keeps sweeping; with it at zero the setpoint is exactly
    ``120*grid_freq/poles``.  Returns ``(torque_command, state, setpoint)``.
    """
    setpoint = rpm_from_frequency(grid_freq + freq_offset, poles)
    u, state = pid_step(params, state, setpoint, gen_speed, dt)
    return u, state, setpoint


@dataclass(frozen=True)
class AvrConfig:
    deadband_v: float = 5.0
    pulse_duration: float = 0.25
    min_pulse_gap: float = 0.25
    q_deadband_var: float = 50.0

    def __post_init__(self):
        if not self.deadband_v > 0:
            raise InvalidArgumentError("deadband_v must be positive")
        if not self.pulse_duration > 0 or not self.min_pulse_gap >= 0:
            raise InvalidArgumentError("pulse timing must be positive")
        if not self.q_deadband_var > 0:
            raise InvalidArgumentError("q_deadband_var must be positive")


_GAP_EPS = 1e-9


def _pulse_allowed(cfg, exciter, t, last_pulse_t):
    if not exciter.enabled or exciter.pulse_active:
        return False
    if last_pulse_t is None:
        return True
    return t >= last_pulse_t + cfg.pulse_duration + cfg.min_pulse_gap - _GAP_EPS


def avr_step(cfg, gen_v_ll, grid_v_ll, exciter, t, last_pulse_t=None):
    """Raise/lower pulse decision from the generator-to-grid voltage error.

    ``last_pulse_t`` is the start time of the previous pulse; a new one is
    not issued until a full pulse plus ``min_pulse_gap`` has elapsed.
    """
    if not _pulse_allowed(cfg, exciter, t, last_pulse_t):
        return ExciterCommand.Hold
    if grid_v_ll - gen_v_ll > cfg.deadband_v:
        return ExciterCommand.PulseUp
    if gen_v_ll - grid_v_ll > cfg.deadband_v:
        return ExciterCommand.PulseDown
    return ExciterCommand.Hold


@dataclass(frozen=True)
class PowerSetpoint:
    p_set: float = 0.0
    q_set: float = 0.0
    enabled: bool = False


def power_control_step(sp, p_measured, q_measured, params, state, avr_cfg, exciter,
                       t, dt, breaker_closed, last_pulse_t=None):
    """Grid-connected regulation of active and reactive power.

    Torque comes from a PI loop on the active-power error (``params`` and
    ``state`` belong to that loop, not the speed loop); field pulses follow
    the reactive-power error with ``avr_cfg.q_deadband_var``.
    Returns ``(torque_command, state, exciter_command)``.
    """
    if not breaker_closed:
        raise InvalidStateError("power control needs the breaker closed")
    torque, state = pid_step(params, state, sp.p_set, p_measured, dt)
    cmd = ExciterCommand.Hold
    if _pulse_allowed(avr_cfg, exciter, t, last_pulse_t):
        if q_measured < sp.q_set - avr_cfg.q_deadband_var:
            cmd = ExciterCommand.PulseUp
        elif q_measured > sp.q_set + avr_cfg.q_deadband_var:
            cmd = ExciterCommand.PulseDown
    return torque, state, cmd
