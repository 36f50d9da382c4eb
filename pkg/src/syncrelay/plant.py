"""Plant models: rotor swing dynamics, pulse-driven exciter, infinite-bus grid
and the generator breaker.

Units: rotor speed in rpm at the interfaces, mechanical rad/s inside the
integrator; angles in electrical degrees; voltages line-to-line RMS unless a
name says ``_ln``.
"""

from dataclasses import dataclass, replace
import enum
import logging
import math

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError, NumericalDivergenceError
from .waveform import SQRT3, wrap360

log = logging.getLogger(__name__)

RPM_TO_RAD = 2.0 * math.pi / 60.0


def rpm_from_frequency(f, poles):
    """Shaft speed (rpm) for electrical frequency ``f`` on a ``poles``-pole machine."""
    _check_poles(poles)
    if not f >= 0:
        raise InvalidArgumentError("frequency must be non-negative")
    return 120.0 * f / poles


def frequency_from_rpm(v, poles):
    _check_poles(poles)
    if not v >= 0:
        raise InvalidArgumentError("speed must be non-negative")
    return v * poles / 120.0


def _check_poles(poles):
    if int(poles) != poles or poles < 2 or poles % 2:
        raise InvalidArgumentError(f"poles must be an even integer >= 2, got {poles}")


def inertia_from_h(h, rated_power, rpm):
    """Rotor inertia (kg m^2) for inertia constant ``h`` (s) on the machine base."""
    w = rpm * RPM_TO_RAD
    return 2.0 * h * rated_power / (w * w)


@dataclass(frozen=True)
class GeneratorParams:
    rated_power: float = 1000.0
    v_ll_nominal: float = 400.0
    v_ln_nominal: float = 230.0
    i_rated: float = 2.6
    f_nominal: float = 50.0
    rpm_nominal: float = 1500.0
    poles: int = 4
    exciter_i_rated: float = 1.6
    inertia_J: float = inertia_from_h(0.5, 1000.0, 1500.0)
    damping_D: float = 0.05
    # V(L-L) per field volt at rated speed; one point (45 V -> 400 V) pins it
    k_emf: float = 400.0 / 45.0
    x_sync: float = 63.5

    def __post_init__(self):
        _check_poles(self.poles)
        for name in ("rated_power", "v_ll_nominal", "v_ln_nominal", "i_rated",
                     "f_nominal", "rpm_nominal", "exciter_i_rated", "inertia_J",
                     "k_emf", "x_sync"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be positive and finite")
        if not (math.isfinite(self.damping_D) and self.damping_D >= 0):
            raise InvalidArgumentError("damping_D must be finite and >= 0")
        if not math.isclose(self.rpm_nominal, 120.0 * self.f_nominal / self.poles,
                            rel_tol=1e-12):
            raise InvalidArgumentError("rpm_nominal must equal 120*f_nominal/poles")

    @property
    def pole_pairs(self):
        return self.poles // 2

    @property
    def omega_nominal(self):
        """Rated mechanical speed in rad/s."""
        return self.rpm_nominal * RPM_TO_RAD


@dataclass(frozen=True)
class GeneratorState:
    rotor_speed: float = 0.0
    rotor_angle_deg: float = 0.0
    field_voltage: float = 0.0
    t: float = 0.0


def open_circuit_emf(field_voltage, rotor_speed, params):
    """Line-to-line EMF: linear in field voltage and in speed, no saturation."""
    return params.k_emf * field_voltage * (rotor_speed / params.rpm_nominal)


def step_rotor(state, mech_torque, elec_torque, params, dt, sync_speed=None):
    """Advance the swing equation by ``dt`` with classical RK4.

        J dw/dt = T_mech - T_elec - D (w - w_sync)

    ``elec_torque`` is either a constant (N m) or a callable
    ``f(t, angle_deg, speed_rpm)`` evaluated at every stage, which keeps the
    grid-coupled rotor a properly integrated two-state system.
    ``sync_speed`` (rpm) is the damping reference, normally the speed that
    matches the grid frequency; ``None`` drops the damping term.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    J = params.inertia_J
    D = 0.0 if sync_speed is None else params.damping_D
    w_sync = 0.0 if sync_speed is None else sync_speed * RPM_TO_RAD
    pp = params.pole_pairs
    t0 = state.t

    if callable(elec_torque):
        def accel(t, w, theta):
            return (mech_torque - elec_torque(t, theta, w / RPM_TO_RAD) - D * (w - w_sync)) / J
    else:
        net = mech_torque - float(elec_torque)

        def accel(t, w, theta):
            return (net - D * (w - w_sync)) / J

    # theta in electrical degrees, unwrapped during the step
    w0 = state.rotor_speed * RPM_TO_RAD
    th0 = state.rotor_angle_deg
    k = math.degrees(pp)
    h2 = 0.5 * dt
    a1 = accel(t0, w0, th0)
    v1 = w0 * k
    w_2 = w0 + h2 * a1
    a2 = accel(t0 + h2, w_2, th0 + h2 * v1)
    v2 = w_2 * k
    w_3 = w0 + h2 * a2
    a3 = accel(t0 + h2, w_3, th0 + h2 * v2)
    v3 = w_3 * k
    w_4 = w0 + dt * a3
    a4 = accel(t0 + dt, w_4, th0 + dt * v3)
    v4 = w_4 * k
    dw = dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    th1 = th0 + dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)

    if not (math.isfinite(dw) and math.isfinite(th1)):
        raise NumericalDivergenceError(
            f"rotor state became non-finite at t={t0 + dt:.6f}", last_state=state)
    # apply the increment in rpm so a zero net torque leaves the speed bit-exact
    return GeneratorState(
        rotor_speed=max(state.rotor_speed + dw / RPM_TO_RAD, 0.0),
        rotor_angle_deg=wrap360(th1),
        field_voltage=state.field_voltage,
        t=t0 + dt,
    )


# -- exciter ------------------------------------------------------------------

class ExciterCommand(enum.Enum):
    """The four control pins of the excitation module, plus no action."""
    On = "On"
    Off = "Off"
    PulseUp = "PulseUp"
    PulseDown = "PulseDown"
    Hold = "Hold"


@dataclass(frozen=True)
class ExciterParams:
    slew: float = 2.0
    field_max: float = 60.0
    pulse_duration: float = 0.25

    def __post_init__(self):
        for name in ("slew", "field_max", "pulse_duration"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")

    @property
    def pulse_step(self):
        """Field-voltage change produced by one complete pulse."""
        return self.slew * self.pulse_duration


@dataclass(frozen=True)
class ExciterState:
    enabled: bool = False
    field_voltage: float = 0.0
    pulse: str | None = None  # "Up" or "Down" while a pulse is active
    remaining: float = 0.0

    @property
    def pulse_active(self):
        return self.pulse is not None


# pulse remainder below this is treated as finished (float accumulation)
_PULSE_EPS = 1e-9


def step_exciter(state, cmd, dt, params=ExciterParams()):
    """Apply ``cmd`` and advance the exciter by ``dt``.

    A pulse ramps the field at +/-``slew`` V/s for ``pulse_duration``; a new
    pulse is refused while one is running or while the module is off.  Off
    cancels any pulse and lets the field decay to zero at the slew rate.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    if cmd is ExciterCommand.Hold and state.pulse is None and (
            state.enabled or state.field_voltage == 0.0):
        return state
    enabled, vf, pulse, remaining = state.enabled, state.field_voltage, state.pulse, state.remaining

    if cmd is ExciterCommand.On:
        enabled = True
    elif cmd is ExciterCommand.Off:
        enabled, pulse, remaining = False, None, 0.0
    elif cmd in (ExciterCommand.PulseUp, ExciterCommand.PulseDown):
        if not enabled:
            log.debug("exciter off, ignoring %s", cmd.value)
        elif pulse is not None:
            log.debug("pulse already active, ignoring %s", cmd.value)
        else:
            pulse = "Up" if cmd is ExciterCommand.PulseUp else "Down"
            remaining = params.pulse_duration

    if not enabled:
        vf = max(vf - params.slew * dt, 0.0)
    elif pulse is not None:
        ramp = params.slew * min(dt, remaining)
        vf += ramp if pulse == "Up" else -ramp
        remaining -= dt
        if remaining <= _PULSE_EPS:
            pulse, remaining = None, 0.0
    vf = min(max(vf, 0.0), params.field_max)
    return ExciterState(enabled, vf, pulse, remaining)


# -- grid ----------------------------------------------------------------------

@dataclass(frozen=True)
class GridSource:
    """Infinite bus with optional step changes ``(t, v_ll, frequency)``."""
    v_ll: float = 400.0
    frequency: float = 50.0
    phase0_deg: float = 0.0
    schedule: tuple = ()

    def __post_init__(self):
        if not self.v_ll >= 0:
            raise InvalidArgumentError("grid v_ll must be non-negative")
        if not self.frequency > 0:
            raise InvalidArgumentError("grid frequency must be positive")
        prev = -math.inf
        for t, v, f in self.schedule:
            if not t > prev:
                raise InvalidArgumentError("schedule times must be strictly increasing")
            if not v >= 0 or not f > 0:
                raise InvalidArgumentError("schedule entries need v_ll >= 0 and frequency > 0")
            prev = t
        # segment start times, frequencies, voltages and phase at segment start
        starts = [0.0]
        freqs = [self.frequency]
        volts = [self.v_ll]
        phases = [self.phase0_deg]
        for t, v, f in self.schedule:
            phases.append(phases[-1] + 360.0 * freqs[-1] * (t - starts[-1]))
            starts.append(float(t))
            freqs.append(float(f))
            volts.append(float(v))
        object.__setattr__(self, "_starts", np.array(starts))
        object.__setattr__(self, "_freqs", np.array(freqs))
        object.__setattr__(self, "_volts", np.array(volts))
        object.__setattr__(self, "_phases", np.array(phases))

    def _segment(self, t):
        if len(self._starts) == 1 or t < self._starts[1]:
            return 0
        return int(np.searchsorted(self._starts, t, side="right")) - 1

    def v_ll_at(self, t):
        return float(self._volts[self._segment(t)])

    def frequency_at(self, t):
        return float(self._freqs[self._segment(t)])

    def phase_at(self, t):
        """Unwrapped phase-a angle (electrical degrees) at ``t``."""
        k = self._segment(t)
        return float(self._phases[k] + 360.0 * self._freqs[k] * (t - self._starts[k]))

    def phase_array(self, times):
        k = np.clip(np.searchsorted(self._starts, times, side="right") - 1, 0, None)
        return self._phases[k] + 360.0 * self._freqs[k] * (times - self._starts[k])

    def frequency_array(self, times):
        k = np.clip(np.searchsorted(self._starts, times, side="right") - 1, 0, None)
        return self._freqs[k]

    def v_ll_array(self, times):
        k = np.clip(np.searchsorted(self._starts, times, side="right") - 1, 0, None)
        return self._volts[k]


@dataclass(frozen=True)
class PowerFlow:
    p: float
    q: float
    elec_torque: float
    i_rms: float


def power_angle(e_ln, v_ln, delta_deg, x_sync):
    """Per-machine P (W), Q (var) and line current (A) behind ``x_sync``.

    Works elementwise on arrays as well as on scalars.
    """
    d = np.radians(delta_deg)
    s, c = np.sin(d), np.cos(d)
    p = 3.0 * e_ln * v_ln * s / x_sync
    q = 3.0 * (e_ln * v_ln * c - v_ln * v_ln) / x_sync
    i = np.hypot(e_ln * c - v_ln, e_ln * s) / x_sync
    return p, q, i


def connected_power(gen, grid, params):
    """Power exchanged with ``grid`` by a machine in state ``gen`` (breaker closed)."""
    if gen.rotor_speed <= 0.0:
        raise InvalidStateError("rotor at standstill with breaker closed")
    e_ln = open_circuit_emf(gen.field_voltage, gen.rotor_speed, params) / SQRT3
    v_ln = grid.v_ll_at(gen.t) / SQRT3
    delta = gen.rotor_angle_deg - grid.phase_at(gen.t)
    p, q, i = (float(v) for v in power_angle(e_ln, v_ln, delta, params.x_sync))
    return PowerFlow(p, q, p / (gen.rotor_speed * RPM_TO_RAD), i)


def electrical_torque_fn(grid, params, field_voltage):
    """Stage-wise electrical torque for :func:`step_rotor` while connected.

    EMF and shaft speed both scale with rpm, so the torque P/w depends on
    the load angle only.
    """
    k = 3.0 * params.k_emf * field_voltage / (
        params.rpm_nominal * SQRT3 * params.x_sync * RPM_TO_RAD)
    v_fixed = grid.v_ll_at(0.0) / SQRT3 if not grid.schedule else None
    f_fixed = grid.frequency if not grid.schedule else None
    ph0 = grid.phase0_deg

    def torque(t, angle_deg, rpm):
        if rpm <= 0.0:
            return 0.0
        if v_fixed is None:
            v_ln = grid.v_ll_at(t) / SQRT3
            grid_phase = grid.phase_at(t)
        else:
            v_ln = v_fixed
            grid_phase = ph0 + 360.0 * f_fixed * t
        return k * v_ln * math.sin(math.radians(angle_deg - grid_phase))

    return torque


# -- breaker -------------------------------------------------------------------

class BreakerPosition(enum.Enum):
    Open = "Open"
    Closed = "Closed"


# tolerance on close-time comparisons so k*dt lands on the scheduled instant
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class BreakerState:
    position: BreakerPosition = BreakerPosition.Open
    close_delay: float = 0.06
    pending_close_at: float | None = None

    @property
    def closed(self):
        return self.position is BreakerPosition.Closed


def breaker_step(state, close_command, t, trip=False):
    """Advance the breaker to time ``t``.

    A trip opens it immediately and cancels a pending close; a close command
    while open schedules closing ``close_delay`` seconds later.
    """
    if trip:
        return replace(state, position=BreakerPosition.Open, pending_close_at=None)
    pending = state.pending_close_at
    if state.position is BreakerPosition.Closed or (pending is None and not close_command):
        return state
    if close_command and pending is None:
        pending = t + state.close_delay
    if pending is not None and t >= pending - _TIME_EPS:
        return replace(state, position=BreakerPosition.Closed, pending_close_at=None)
    return replace(state, pending_close_at=pending)
