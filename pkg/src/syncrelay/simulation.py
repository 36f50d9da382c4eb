"""The merged simulation loop: plant, relay logic, logging and output.

The plant integrates every ``dt`` (1 ms by default).  Every
``control_period`` (10 ms) the relay measures both buses from sliding
windows of synthesized waveform samples and runs protection, the
synchronizer, the governor and the AVR, in that order.  Each row of the
log records the true plant state at its time step; the controllers only
ever see measurements.
"""

from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from . import waveform as wf
from .control import (ExciterCommand, PidState, bumpless_state, governor_step, avr_step,
                      power_control_step)
from .errors import InsufficientSignalError, NumericalDivergenceError
from .plant import (ExciterState, GeneratorState, BreakerState, breaker_step, connected_power,
                    electrical_torque_fn, frequency_from_rpm, open_circuit_emf, power_angle,
                    rpm_from_frequency, step_exciter, step_rotor)
from .protection import initial_states, latched_elements, protection_step, tripped
from .synchronizer import SyncPhase, SyncState, abort, evaluate_conditions, sync_step
from .waveform import PhaseSequence, SQRT3, phase_difference

CSV_COLUMNS = ("t", "gen_rpm", "gen_freq", "grid_freq", "gen_v_ll", "grid_v_ll", "dphi_deg",
               "field_v", "torque_cmd", "breaker", "sync_phase", "p_w", "q_var", "trip_flags")
_NUMERIC = ("t", "gen_rpm", "gen_freq", "grid_freq", "gen_v_ll", "grid_v_ll", "dphi_deg",
            "field_v", "torque_cmd", "p_w", "q_var")

EVENT_KINDS = ("ExciterOn", "PulseUp", "PulseDown", "HoldStart", "HoldReset", "CloseCommand",
               "BreakerClosed", "Trip", "Aborted")

# terminal RMS (V, L-N) below which sequence and frequency are not trusted
SEQUENCE_FLOOR = 11.5

# the slip bias keeps the generator this far (Hz) below the overfrequency pickup
OF_MARGIN = 0.01


@dataclass(frozen=True)
class EventRecord:
    t: float
    kind: str
    detail: str = ""
    data: dict = field(default_factory=dict, compare=False)


@dataclass
class SimulationLog:
    """Row columns (numpy arrays / string lists) plus the event list."""
    columns: dict
    events: list
    trips: list
    dt: float
    precision: int = 6
    error: str | None = None
    poles: int = 4

    def __len__(self):
        return len(self.columns["t"])

    def column(self, name):
        return self.columns[name]

    def rows(self):
        n = len(self)
        for i in range(n):
            yield {c: self.columns[c][i] for c in CSV_COLUMNS}

    def events_of(self, *kinds):
        return [e for e in self.events if e.kind in kinds]


@dataclass(frozen=True)
class Summary:
    synced: bool
    t_close: float | None
    close_dphi: float | None
    trips: list
    settle_time: float | None


class _Recorder:
    """Raw per-row plant state; derived columns are computed once at the end."""

    def __init__(self, n_rows):
        self.rpm = np.empty(n_rows)
        self.angle = np.empty(n_rows)
        self.field = np.empty(n_rows)
        self.torque = np.empty(n_rows)
        self.breaker = np.zeros(n_rows, dtype=np.int8)
        self.phase = [""] * n_rows
        self.flags = [""] * n_rows
        self.n = 0

    def finish(self, times, grid, params):
        n = self.n
        t = times[:n].copy()
        rpm = self.rpm[:n].copy()
        field_v = self.field[:n].copy()
        grid_phase = grid.phase_array(t)
        grid_v = grid.v_ll_array(t).astype(float)
        gen_v = params.k_emf * field_v * (rpm / params.rpm_nominal)
        dphi = np.fmod(self.angle[:n] - grid_phase, 360.0)
        dphi = np.where(dphi > 180.0, dphi - 360.0, np.where(dphi <= -180.0, dphi + 360.0, dphi))
        breaker = self.breaker[:n].copy()
        live = (breaker == 1) & (rpm > 0.0)
        p, q, _ = power_angle(gen_v / SQRT3, grid_v / SQRT3, dphi, params.x_sync)
        return {
            "t": t,
            "gen_rpm": rpm,
            "gen_freq": rpm * params.poles / 120.0,
            "grid_freq": grid.frequency_array(t),
            "gen_v_ll": gen_v,
            "grid_v_ll": grid_v,
            "dphi_deg": dphi,
            "field_v": field_v,
            "torque_cmd": self.torque[:n].copy(),
            "breaker": breaker,
            "sync_phase": self.phase[:n],
            "p_w": np.where(live, p, 0.0),
            "q_var": np.where(live, q, 0.0),
            "trip_flags": self.flags[:n],
        }


class Simulator:
    """One scenario run.  Use :func:`run_scenario` unless stepping by hand."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.params = cfg.generator
        self.poles = cfg.generator.poles
        self.grid = cfg.grid
        self.gen = GeneratorState(rotor_speed=cfg.initial_speed,
                                  rotor_angle_deg=wf.wrap360(cfg.initial_angle))
        self.exciter = ExciterState()
        self.breaker = BreakerState(close_delay=cfg.breaker_delay)
        self.sync = SyncState()
        self.gov_state = PidState()
        self.power_state = None
        self.prot = initial_states()
        self.rng = np.random.default_rng(cfg.rng_seed) if cfg.rng_seed else None
        self.events = []
        self.trips = []

        self.torque_cmd = 0.0
        self.pending_cmd = ExciterCommand.Hold
        self.last_pulse_t = None
        self.shutdown = False
        self.trip_flags = ""

        n = cfg.n_steps
        self.n_steps = n
        self.times = np.arange(n + 1) * cfg.dt
        # unwrapped rotor angle, EMF (L-N) and breaker state per plant step
        self.angle_hist = np.zeros(n + 1)
        self.emf_hist = np.zeros(n + 1)
        self.closed_hist = np.zeros(n + 1, dtype=bool)
        self.angle_hist[0] = cfg.initial_angle
        self.emf_hist[0] = self._emf_ln()
        self.k = 0

        self.n_window = max(int(round(cfg.measurement_window * cfg.sample_rate)), 2)
        self.sequence = -1 if cfg.reverse_sequence else 1
        self.noise_amp = cfg.noise_level * math.sqrt(2.0) * self.params.v_ln_nominal

    # -- helpers ----------------------------------------------------------------

    def _emf_ln(self):
        return open_circuit_emf(self.gen.field_voltage, self.gen.rotor_speed, self.params) / SQRT3

    def _event(self, t, kind, detail="", **data):
        self.events.append(EventRecord(t, kind, detail, data))

    def _window_times(self, t):
        fs = self.cfg.sample_rate
        return t - (self.n_window - 1) / fs + np.arange(self.n_window) / fs

    def _noisy(self, w):
        if self.rng is None or self.noise_amp == 0.0:
            return w
        n = len(w)
        noise = self.rng.uniform(-self.noise_amp, self.noise_amp, size=(3, n))
        return wf.ThreePhaseWaveform(w.sample_rate, w.samples_a + noise[0],
                                     w.samples_b + noise[1], w.samples_c + noise[2], w.t0)

    def _waveforms(self, t):
        """Sampled grid and generator-terminal windows ending at ``t``."""
        k = self.k
        ts = self._window_times(t)
        fs = self.cfg.sample_rate
        grid_theta = np.radians(self.grid.phase_array(ts))
        grid_v = self.grid.v_ll_array(ts) / SQRT3
        grid_w = wf.from_phase_angle(grid_theta, grid_v, fs, ts[0])

        k0 = max(k - int(math.ceil(self.cfg.measurement_window / self.cfg.dt)) - 1, 0)
        step_t = self.times[k0:k + 1]
        gen_theta = np.radians(np.interp(ts, step_t, self.angle_hist[k0:k + 1]))
        gen_v = np.interp(ts, step_t, self.emf_hist[k0:k + 1])
        gen_w = wf.from_phase_angle(gen_theta, gen_v, fs, ts[0], self.sequence)

        idx = np.clip(np.floor((ts + 1e-12) / self.cfg.dt).astype(int), 0, k)
        closed = self.closed_hist[idx]
        if closed.any():
            # a closed breaker ties the terminals to the bus
            gen_w = wf.ThreePhaseWaveform(
                fs,
                np.where(closed, grid_w.samples_a, gen_w.samples_a),
                np.where(closed, grid_w.samples_b, gen_w.samples_b),
                np.where(closed, grid_w.samples_c, gen_w.samples_c),
                ts[0])
        return self._noisy(grid_w), self._noisy(gen_w)

    @staticmethod
    def _snapshot(w, i_rms=0.0):
        try:
            return wf.measure(w, i_rms=i_rms)
        except InsufficientSignalError:
            return wf.MeasurementSnapshot(wf.SQRT3 * wf.rms(w), 0.0, 0.0, i_rms, w.t_end)

    # -- control tick -------------------------------------------------------------

    def control_tick(self, t):
        if self.shutdown:
            # locked out after a trip: the machine is coasting down on purpose
            return
        cfg = self.cfg
        tc = cfg.control_period
        grid_w, gen_w = self._waveforms(t)
        grid_snap = self._snapshot(grid_w)
        flow = connected_power(self.gen, self.grid, self.params) if self.breaker.closed else None
        gen_snap = self._snapshot(gen_w, flow.i_rms if flow else 0.0)

        self.prot, new_trips = protection_step(cfg.protection, self.prot, gen_snap, tc)
        if new_trips:
            self.trip_flags = ";".join(e.value for e in latched_elements(self.prot))
        for trip in new_trips:
            self.trips.append(trip)
            self._event(t, "Trip", f"{trip.element.value} measured={trip.measured_value:.4f} "
                        f"threshold={trip.threshold:.4f}", element=trip.element.value)
        if tripped(self.prot):
            self.shutdown = True
            self.breaker = breaker_step(self.breaker, False, t, trip=True)
            if self.sync.phase is not SyncPhase.Aborted:
                self.sync = abort(self.sync, t)
                self._event(t, "Aborted", "protection trip")
            self.pending_cmd = ExciterCommand.Off
            self.torque_cmd = 0.0
            return

        grid_f = grid_snap.frequency
        target_rpm = rpm_from_frequency(grid_f, self.poles) if grid_f > 0 else 0.0
        phase = self.sync.phase
        if phase not in (SyncPhase.Synchronized, SyncPhase.Aborted):
            # the sequence check needs every phase above the floor
            gen_ln = min(wf.phase_rms(gen_w))
            speed_ready = target_rpm > 0 and (
                self.gen.rotor_speed >= cfg.sync.excite_speed_ratio * target_rpm)
            voltage_ready = gen_ln >= SEQUENCE_FLOOR and gen_snap.frequency > 0
            if phase is SyncPhase.ExciterOn and voltage_ready:
                seq_gen = wf.check_phase_sequence(gen_w, floor=SEQUENCE_FLOOR)
                seq_grid = wf.check_phase_sequence(grid_w, floor=SEQUENCE_FLOOR)
                seq = seq_gen if seq_gen is seq_grid else PhaseSequence.Indeterminate
            else:
                seq = cfg.sync.seq_required if self.sync.seq_ok else PhaseSequence.Indeterminate
            status = evaluate_conditions(gen_snap, grid_snap, seq, cfg.sync)
            self.sync, close, events = sync_step(
                self.sync, status, cfg.sync, tc, t, speed_ready=speed_ready,
                voltage_ready=voltage_ready, breaker_closed=self.breaker.closed)
            for kind, detail in events:
                self._event(t, kind, detail, dphi_predicted=status.dphi_predicted,
                            slip=status.slip, dv=status.dv)
                if kind == "ExciterOn":
                    self.pending_cmd = ExciterCommand.On
            if close:
                self.breaker = breaker_step(self.breaker, True, t)

        phase = self.sync.phase
        if phase is SyncPhase.Synchronized and cfg.power.enabled:
            flow = connected_power(self.gen, self.grid, self.params)
            if self.power_state is None:
                self.power_state = bumpless_state(cfg.power_pid, self.torque_cmd)
            self.torque_cmd, self.power_state, cmd = power_control_step(
                cfg.power, flow.p, flow.q, cfg.power_pid, self.power_state, cfg.avr,
                self.exciter, t, tc, self.breaker.closed, self.last_pulse_t)
        else:
            offset = 0.0
            if phase not in (SyncPhase.CloseIssued, SyncPhase.Synchronized) and grid_f > 0:
                # always fast: the governor cannot brake, and damping pulls a
                # free shaft onto grid speed, so a slow bias would never sweep
                gap = cfg.protection.f_over - grid_f
                room = max(gap - OF_MARGIN, 0.5 * gap, 0.0)
                offset = min(cfg.sync.slip_bias, room)
            if grid_f > 0:
                self.torque_cmd, self.gov_state, _ = governor_step(
                    cfg.governor, self.gov_state, grid_f, self.gen.rotor_speed, self.poles, tc,
                    freq_offset=offset)
            cmd = ExciterCommand.Hold
            if self.pending_cmd is ExciterCommand.Hold:
                cmd = avr_step(cfg.avr, gen_snap.v_rms_ll, grid_snap.v_rms_ll, self.exciter, t,
                               self.last_pulse_t)
        if cmd in (ExciterCommand.PulseUp, ExciterCommand.PulseDown):
            self.pending_cmd = cmd
            self.last_pulse_t = t
            self._event(t, cmd.value, f"gen_v={gen_snap.v_rms_ll:.3f} grid_v={grid_snap.v_rms_ll:.3f}")

    # -- plant step ---------------------------------------------------------------

    def plant_step(self):
        cfg = self.cfg
        dt = cfg.dt
        k = self.k
        t = self.times[k]
        self.exciter = step_exciter(self.exciter, self.pending_cmd, dt, cfg.exciter)
        self.pending_cmd = ExciterCommand.Hold
        g = self.gen
        gen = GeneratorState(g.rotor_speed, g.rotor_angle_deg, self.exciter.field_voltage, g.t)
        te = 0.0
        if self.breaker.closed:
            te = electrical_torque_fn(self.grid, self.params, gen.field_voltage)
        sync_speed = rpm_from_frequency(self.grid.frequency_at(t), self.poles)
        old_angle = gen.rotor_angle_deg
        new = step_rotor(gen, self.torque_cmd, te, self.params, dt, sync_speed)
        # keep the logged time on the k*dt grid
        self.gen = GeneratorState(new.rotor_speed, new.rotor_angle_deg, new.field_voltage,
                                  float(self.times[k + 1]))
        self.k = k + 1
        t1 = self.times[k + 1]

        was_closed = self.breaker.closed
        self.breaker = breaker_step(self.breaker, False, t1)
        if self.breaker.closed and not was_closed:
            dphi = phase_difference(self.gen.rotor_angle_deg, self.grid.phase_at(t1))
            slip = frequency_from_rpm(self.gen.rotor_speed, self.poles) - self.grid.frequency_at(t1)
            dv = open_circuit_emf(self.gen.field_voltage, self.gen.rotor_speed, self.params) \
                - self.grid.v_ll_at(t1)
            self._event(t1, "BreakerClosed", f"dphi={dphi:.4f} slip={slip:.5f} dv={dv:.4f}",
                        dphi=dphi, slip=slip, dv=dv)

        self.angle_hist[k + 1] = self.angle_hist[k] + phase_difference(
            self.gen.rotor_angle_deg, old_angle)
        self.emf_hist[k + 1] = self._emf_ln()
        self.closed_hist[k + 1] = self.breaker.closed

    # -- logging ------------------------------------------------------------------

    def record(self, rec):
        i = rec.n
        gen = self.gen
        rec.rpm[i] = gen.rotor_speed
        rec.angle[i] = gen.rotor_angle_deg
        rec.field[i] = self.exciter.field_voltage
        rec.torque[i] = self.torque_cmd
        rec.breaker[i] = 1 if self.breaker.closed else 0
        rec.phase[i] = self.sync.phase.value
        rec.flags[i] = self.trip_flags
        rec.n = i + 1

    def run(self):
        cfg = self.cfg
        rec = _Recorder(self.n_steps + 1)
        every = cfg.control_every
        error = None
        try:
            for k in range(self.n_steps + 1):
                if k % every == 0:
                    self.control_tick(self.times[k])
                self.record(rec)
                if k == self.n_steps:
                    break
                self.plant_step()
        except NumericalDivergenceError as exc:
            error = str(exc)
            self._event(self.times[self.k], "Aborted", f"numerical divergence: {exc}")
            log = self._log(rec, error)
            exc.log = log
            raise
        return self._log(rec, error)

    def _log(self, rec, error):
        return SimulationLog(rec.finish(self.times, self.grid, self.params), list(self.events), list(self.trips), self.cfg.dt,
                             self.cfg.precision, error, self.poles)


def run_scenario(cfg):
    """Run ``cfg`` to completion and return its :class:`SimulationLog`.

    A numerical divergence raises :class:`NumericalDivergenceError` whose
    ``log`` attribute carries the partial log up to the failure.
    """
    return Simulator(cfg).run()


# -- output -------------------------------------------------------------------------

def write_csv(log, precision=None):
    """Render the row log as CSV text (``\\n`` line endings, fixed-point numbers)."""
    p = log.precision if precision is None else precision
    cols = log.columns
    # rounding first, then +0.0, turns -0.000... into 0.000...
    num = {c: np.round(np.asarray(cols[c], dtype=float), p) + 0.0 for c in _NUMERIC}
    f = f"{{:.{p}f}}"
    lines = [",".join(CSV_COLUMNS)]
    order = [(c, c in num) for c in CSV_COLUMNS]
    data = [num[c].tolist() if is_num else (cols[c].tolist() if c == "breaker" else cols[c])
            for c, is_num in order]
    fmts = [f.format if is_num else str for _c, is_num in order]
    for row in zip(*data):
        lines.append(",".join(fm(v) for fm, v in zip(fmts, row)))
    return "\n".join(lines) + "\n"


def write_events(log, precision=None):
    p = log.precision if precision is None else precision
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "kind", "detail"))
    for e in log.events:
        w.writerow((f"{round(e.t, p) + 0.0:.{p}f}", e.kind, e.detail))
    return buf.getvalue()


def read_csv(text):
    """Parse :func:`write_csv` output back into a column dict."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        if name in _NUMERIC:
            out[name] = np.array([float(v) for v in vals])
        elif name == "breaker":
            out[name] = np.array([int(v) for v in vals], dtype=np.int8)
        else:
            out[name] = vals
    return out


def summarize(log, rpm_tol=1.0, v_tol=5.0):
    """Headline metrics of a run.

    ``synced`` means the breaker closed and no protection element was latched
    at the end; ``settle_time`` is the first row time after which the
    machine stays within ``rpm_tol`` of synchronous speed and ``v_tol`` of
    grid voltage for the rest of the run.
    """
    closed = log.events_of("BreakerClosed")
    t_close = float(closed[0].t) if closed else None
    close_dphi = float(closed[0].data["dphi"]) if closed else None
    trips = list(log.trips)
    synced = bool(closed and not trips and len(log) and log.columns["breaker"][-1] == 1)

    settle = None
    if len(log):
        c = log.columns
        grid_rpm = c["grid_freq"] * 120.0 / log.poles
        ok = (np.abs(c["gen_rpm"] - grid_rpm) <= rpm_tol) & (
            np.abs(c["gen_v_ll"] - c["grid_v_ll"]) <= v_tol)
        if ok[-1]:
            bad = np.flatnonzero(~ok)
            settle = float(c["t"][bad[-1] + 1]) if bad.size else float(c["t"][0])
    return Summary(synced, t_close, close_dphi, trips, settle)
