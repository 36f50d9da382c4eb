"""Scenario configuration: a flat ``section.key = value`` text format.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Every key is optional and falls back to the default listed in ``SCHEMA``.
Unknown or repeated keys are errors, so a typo never silently becomes a
default.  ``grid.schedule`` is a ``;``-separated list of ``t:v_ll:frequency``
step changes, e.g. ``grid.schedule = 30:400:49.3; 60:400:50``.
"""

from dataclasses import dataclass, field, replace
import math

from .control import AvrConfig, PidParams, PowerSetpoint, governor_defaults, power_loop_defaults
from .errors import InvalidArgumentError, ScenarioError
from .plant import ExciterParams, GeneratorParams, GridSource
from .protection import ProtectionSettings
from .synchronizer import SyncConfig
from .waveform import PhaseSequence

MAX_DT = 0.005


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 120.0
    dt: float = 0.001
    control_period: float = 0.01
    measurement_window: float = 0.04
    sample_rate: float = 10_000.0
    rng_seed: int = 0
    noise_level: float = 0.0
    precision: int = 6
    generator: GeneratorParams = field(default_factory=GeneratorParams)
    initial_speed: float = 0.0
    initial_angle: float = 0.0
    reverse_sequence: bool = False
    exciter: ExciterParams = field(default_factory=ExciterParams)
    grid: GridSource = field(default_factory=GridSource)
    governor: PidParams = field(default_factory=governor_defaults)
    power_pid: PidParams = field(default_factory=power_loop_defaults)
    power: PowerSetpoint = field(default_factory=PowerSetpoint)
    avr: AvrConfig = field(default_factory=AvrConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    breaker_delay: float = 0.06
    protection: ProtectionSettings = field(default_factory=ProtectionSettings)

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    @property
    def control_every(self):
        return int(round(self.control_period / self.dt))


# -- value codecs --------------------------------------------------------------

def _parse_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _parse_int(text):
    return int(text)


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_sequence(text):
    try:
        return PhaseSequence[text]
    except KeyError:
        raise ValueError(f"expected Positive or Negative, got {text!r}") from None


def _parse_schedule(text):
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"schedule entry {item!r} is not t:v_ll:frequency")
        out.append(tuple(_parse_float(p) for p in parts))
    return tuple(out)


def _fmt_float(v):
    return repr(float(v))


def _fmt_schedule(sched):
    return "; ".join(":".join(_fmt_float(x) for x in entry) for entry in sched)


_CODECS = {
    "float": (_parse_float, _fmt_float),
    "int": (_parse_int, str),
    "bool": (_parse_bool, lambda v: "true" if v else "false"),
    "sequence": (_parse_sequence, lambda v: v.name),
    "schedule": (_parse_schedule, _fmt_schedule),
}


# key -> (path into ScenarioConfig, codec)
SCHEMA = {
    "duration": (("duration",), "float"),
    "dt": (("dt",), "float"),
    "control_period": (("control_period",), "float"),
    "measurement_window": (("measurement_window",), "float"),
    "sample_rate": (("sample_rate",), "float"),
    "rng_seed": (("rng_seed",), "int"),
    "noise_level": (("noise_level",), "float"),
    "precision": (("precision",), "int"),

    "generator.rated_power": (("generator", "rated_power"), "float"),
    "generator.v_ll_nominal": (("generator", "v_ll_nominal"), "float"),
    "generator.v_ln_nominal": (("generator", "v_ln_nominal"), "float"),
    "generator.i_rated": (("generator", "i_rated"), "float"),
    "generator.f_nominal": (("generator", "f_nominal"), "float"),
    "generator.rpm_nominal": (("generator", "rpm_nominal"), "float"),
    "generator.poles": (("generator", "poles"), "int"),
    "generator.exciter_i_rated": (("generator", "exciter_i_rated"), "float"),
    "generator.inertia": (("generator", "inertia_J"), "float"),
    "generator.damping": (("generator", "damping_D"), "float"),
    "generator.k_emf": (("generator", "k_emf"), "float"),
    "generator.x_sync": (("generator", "x_sync"), "float"),
    "generator.initial_speed": (("initial_speed",), "float"),
    "generator.initial_angle": (("initial_angle",), "float"),
    "generator.reverse_sequence": (("reverse_sequence",), "bool"),

    "exciter.slew": (("exciter", "slew"), "float"),
    "exciter.field_max": (("exciter", "field_max"), "float"),
    "exciter.pulse_duration": (("exciter", "pulse_duration"), "float"),

    "grid.v_ll": (("grid", "v_ll"), "float"),
    "grid.frequency": (("grid", "frequency"), "float"),
    "grid.phase0": (("grid", "phase0_deg"), "float"),
    "grid.schedule": (("grid", "schedule"), "schedule"),

    "governor.kp": (("governor", "kp"), "float"),
    "governor.ki": (("governor", "ki"), "float"),
    "governor.kd": (("governor", "kd"), "float"),
    "governor.torque_max": (("governor", "out_max"), "float"),

    "power.enabled": (("power", "enabled"), "bool"),
    "power.p_set": (("power", "p_set"), "float"),
    "power.q_set": (("power", "q_set"), "float"),
    "power.kp": (("power_pid", "kp"), "float"),
    "power.ki": (("power_pid", "ki"), "float"),

    "avr.deadband": (("avr", "deadband_v"), "float"),
    "avr.min_pulse_gap": (("avr", "min_pulse_gap"), "float"),
    "avr.q_deadband": (("avr", "q_deadband_var"), "float"),

    "sync.dv_max": (("sync", "dv_max"), "float"),
    "sync.slip_max": (("sync", "slip_max"), "float"),
    "sync.angle_window": (("sync", "angle_window_deg"), "float"),
    "sync.hold_time": (("sync", "hold_time"), "float"),
    "sync.seq_required": (("sync", "seq_required"), "sequence"),
    "sync.slip_bias": (("sync", "slip_bias"), "float"),
    "sync.excite_speed_ratio": (("sync", "excite_speed_ratio"), "float"),

    "breaker.close_delay": (("breaker_delay",), "float"),

    "protection.i_pickup": (("protection", "i_pickup"), "float"),
    "protection.v_over": (("protection", "v_over"), "float"),
    "protection.v_under": (("protection", "v_under"), "float"),
    "protection.f_over": (("protection", "f_over"), "float"),
    "protection.f_under": (("protection", "f_under"), "float"),
    "protection.delay_oc": (("protection", "delay_oc"), "float"),
    "protection.delay_ov": (("protection", "delay_ov"), "float"),
    "protection.delay_uv": (("protection", "delay_uv"), "float"),
    "protection.delay_of": (("protection", "delay_of"), "float"),
    "protection.delay_uf": (("protection", "delay_uf"), "float"),
    "protection.uv_armed_above": (("protection", "undervoltage_armed_above"), "float"),
}

# sections whose dataclasses are rebuilt (and re-validated) from overrides
_SECTION_KEYS = {}
for _key, (_path, _) in SCHEMA.items():
    if len(_path) == 2:
        _SECTION_KEYS.setdefault(_path[0], {})[_path[1]] = _key


def _get(cfg, path):
    obj = cfg
    for p in path:
        obj = getattr(obj, p)
    return obj


def parse_text(text):
    """Parse a scenario document into ``{key: (value, line)}``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", line=lineno)
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if not key:
            raise ScenarioError("missing key", line=lineno)
        if key not in SCHEMA:
            raise ScenarioError("unknown key", key=key, line=lineno)
        if key in values:
            raise ScenarioError("key given twice", key=key, line=lineno)
        parse, _ = _CODECS[SCHEMA[key][1]]
        try:
            values[key] = (parse(rhs), lineno)
        except ValueError as exc:
            raise ScenarioError(f"bad value {rhs!r} ({exc})", key=key, line=lineno) from None
    return values


def build_config(values):
    """Assemble and validate a :class:`ScenarioConfig` from parsed overrides."""
    base = ScenarioConfig()
    top = {}
    sections = {}
    for key, (value, _line) in values.items():
        path = SCHEMA[key][0]
        if len(path) == 1:
            top[path[0]] = value
        else:
            sections.setdefault(path[0], {})[path[1]] = value

    def line_of(key):
        return values.get(key, (None, None))[1]

    built = {}
    for section, overrides in sections.items():
        obj = getattr(base, section)
        try:
            built[section] = replace(obj, **overrides)
        except InvalidArgumentError as exc:
            key = _blame(section, overrides, str(exc))
            raise ScenarioError(str(exc), key=key, line=line_of(key)) from None
    try:
        cfg = replace(base, **top, **built)
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc)) from None

    # the exciter's pulse length is the AVR's pulse length
    if cfg.avr.pulse_duration != cfg.exciter.pulse_duration:
        cfg = replace(cfg, avr=replace(cfg.avr, pulse_duration=cfg.exciter.pulse_duration))
    if cfg.sync.breaker_delay != cfg.breaker_delay:
        cfg = replace(cfg, sync=replace(cfg.sync, breaker_delay=cfg.breaker_delay))
    _validate(cfg, line_of)
    return cfg


def _blame(section, overrides, message):
    """Pick the overridden key a section-level error most likely refers to."""
    names = _SECTION_KEYS[section]
    for attr in overrides:
        if attr in message:
            return names[attr]
    return names[next(iter(overrides))]


def _validate(cfg, line_of):
    def fail(key, msg):
        raise ScenarioError(msg, key=key, line=line_of(key))

    if not cfg.duration > 0:
        fail("duration", "must be positive")
    if not 0 < cfg.dt <= MAX_DT:
        fail("dt", f"must lie in (0, {MAX_DT}]")
    ratio = cfg.control_period / cfg.dt
    if not cfg.control_period > 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        fail("control_period", "must be a positive whole multiple of dt")
    if not cfg.sample_rate > 0:
        fail("sample_rate", "must be positive")
    if not cfg.measurement_window * cfg.sample_rate >= 2:
        fail("measurement_window", "must span at least 2 samples")
    if cfg.rng_seed < 0:
        fail("rng_seed", "must be >= 0")
    if not cfg.noise_level >= 0:
        fail("noise_level", "must be >= 0")
    if not 0 <= cfg.precision <= 15:
        fail("precision", "must lie in [0, 15]")
    if not cfg.initial_speed >= 0:
        fail("generator.initial_speed", "must be >= 0")
    if not cfg.breaker_delay >= 0:
        fail("breaker.close_delay", "must be >= 0")
    if abs(cfg.power.p_set) > cfg.generator.rated_power:
        fail("power.p_set", "magnitude must not exceed generator.rated_power")
    if cfg.governor.out_min != 0.0:
        fail("governor.torque_max", "governor torque range must start at 0")
    # one pulse must move the EMF by less than the deadband or the AVR hunts
    step_v = cfg.exciter.pulse_step * cfg.generator.k_emf
    if not cfg.avr.deadband_v > step_v:
        fail("avr.deadband", f"must exceed the single-pulse voltage step {step_v:.3f} V")


def load_scenario(text):
    """Parse and validate a scenario document."""
    return build_config(parse_text(text))


def load_scenario_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def dump_scenario(cfg):
    """Serialize every schema key of ``cfg``; ``load_scenario`` inverts this."""
    lines = []
    for key, (path, codec) in SCHEMA.items():
        _, fmt = _CODECS[codec]
        lines.append(f"{key} = {fmt(_get(cfg, path))}")
    return "\n".join(lines) + "\n"


