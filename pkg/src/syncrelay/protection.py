"""Definite-time protection: overcurrent, over/undervoltage, over/underfrequency.

Every element runs a timer while its pickup condition holds and latches a
trip when the timer reaches the element's delay.  Latched elements stay
latched until :func:`reset_protection`.

Undervoltage and both frequency elements are supervised by the terminal
voltage: they only arm once the voltage has exceeded
``undervoltage_armed_above``, so a machine coming up from standstill does
not trip on its own run-up.
"""

from dataclasses import dataclass, replace
import enum

from .errors import InvalidArgumentError


class Element(enum.Enum):
    OC = "OC"
    OV = "OV"
    UV = "UV"
    OF = "OF"
    UF = "UF"


ELEMENTS = tuple(Element)
_SUPERVISED = (Element.UV, Element.OF, Element.UF)


@dataclass(frozen=True)
class ProtectionSettings:
    i_pickup: float = 3.25
    v_over: float = 440.0
    v_under: float = 360.0
    f_over: float = 50.5
    f_under: float = 49.5
    delay_oc: float = 0.1
    delay_ov: float = 0.5
    delay_uv: float = 0.5
    delay_of: float = 0.5
    delay_uf: float = 0.5
    undervoltage_armed_above: float = 380.0

    def __post_init__(self):
        if not self.v_under < self.v_over:
            raise InvalidArgumentError("v_under must be below v_over")
        if not self.f_under < self.f_over:
            raise InvalidArgumentError("f_under must be below f_over")
        if not self.i_pickup > 0:
            raise InvalidArgumentError("i_pickup must be positive")
        for el in ELEMENTS:
            if not self.delay(el) >= 0:
                raise InvalidArgumentError(f"delay for {el.value} must be >= 0")

    def delay(self, element):
        return getattr(self, "delay_" + element.value.lower())

    def threshold(self, element):
        return {
            Element.OC: self.i_pickup,
            Element.OV: self.v_over,
            Element.UV: self.v_under,
            Element.OF: self.f_over,
            Element.UF: self.f_under,
        }[element]


@dataclass(frozen=True)
class ElementState:
    element: Element
    timer: float = 0.0
    latched: bool = False
    armed: bool = False
    # picked up on an earlier step; the timer counts from that step
    active: bool = False


@dataclass(frozen=True)
class TripRecord:
    element: Element
    t_trip: float
    measured_value: float
    threshold: float


def initial_states():
    return tuple(ElementState(el, armed=el not in _SUPERVISED) for el in ELEMENTS)


def _picked_up(el, s, snap):
    # boundary semantics: "goes below" is strict, "equal or less" is not
    if el is Element.OC:
        return snap.i_rms >= s.i_pickup, snap.i_rms
    if el is Element.OV:
        return snap.v_rms_ll > s.v_over, snap.v_rms_ll
    if el is Element.UV:
        return snap.v_rms_ll <= s.v_under, snap.v_rms_ll
    if el is Element.OF:
        return snap.frequency > s.f_over, snap.frequency
    return snap.frequency < s.f_under, snap.frequency


_TIMER_EPS = 1e-9


def protection_step(settings, states, snapshot, dt):
    """Advance all five elements by ``dt`` on ``snapshot``.

    Returns ``(states, trips)``; ``trips`` lists the records of elements
    that latched on this step (usually empty).
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    arming = snapshot.v_rms_ll > settings.undervoltage_armed_above
    new_states = []
    trips = []
    for st in states:
        el = st.element
        armed = st.armed or arming
        if st.latched:
            new_states.append(replace(st, armed=armed))
            continue
        hit, value = _picked_up(el, settings, snapshot)
        if not (hit and armed):
            new_states.append(replace(st, timer=0.0, armed=armed, active=False))
            continue
        timer = st.timer + dt if st.active else 0.0
        delay = settings.delay(el)
        if timer >= delay - _TIMER_EPS:
            trips.append(TripRecord(el, snapshot.t, value, settings.threshold(el)))
            new_states.append(ElementState(el, timer, True, armed, True))
        else:
            new_states.append(ElementState(el, timer, False, armed, True))
    return tuple(new_states), trips


def reset_protection(states):
    """Operator reset: clear latches and timers (arming is kept)."""
    return tuple(replace(st, timer=0.0, latched=False, active=False) for st in states)


def tripped(states):
    """Aggregate trip output: true while any element is latched."""
    return any(st.latched for st in states)


def latched_elements(states):
    return [st.element for st in states if st.latched]
