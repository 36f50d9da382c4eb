"""Three-phase waveform synthesis and measurement.

Everything the relay knows about a bus comes through here: RMS voltage,
frequency from phase-a zero crossings, fundamental phase, and phase
sequence.  All functions are pure.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .errors import InsufficientSignalError, InvalidArgumentError

SAMPLE_RATE = 10_000.0
WINDOW = 0.04
SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
_HALF_SQRT3 = 0.5 * SQRT3

# fraction of the window peak used as zero-crossing hysteresis
_HYSTERESIS = 0.2


class PhaseSequence(enum.Enum):
    Positive = "Positive"
    Negative = "Negative"
    Indeterminate = "Indeterminate"


@dataclass(frozen=True)
class ThreePhaseWaveform:
    sample_rate: float
    samples_a: np.ndarray
    samples_b: np.ndarray
    samples_c: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InvalidArgumentError("sample_rate must be positive")
        n = len(self.samples_a)
        if len(self.samples_b) != n or len(self.samples_c) != n:
            raise InvalidArgumentError("phase arrays differ in length")
        if n < 2:
            raise InvalidArgumentError("waveform needs at least 2 samples")

    def __len__(self):
        return len(self.samples_a)

    @property
    def times(self):
        return self.t0 + np.arange(len(self)) / self.sample_rate

    @property
    def t_end(self):
        return self.t0 + (len(self) - 1) / self.sample_rate

    def scaled(self, k):
        return ThreePhaseWaveform(self.sample_rate, k * self.samples_a,
                                  k * self.samples_b, k * self.samples_c, self.t0)

    def swapped_bc(self):
        return ThreePhaseWaveform(self.sample_rate, self.samples_a,
                                  self.samples_c, self.samples_b, self.t0)


@dataclass(frozen=True)
class MeasurementSnapshot:
    """Bus quantities at time ``t``.

    ``phase_deg`` is the phase of the phase-a fundamental at ``t`` (the last
    sample of the window it was measured from), in [0, 360).
    """
    v_rms_ll: float
    frequency: float
    phase_deg: float
    i_rms: float = 0.0
    t: float = 0.0


def wrap360(deg):
    d = math.fmod(deg, 360.0)
    if d < 0.0:
        d += 360.0
    # fmod of a tiny negative can round up to exactly 360
    return 0.0 if d >= 360.0 else d


def phase_difference(phase_a_deg, phase_b_deg):
    """Return ``a - b`` wrapped into (-180, 180]."""
    d = math.fmod(phase_a_deg - phase_b_deg, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def synthesize_three_phase(v_rms_ln, frequency, phase0_deg, duration,
                           sample_rate=SAMPLE_RATE, t0=0.0):
    """Balanced positive-sequence test signal.

    Phase a is ``sqrt(2)*v_rms_ln*sin(2*pi*f*(t - t0) + phase0)``; b lags a by
    120 degrees and c lags b by 120 degrees.
    """
    for name, value in (("v_rms_ln", v_rms_ln), ("frequency", frequency),
                        ("phase0_deg", phase0_deg), ("duration", duration),
                        ("sample_rate", sample_rate), ("t0", t0)):
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{name} must be finite")
    if frequency < 0:
        raise InvalidArgumentError("frequency must be non-negative")
    if v_rms_ln < 0:
        raise InvalidArgumentError("v_rms_ln must be non-negative")
    n = int(round(duration * sample_rate))
    if n < 2:
        raise InvalidArgumentError("duration*sample_rate must be at least 2")
    tau = np.arange(n) / sample_rate
    theta = 2.0 * np.pi * frequency * tau + math.radians(phase0_deg)
    return from_phase_angle(theta, np.full(n, float(v_rms_ln)), sample_rate, t0)


def from_phase_angle(theta_rad, v_rms_ln, sample_rate, t0=0.0, sequence=1):
    """Build a waveform from a sampled phase-a angle trajectory (radians).

    ``v_rms_ln`` may be a scalar or an array matching ``theta_rad``.
    ``sequence=-1`` produces an acb (negative-sequence) set.
    """
    amp = SQRT2 * np.asarray(v_rms_ln, dtype=float)
    shift = sequence * 2.0 * np.pi / 3.0
    return ThreePhaseWaveform(
        sample_rate,
        amp * np.sin(theta_rad),
        amp * np.sin(theta_rad - shift),
        amp * np.sin(theta_rad + shift),
        t0,
    )


def _phase_rms(x):
    return math.sqrt(float(np.dot(x, x)) / len(x))


def phase_rms(waveform):
    """RMS of phases a, b and c (V, line-to-neutral)."""
    return (_phase_rms(waveform.samples_a), _phase_rms(waveform.samples_b),
            _phase_rms(waveform.samples_c))


def rms(waveform):
    """Mean of the three per-phase RMS values (V, line-to-neutral)."""
    return (_phase_rms(waveform.samples_a) + _phase_rms(waveform.samples_b)
            + _phase_rms(waveform.samples_c)) / 3.0


def _zero_crossings(x):
    """Fractional sample positions of the zero crossings of ``x``, both edges.

    Crossings are picked with hysteresis at a fraction of the window peak so
    noise near zero cannot add spurious ones: each excursion from one side
    of the ``+/-h`` band to the other yields one crossing, placed by linear
    interpolation at the last sign change inside it.
    """
    n = len(x)
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        return np.empty(0)
    outside = np.flatnonzero(np.abs(x) > _HYSTERESIS * peak)
    high = x[outside] > 0.0
    k = np.flatnonzero(high[:-1] != high[1:])
    ends = outside[k + 1]
    up = high[k + 1]
    # a window opening or closing inside the band still shows a crossing
    if (x[0] <= 0.0) if high[0] else (x[0] > 0.0):
        ends = np.concatenate(([outside[0]], ends))
        up = np.concatenate(([high[0]], up))
    if (x[-1] > 0.0) if not high[-1] else (x[-1] <= 0.0):
        ends = np.concatenate((ends, [n - 1]))
        up = np.concatenate((up, [not high[-1]]))
    if ends.size == 0:
        return np.empty(0)
    pos = x > 0.0
    rising = np.flatnonzero(~pos[:-1] & pos[1:])
    falling = np.flatnonzero(pos[:-1] & ~pos[1:])
    j = np.where(up, rising[np.searchsorted(rising, ends) - 1] if rising.size else 0,
                 falling[np.searchsorted(falling, ends) - 1] if falling.size else 0)
    return j + x[j] / (x[j] - x[j + 1])


def _coarse_frequency(waveform):
    crossings = _zero_crossings(waveform.samples_a)
    if len(crossings) < 2:
        raise InsufficientSignalError(
            f"need 2 zero crossings, found {len(crossings)}")
    span = (crossings[-1] - crossings[0]) / waveform.sample_rate
    return 0.5 * (len(crossings) - 1) / span


def _space_vector(waveform):
    """Clarke space vector ``x + jy`` of the set, turned to rotate forwards.

    For a balanced set with phase a ``A*sin(theta)`` this is
    ``1.5*A*exp(j*(theta - 90 deg))`` whichever the phase sequence.
    """
    a, b, c = waveform.samples_a, waveform.samples_b, waveform.samples_c
    x = a - 0.5 * (b + c)
    y = _HALF_SQRT3 * (b - c)
    if np.dot(x[:-1], y[1:]) < np.dot(y[:-1], x[1:]):
        y = -y
    return x, y


def _demodulate(x, y, frequency, sample_rate):
    ph = (2.0 * np.pi * frequency / sample_rate) * np.arange(len(x))
    co = np.cos(ph)
    si = np.sin(ph)
    # (x + jy) * exp(-j*ph)
    return x * co + y * si, y * co - x * si


def _track(waveform, frequency, refine):
    """Frequency and phase-a phase (deg) at the last sample, from the space vector.

    With ``refine`` the frequency is corrected by the phase advance of the
    demodulated vector between the two halves of the window.
    """
    fs = waveform.sample_rate
    n = len(waveform)
    x, y = _space_vector(waveform)
    re, im = _demodulate(x, y, frequency, fs)
    f = frequency
    if refine:
        h = n // 2
        r1, i1 = float(re[:h].sum()), float(im[:h].sum())
        r2, i2 = float(re[n - h:].sum()), float(im[n - h:].sum())
        advance = math.atan2(i2 * r1 - r2 * i1, r2 * r1 + i2 * i1)
        f = frequency + advance * fs / (2.0 * math.pi * (n - h))
    # the mean demodulated vector refers to the middle of the window
    half_span = 0.5 * (n - 1) / fs
    angle = (math.atan2(float(im.sum()), float(re.sum()))
             + 2.0 * math.pi * (frequency + f) * half_span + 0.5 * math.pi)
    return f, wrap360(math.degrees(angle))


def estimate_frequency(waveform):
    """Frequency (Hz) of the set in ``waveform``.

    Zero crossings of phase a, half a period apart, give a first estimate
    (and decide whether there is a signal at all); the phase drift of the three-phase
    space vector across the window then removes most of the noise that
    crossing timing alone picks up.
    """
    return _track(waveform, _coarse_frequency(waveform), True)[0]


def fundamental_phase(samples, frequency, sample_rate, t_ref_offset):
    """Amplitude and phase (deg) of the tone at ``frequency`` in ``samples``.

    Least-squares fit of ``A*sin(2*pi*f*tau + phi)`` with ``tau`` measured
    from ``t_ref_offset`` seconds after the first sample.  This is the
    single-bin Fourier correlation made exact for non-integer cycle counts.
    """
    tau = np.arange(len(samples)) / sample_rate - t_ref_offset
    w = 2.0 * np.pi * frequency * tau
    s = np.sin(w)
    c = np.cos(w)
    ss = np.dot(s, s)
    cc = np.dot(c, c)
    sc = np.dot(s, c)
    ys = np.dot(samples, s)
    yc = np.dot(samples, c)
    det = ss * cc - sc * sc
    if det <= 1e-12 * ss * cc:
        # window far too short for this frequency; fall back to correlation
        a_cos, a_sin = ys / ss, yc / cc
    else:
        a_cos = (ys * cc - yc * sc) / det
        a_sin = (yc * ss - ys * sc) / det
    return math.hypot(a_cos, a_sin), wrap360(math.degrees(math.atan2(a_sin, a_cos)))


def measure(waveform, i_rms=0.0, frequency=None):
    """Reduce a window to a :class:`MeasurementSnapshot` stamped at its last sample.

    Pass ``frequency`` to use a known frequency instead of estimating one.
    Raises :class:`InsufficientSignalError` when the frequency cannot be
    estimated.
    """
    if frequency is None:
        frequency, phase = _track(waveform, _coarse_frequency(waveform), True)
    else:
        _, phase = _track(waveform, frequency, False)
    return MeasurementSnapshot(
        v_rms_ll=SQRT3 * rms(waveform),
        frequency=frequency,
        phase_deg=phase,
        i_rms=i_rms,
        t=waveform.t_end,
    )


def check_phase_sequence(waveform, floor=11.5, tolerance_deg=30.0):
    """Classify the rotation of a three-phase set.

    Positive when phase b lags phase a by 120 +/- ``tolerance_deg``; Negative
    when it leads by the same.  Any phase with RMS below ``floor`` volts, or a
    window without a measurable frequency, gives Indeterminate.
    """
    if min(phase_rms(waveform)) < floor:
        return PhaseSequence.Indeterminate
    try:
        f = estimate_frequency(waveform)
    except InsufficientSignalError:
        return PhaseSequence.Indeterminate
    fs = waveform.sample_rate
    _, pa = fundamental_phase(waveform.samples_a, f, fs, 0.0)
    _, pb = fundamental_phase(waveform.samples_b, f, fs, 0.0)
    lag = phase_difference(pa, pb)
    if abs(lag - 120.0) <= tolerance_deg:
        return PhaseSequence.Positive
    if abs(lag + 120.0) <= tolerance_deg:
        return PhaseSequence.Negative
    return PhaseSequence.Indeterminate
