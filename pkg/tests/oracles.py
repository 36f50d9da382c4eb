"""Independent reference computations shared by the test modules."""
import numpy as np
from scipy import optimize

from syncrelay import waveform as wf
from syncrelay.plant import RPM_TO_RAD


def noisy(w, level, rng):
    amp = level * float(np.max(np.abs(w.samples_a)))
    n = rng.uniform(-amp, amp, size=(3, len(w)))
    return wf.ThreePhaseWaveform(w.sample_rate, w.samples_a + n[0], w.samples_b + n[1],
                                 w.samples_c + n[2], w.t0)


def spectral_peak(w):
    """Frequency maximising the periodogram of the complex space vector.

    Zero-padded FFT for the coarse peak, then a bounded scalar search on the
    exact DTFT magnitude around it.
    """
    a, b, c = w.samples_a, w.samples_b, w.samples_c
    z = a + np.exp(2j * np.pi / 3) * b + np.exp(-2j * np.pi / 3) * c
    fs = w.sample_rate
    nfft = 1 << 18
    mag = np.abs(np.fft.fft(z, nfft))
    k = int(np.argmax(mag))
    f0 = k * fs / nfft
    n = np.arange(len(z))

    def neg_mag(f):
        return -abs(np.sum(z * np.exp(-2j * np.pi * f * n / fs)))

    res = optimize.minimize_scalar(neg_mag, bounds=(f0 - 2 * fs / nfft, f0 + 2 * fs / nfft),
                                   method="bounded", options={"xatol": 1e-7})
    return res.x


def reference_speed(tm, d, j, w_sync, t_end, dt):
    """Independent scalar RK4 loop for J dw/dt = tm - d (w - w_sync), from rest."""
    w = 0.0
    for _ in range(int(round(t_end / dt))):
        k1 = (tm - d * (w - w_sync)) / j
        k2 = (tm - d * (w + 0.5 * dt * k1 - w_sync)) / j
        k3 = (tm - d * (w + 0.5 * dt * k2 - w_sync)) / j
        k4 = (tm - d * (w + dt * k3 - w_sync)) / j
        w += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return w / RPM_TO_RAD
