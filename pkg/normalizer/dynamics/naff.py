"""Numerical analysis of fundamental frequencies.

The strongest tone of a complex signal is found as the maximum of the
Hanning-windowed correlation |<f, exp(i w t)>| around the highest FFT bin,
the amplitudes of all tones found so far are fitted by least squares and
subtracted, and the search repeats on the remainder.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import simpson
from scipy.optimize import brentq, minimize_scalar

from ..errors import DomainError, PeakBelowNoise
from ..util import FileManager, Logger

MIN_SAMPLES = 64


def hanning(x):
    return 1 + np.cos(x)


@dataclass
class FrequencyEstimate:
    freq: float
    amplitude: complex
    residual: float

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError(f"residual must be non negative, got {self.residual}")

    @property
    def period(self):
        return 2 * np.pi / abs(self.freq) if self.freq else np.inf

    def to_dict(self):
        return {"freq": self.freq, "amplitude_re": self.amplitude.real, "amplitude_im": self.amplitude.imag,
                "abs_amplitude": abs(self.amplitude), "residual": self.residual}


class NAFF:
    """Frequency analysis of signals sampled on a uniform grid of times."""

    noise_floor = 0.0
    refinements = 3

    def __init__(self, t):
        self.t = np.asarray(t, dtype=np.float64)
        if self.t.ndim != 1 or self.t.shape[0] < MIN_SAMPLES:
            raise DomainError(f"At least {MIN_SAMPLES} samples are required, got {self.t.size}")
        step = np.diff(self.t)
        if step[0] <= 0 or np.max(np.abs(step - step[0])) > 1e-9 * abs(step[0]) * max(1.0, len(self.t) / 1e3):
            raise DomainError("The sampling must be uniform and increasing")
        self.n_input = self.t.shape[0]
        # an odd sample count keeps the Simpson weights symmetric about the centre
        self.t = self.t[:self.n_input - (1 - self.n_input % 2)]
        self.step = float((self.t[-1] - self.t[0]) / (len(self.t) - 1))
        self.ts = 0.5 * (self.t[-1] + self.t[0])
        self.T = 0.5 * (self.t[-1] - self.t[0])
        self.tz = self.t - self.ts
        self.chi = hanning(self.tz * np.pi / self.T)

    def _check(self, f):
        f = np.asarray(f, dtype=np.complex128)
        if f.shape == self.t.shape:
            return f
        if f.shape != (self.n_input,):
            raise DomainError(f"Signal of shape {f.shape} for {self.n_input} samples")
        return f[:self.t.shape[0]]

    def hanning_product(self, u1, u2):
        """<u1, u2> = 1/(2T) int u1 conj(u2) chi dt."""
        integrand = u1 * np.conj(u2) * self.chi
        return (simpson(integrand.real, x=self.tz) + 1j * simpson(integrand.imag, x=self.tz)) / (2 * self.T)

    def _tone(self, w):
        return np.exp(1j * w * self.tz)

    def _correlation(self, f, w):
        return self.hanning_product(f, self._tone(w))

    def _slope(self, f, w):
        # derivative of |<f, e_w>|^2 with respect to w
        phi = self._correlation(f, w)
        dphi = self.hanning_product(f, 1j * self.tz * self._tone(w))
        return 2.0 * (np.conj(phi) * dphi).real

    def fft_guess(self, f):
        spectrum = np.abs(np.fft.fft(f * self.chi))
        omegas = 2 * np.pi * np.fft.fftfreq(f.size, self.step)
        return float(omegas[int(np.argmax(spectrum))])

    def frequency(self, f, guess=None):
        """Frequency of the strongest tone of f near ``guess`` (FFT peak by default)."""
        f = self._check(f)
        w0 = self.fft_guess(f) if guess is None else float(guess)
        width = np.pi / self.T
        found = minimize_scalar(lambda w: -abs(self._correlation(f, w)) ** 2, bounds=(w0 - width, w0 + width),
                                method='bounded', options={'xatol': 1e-12 * max(1.0, abs(w0))})
        w = float(found.x)
        delta = 1e-3 * width
        for _ in range(4):
            left, right = self._slope(f, w - delta), self._slope(f, w + delta)
            if left * right < 0:
                return float(brentq(lambda x: self._slope(f, x), w - delta, w + delta, xtol=1e-15, rtol=4e-16))
            if left == 0:
                return w - delta
            if right == 0:
                return w + delta
            delta *= 4
        Logger.debug(f"No derivative bracket around {w}, keeping the bounded maximum")
        return w

    def amplitudes(self, f, frequencies):
        """Least-squares amplitudes of the tones exp(i w (t - ts)) under the windowed product."""
        tones = [self._tone(w) for w in frequencies]
        gram = np.array([[self.hanning_product(a, b) for a in tones] for b in tones])
        rhs = np.array([self.hanning_product(f, b) for b in tones])
        centred = np.linalg.solve(gram, rhs)
        return centred, tones

    def _remainder(self, f, frequencies):
        centred, tones = self.amplitudes(f, frequencies)
        remainder = f - sum(a * tone for a, tone in zip(centred, tones))
        return centred, remainder

    def _norm(self, f):
        return float(np.sqrt(max(self.hanning_product(f, f).real, 0.0)))

    def run(self, f, n_freqs):
        """Extract ``n_freqs`` tones; estimates are sorted by extraction order."""
        f = self._check(f)
        if n_freqs < 1:
            raise DomainError(f"n_freqs must be at least 1, got {n_freqs}")
        frequencies = []
        remainder = f
        for k in range(n_freqs):
            w = self.frequency(remainder)
            peak = abs(self._correlation(remainder, w))
            if peak <= self.noise_floor:
                error = PeakBelowNoise(f"Tone {k + 1} has amplitude {peak:.3e} below the floor {self.noise_floor:.3e}")
                error.found = self._estimates(f, frequencies) if frequencies else []
                raise error
            frequencies.append(w)
            _, remainder = self._remainder(f, frequencies)
            Logger.debug(f"Tone {k + 1}: w = {w:.15g}, |a| = {peak:.3e}")
        for _ in range(self.refinements if len(frequencies) > 1 else 0):
            for k in range(len(frequencies)):
                others = frequencies[:k] + frequencies[k + 1:]
                _, isolated = self._remainder(f, others)
                frequencies[k] = self.frequency(isolated, guess=frequencies[k])
        return self._estimates(f, frequencies)

    def _estimates(self, f, frequencies):
        estimates = []
        for k in range(len(frequencies)):
            centred, remainder = self._remainder(f, frequencies[:k + 1])
            # phase referred to t = 0 instead of the window centre
            amplitude = complex(centred[k] * np.exp(-1j * frequencies[k] * self.ts))
            estimates.append(FrequencyEstimate(float(frequencies[k]), amplitude, self._norm(remainder)))
        return estimates


def frequency_analysis(signal, t_step, n_freqs, t0=0.0, noise_floor=None):
    """NAFF on ``signal`` sampled every ``t_step`` from ``t0``; frequencies in rad per time unit."""
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.shape[0] < MIN_SAMPLES:
        raise DomainError(f"The signal needs at least {MIN_SAMPLES} samples, got {signal.size}")
    if t_step <= 0:
        raise DomainError(f"t_step must be positive, got {t_step}")
    analysis = NAFF(t0 + t_step * np.arange(signal.shape[0]))
    if noise_floor is not None:
        analysis.noise_floor = float(noise_floor)
    return analysis.run(signal, n_freqs)


def frequency_report(estimates_by_signal, filename="dynamics/frequencies.csv"):
    """CSV of the estimates, one row per (signal, tone)."""
    rows = []
    for name, estimates in estimates_by_signal.items():
        for index, estimate in enumerate(estimates):
            rows.append({"signal": name, "index": index, **estimate.to_dict()})
    frame = pd.DataFrame(rows, columns=["signal", "index", "freq", "amplitude_re", "amplitude_im", "abs_amplitude",
                                        "residual"])
    FileManager.save_csv(frame, filename)
    return frame
