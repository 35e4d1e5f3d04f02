"""Frequency-domain leakage current estimate.

Each spectral line of the common-mode source drives the series path formed by
the ground resistance, the parallel filter inductors and the PV parasitic
capacitance.  The result is an independent check on the time-domain loop.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

import numpy as np

from .analysis import AnalysisError, HarmonicComponent
from .params import CircuitParams, cm_inductance

__all__ = ["OPEN_CIRCUIT", "cm_impedance", "leakage_spectrum", "leakage_rms_estimate"]

# capacitor blocks DC: infinite impedance
OPEN_CIRCUIT = complex(math.inf, 0.0)


def _impedance(freqs: np.ndarray, params: CircuitParams) -> np.ndarray:
    w = 2.0 * np.pi * np.asarray(freqs, dtype=float)
    l_cm = cm_inductance(params.l_a, params.l_b)
    z = np.full(w.shape, OPEN_CIRCUIT, dtype=complex)
    nz = w > 0
    z[nz] = params.r_g + 1j * (w[nz] * l_cm - 1.0 / (w[nz] * params.c_pv))
    return z


def cm_impedance(f: float, params: CircuitParams) -> complex:
    """Common-mode loop impedance at ``f``; ``OPEN_CIRCUIT`` at DC."""
    if f < 0:
        raise ValueError("frequency must be non-negative")
    if f == 0:
        return OPEN_CIRCUIT
    return complex(_impedance(np.array([f]), params)[0])


def leakage_spectrum(v_icm_harmonics: Sequence[HarmonicComponent], params: CircuitParams) -> list[HarmonicComponent]:
    freqs = [h.frequency for h in v_icm_harmonics]
    if len(set(freqs)) != len(freqs):
        raise ValueError("harmonic frequencies must be distinct")
    out = []
    for h in v_icm_harmonics:
        z = cm_impedance(h.frequency, params)
        if cmath.isinf(z):
            out.append(HarmonicComponent(h.frequency, 0.0, 0.0))
        else:
            out.append(HarmonicComponent(h.frequency, h.magnitude / abs(z), h.phase - cmath.phase(z)))
    return out


def leakage_rms_estimate(record, params: CircuitParams | None = None,
                         max_harmonic_freq: float | None = None) -> float:
    """RMS leakage predicted from the DFT of the recorded ``v_icm``.

    Uses the post-startup window, which must hold whole fundamental cycles,
    and every DFT line up to ``max_harmonic_freq`` (Nyquist when None).
    """
    params = params or record.params
    try:
        window = record.metrics_window()
    except ValueError as exc:
        raise AnalysisError(str(exc)) from None
    v = np.asarray(record.v_icm[window], dtype=float)
    n = v.size
    fs = 1.0 / record.sample_interval
    nyquist = fs / 2.0
    if max_harmonic_freq is None:
        max_harmonic_freq = nyquist
    if max_harmonic_freq > nyquist * (1 + 1e-12):
        raise AnalysisError(f"max_harmonic_freq {max_harmonic_freq:g} Hz exceeds Nyquist {nyquist:g} Hz")
    # DC carries no current; removing it first keeps a flat series exactly zero
    spectrum = np.fft.rfft(v - v.mean()) / n
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    keep = (freqs > 0) & (freqs <= max_harmonic_freq)
    current = np.abs(spectrum[keep]) / np.abs(_impedance(freqs[keep], params))
    # one-sided lines hold half the power, except an exact Nyquist line
    weight = np.where(2 * np.flatnonzero(keep) == n, 1.0, 2.0)
    return float(math.sqrt(float(np.sum(weight * current**2))))
