import cmath
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlisim.analysis import AnalysisError, HarmonicComponent
from tlisim.analytic import OPEN_CIRCUIT, cm_impedance, leakage_rms_estimate, leakage_spectrum
from tlisim.params import CircuitParams, cm_resonant_frequency
from tlisim.simulate import WaveformRecord
from tlisim.topology import TopologyKind

P = CircuitParams()
F_RES = cm_resonant_frequency(P)


def test_impedance_examples():
    assert cm_impedance(0.0, P) == OPEN_CIRCUIT
    assert math.isinf(abs(OPEN_CIRCUIT))
    z = cm_impedance(10e3, P.replace(r_g=0.0))
    assert z.real == 0.0
    assert z.imag == pytest.approx(-537.48, abs=0.01)
    assert F_RES == pytest.approx(22.97e3, rel=1e-3)
    z = cm_impedance(F_RES, P)
    assert z.real == 10.0 and abs(z.imag) < 1e-9
    with pytest.raises(ValueError):
        cm_impedance(-1.0, P)


def test_spectrum_examples():
    assert leakage_spectrum([], P) == []
    assert leakage_spectrum([HarmonicComponent(0.0, 200.0)], P)[0].magnitude == 0.0
    (h,) = leakage_spectrum([HarmonicComponent(F_RES, 50.0, 0.3)], P)
    assert h.magnitude == pytest.approx(5.0)
    assert h.phase == pytest.approx(0.3, abs=1e-9)
    (h,) = leakage_spectrum([HarmonicComponent(10e3, 1.0)], P)
    assert h.phase == pytest.approx(-cmath.phase(cm_impedance(10e3, P)))
    with pytest.raises(ValueError):
        leakage_spectrum([HarmonicComponent(50, 1), HarmonicComponent(50, 2)], P)


def synthetic_record(v_icm, params, fs):
    n = v_icm.size
    t = np.arange(n) / fs
    z = np.zeros(n)
    return WaveformRecord(None, params, 1.0 / fs, 1, t, z, z, z, z, v_icm, z, z, z)


def test_estimate_single_resonant_line():
    # a tone sitting exactly on a DFT bin of the metrics window
    f_res = 23_000.0
    params = P.replace(c_pv=1 / ((2 * math.pi * f_res) ** 2 * 2e-3), n_cycles=10)
    fs = 2e6
    t = np.arange(int(10 * fs / 50) + 1) / fs
    rec = synthetic_record(200 + 100 * np.sin(2 * math.pi * f_res * t), params, fs)
    assert leakage_rms_estimate(rec) == pytest.approx(100 / (10 * math.sqrt(2)), rel=1e-6)


def test_estimate_constant_source_is_zero():
    fs = 2e6
    rec = synthetic_record(np.full(int(10 * fs / 50) + 1, 200.0), P.replace(n_cycles=10), fs)
    assert leakage_rms_estimate(rec) == 0.0


def test_estimate_errors():
    fs = 2e6
    rec = synthetic_record(np.zeros(int(10 * fs / 50) + 1), P.replace(n_cycles=10), fs)
    with pytest.raises(AnalysisError):
        leakage_rms_estimate(rec, max_harmonic_freq=2e6)
    short = synthetic_record(np.zeros(int(4 * fs / 50) + 1), P.replace(n_cycles=4), fs)
    with pytest.raises(AnalysisError):
        leakage_rms_estimate(short)


@settings(max_examples=40)
@given(st.floats(10.0, 20e3), st.floats(1.01, 5.0))
def test_more_capacitance_lowers_impedance_below_resonance(f, factor):
    low = P.replace(c_pv=P.c_pv * factor)
    if f < cm_resonant_frequency(low):
        assert abs(cm_impedance(f, low)) < abs(cm_impedance(f, P))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 100.0))
def test_estimate_is_linear(scale):
    fs = 2e6
    t = np.arange(int(10 * fs / 50) + 1) / fs
    v = 100 * np.sign(np.sin(2 * math.pi * 5e3 * t)) + 30 * np.sin(2 * math.pi * 150 * t)
    p = P.replace(n_cycles=10)
    base = leakage_rms_estimate(synthetic_record(v, p, fs))
    assert leakage_rms_estimate(synthetic_record(scale * v, p, fs)) == pytest.approx(scale * base, rel=1e-9)


def test_estimate_agrees_with_unipolar_run(default_runs):
    rec = default_runs[TopologyKind.H4_UNIPOLAR]
    w = rec.metrics_window()
    td = float(np.sqrt(np.mean(rec.i_cm[w] ** 2)))
    est = leakage_rms_estimate(rec)
    assert abs(est - td) <= 0.1 * max(est, td)


def test_record_field_names_line_up():
    assert [f.name for f in dataclasses.fields(WaveformRecord)][4:13] == list(WaveformRecord.SERIES)
