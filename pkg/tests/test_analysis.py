import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlisim.analysis import (
    AnalysisError,
    HarmonicComponent,
    build_report,
    classify_levels,
    harmonic_spectrum,
    rms,
    spectrum_arrays,
    thd,
    vde_compliance,
)
from tlisim.topology import TopologyKind

H4U, H4B, H5, HERIC = TopologyKind.H4_UNIPOLAR, TopologyKind.H4_BIPOLAR, TopologyKind.H5, TopologyKind.HERIC
FS, F0 = 100_000.0, 50.0
N_PER = int(FS / F0)


def cycles(n=4):
    return np.arange(n * N_PER) / FS


def square(t, a=1.0):
    return a * np.where((t * F0) % 1.0 < 0.5, 1.0, -1.0)


def test_rms_examples():
    assert rms([-3.0] * 5) == 3.0
    assert rms([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    t = cycles(1)
    assert rms(2.0 * np.sin(2 * math.pi * F0 * t)) == pytest.approx(2.0 / math.sqrt(2))
    with pytest.raises(AnalysisError):
        rms([])


def test_pure_sine_spectrum():
    t = cycles()
    spectrum = harmonic_spectrum(5.0 * np.sin(2 * math.pi * F0 * t), FS, F0)
    assert spectrum[1].magnitude == pytest.approx(5.0, rel=1e-12)
    assert spectrum[1].frequency == F0
    assert spectrum[1].phase == pytest.approx(-math.pi / 2)
    assert all(h.magnitude <= 1e-9 * 5.0 for i, h in enumerate(spectrum) if i != 1)
    assert len(spectrum) == N_PER // 2 + 1
    assert thd(spectrum) == pytest.approx(0.0, abs=1e-9)


def test_constant_spectrum():
    spectrum = harmonic_spectrum(np.full(2 * N_PER, -7.0), FS, F0)
    assert spectrum[0].magnitude == pytest.approx(7.0)
    assert all(h.magnitude < 1e-12 for h in spectrum[1:])


def test_square_wave_harmonics_and_thd():
    t = cycles()
    spectrum = harmonic_spectrum(square(t, 2.0), FS, F0)
    for k in (1, 3, 5, 7):
        assert spectrum[k].magnitude == pytest.approx(8.0 / (k * math.pi), rel=1e-3)
    assert spectrum[2].magnitude < 1e-3
    assert thd(spectrum, 3) == pytest.approx(100 / 3, rel=1e-3)
    # Nyquist-limited sum of a sampled square wave approaches the closed form
    assert thd(spectrum) == pytest.approx(100 * math.sqrt(math.pi**2 / 8 - 1), rel=5e-3)


def test_thd_errors():
    with pytest.raises(AnalysisError):
        thd([HarmonicComponent(0, 1), HarmonicComponent(50, 0.0), HarmonicComponent(100, 1)])
    with pytest.raises(AnalysisError):
        thd([HarmonicComponent(0, 1), HarmonicComponent(50, 1.0)], 1)
    with pytest.raises(AnalysisError):
        thd([HarmonicComponent(0, 1)])


def test_spectrum_rejects_partial_cycles():
    with pytest.raises(AnalysisError):
        harmonic_spectrum(np.zeros(N_PER + 3), FS, F0)
    with pytest.raises(AnalysisError):
        harmonic_spectrum(np.zeros(1000), 1000.3, F0)


def test_harmonic_component_validation():
    with pytest.raises(ValueError):
        HarmonicComponent(-1.0, 1.0)
    with pytest.raises(ValueError):
        HarmonicComponent(1.0, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(-3, 3))
def test_parseval(amps, dc):
    t = cycles(2)
    x = dc + sum(a * np.sin(2 * math.pi * F0 * (k + 1) * t + k) for k, a in enumerate(amps))
    spectrum = harmonic_spectrum(x, FS, F0)
    power = spectrum[0].magnitude ** 2 + sum(h.magnitude**2 / 2 for h in spectrum[1:])
    assert math.sqrt(power) == pytest.approx(rms(x), rel=1e-3, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.01, 100))
def test_linearity_and_thd_amplitude_invariance(a, b, scale):
    t = cycles(2)
    x = a * np.sin(2 * math.pi * F0 * t) + 0.1 * a * np.sin(2 * math.pi * 3 * F0 * t)
    y = b * np.cos(2 * math.pi * 5 * F0 * t)
    _, cx = spectrum_arrays(x, FS, F0)
    _, cy = spectrum_arrays(y, FS, F0)
    _, cxy = spectrum_arrays(x + y, FS, F0)
    assert np.allclose(cxy, cx + cy, atol=1e-9 * (a + b))
    assert thd(harmonic_spectrum(scale * x, FS, F0)) == pytest.approx(thd(harmonic_spectrum(x, FS, F0)), rel=1e-9)


def test_classify_levels_examples():
    assert classify_levels(np.zeros(10), 400).levels == {0.0}
    c = classify_levels([400, -400, 395, 230, -200, 0], 400)
    assert c.levels == {400.0, -400.0, -200.0, 0.0}
    assert (c.n_excluded, c.n_total) == (1, 6)
    assert c.excluded_fraction == pytest.approx(1 / 6)
    for bad in (0.0, 0.25, -0.1):
        with pytest.raises(AnalysisError):
            classify_levels([0.0], 400, bad)


@given(st.lists(st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]), min_size=1), st.floats(-0.04, 0.04))
def test_classify_levels_snaps_within_tolerance(steps, jitter):
    x = (np.array(steps) + jitter) * 400
    c = classify_levels(x, 400)
    assert c.levels == {s * 400 for s in steps}
    assert c.n_excluded == 0


def test_vde_examples():
    assert vde_compliance(0.0015)
    assert not vde_compliance(0.301)
    assert vde_compliance(0.300)
    with pytest.raises(AnalysisError):
        vde_compliance(-1.0)


def test_build_report_examples(default_runs):
    u = build_report(default_runs[H4U])
    assert not u.cmv_constant and len(u.dmv_levels) == 3
    b = build_report(default_runs[H4B])
    assert b.cmv_constant and b.cmv_levels == {200.0} and b.dmv_levels == {-400.0, 400.0}
    h = build_report(default_runs[HERIC])
    assert h.cmv_constant and len(h.dmv_levels) == 3 and h.vde_compliant
    assert build_report(default_runs[H5]).cmv_levels == {200.0}
    for r in (u, b, h):
        assert r.thd_percent >= 0 and r.leakage_rms >= 0
        assert r.cmv_constant == (len(r.cmv_levels) == 1)
        assert r.fundamental_mag == pytest.approx(13.53, rel=0.02)
        assert r.window.startswith("cycles 5-40")
    assert u.to_dict()["topology"] == "h4_unipolar"


def test_build_report_max_order(default_runs):
    r = build_report(default_runs[H4U], max_order=3)
    assert r.max_order == 3 and r.thd_percent == pytest.approx(r.thd_order3_percent)
    assert build_report(default_runs[H4U], max_order=10**9).max_order == 20_000


def test_build_report_needs_full_window(short_params):
    from tlisim.simulate import run

    with pytest.raises(AnalysisError):
        build_report(run(H4U, short_params.replace(n_cycles=5)))
