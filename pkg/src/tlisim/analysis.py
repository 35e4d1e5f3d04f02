"""Metrics extracted from recorded waveforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .params import CircuitParams
from .topology import TopologyKind

__all__ = [
    "HarmonicComponent",
    "LevelClassification",
    "AnalysisReport",
    "AnalysisError",
    "VDE_LIMIT_A",
    "rms",
    "harmonic_spectrum",
    "spectrum_arrays",
    "thd",
    "classify_levels",
    "vde_compliance",
    "build_report",
]

VDE_LIMIT_A = 0.300


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class HarmonicComponent:
    """``magnitude * cos(2*pi*frequency*t + phase)``; magnitude in peak units."""

    frequency: float
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.frequency < 0 or self.magnitude < 0:
            raise ValueError("frequency and magnitude must be non-negative")


class LevelClassification(NamedTuple):
    levels: frozenset
    n_excluded: int
    n_total: int

    @property
    def excluded_fraction(self) -> float:
        return self.n_excluded / self.n_total if self.n_total else 0.0


def rms(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise AnalysisError("rms of an empty series")
    return float(np.sqrt(np.mean(np.square(x))))


def _cycle_count(n: int, fs: float, f0: float) -> int:
    per = fs / f0
    n_per = int(round(per))
    if n_per < 1 or abs(per - n_per) > 1e-6 * per:
        raise AnalysisError(f"fs/f0 = {per:.6g} is not an integer number of samples per cycle")
    if n == 0 or n % n_per:
        raise AnalysisError(f"{n} samples do not span an integer number of {n_per}-sample cycles")
    return n // n_per


def spectrum_arrays(samples, fs: float, f0: float) -> tuple[np.ndarray, np.ndarray]:
    """Complex peak amplitudes at ``k * f0`` for k = 0 .. Nyquist / f0."""
    x = np.asarray(samples, dtype=float)
    cycles = _cycle_count(x.size, fs, f0)
    n = x.size
    coeffs = np.fft.rfft(x)[::cycles] / n
    orders = np.arange(coeffs.size)
    bins = orders * cycles
    # every bin except DC and an exact Nyquist bin is folded from both sides
    two_sided = (bins != 0) & (2 * bins != n)
    coeffs = np.where(two_sided, 2.0 * coeffs, coeffs)
    return orders * f0, coeffs


def harmonic_spectrum(samples, fs: float, f0: float) -> list[HarmonicComponent]:
    """Rectangular-window DFT read at the harmonics of ``f0``.

    The record must hold a whole number of fundamental periods, which makes
    the rectangular window exact.
    """
    freqs, coeffs = spectrum_arrays(samples, fs, f0)
    mags = np.abs(coeffs)
    phases = np.angle(coeffs)
    return [HarmonicComponent(float(f), float(m), float(p)) for f, m, p in zip(freqs, mags, phases)]


def thd(spectrum: Sequence[HarmonicComponent], max_order: int | None = None) -> float:
    """Total harmonic distortion in percent, orders 2..max_order, DC excluded.

    ``spectrum[k]`` must be the k-th harmonic.  ``None`` uses every order
    present.
    """
    if len(spectrum) < 2:
        raise AnalysisError("spectrum has no fundamental")
    if max_order is None:
        max_order = len(spectrum) - 1
    if max_order < 2:
        raise AnalysisError(f"max_order must be >= 2, got {max_order}")
    fundamental = spectrum[1].magnitude
    if fundamental <= 0:
        raise AnalysisError("fundamental magnitude is zero")
    upper = min(max_order, len(spectrum) - 1)
    harmonics = np.array([spectrum[k].magnitude for k in range(2, upper + 1)])
    return float(100.0 * math.sqrt(float(np.sum(harmonics**2))) / fundamental)


_LEVEL_STEPS = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])


def classify_levels(samples, v_pv: float, tol_fraction: float = 0.05) -> LevelClassification:
    """Snap samples onto the bridge voltage levels (multiples of v_pv/2).

    Samples further than ``tol_fraction * v_pv`` from every level are counted
    as transitions and left out.
    """
    if not 0 < tol_fraction < 0.25:
        raise AnalysisError(f"tol_fraction must lie in (0, 0.25), got {tol_fraction}")
    x = np.asarray(samples, dtype=float).ravel()
    levels = _LEVEL_STEPS * v_pv
    dist = np.abs(x[:, None] - levels[None, :])
    nearest = np.argmin(dist, axis=1)
    inside = dist[np.arange(x.size), nearest] <= tol_fraction * v_pv
    found = frozenset(float(levels[i]) for i in np.unique(nearest[inside]))
    return LevelClassification(found, int(x.size - np.count_nonzero(inside)), int(x.size))


def vde_compliance(leakage_rms: float) -> bool:
    """Leakage within the 300 mA VDE 0126-1-1 limit (inclusive)."""
    if leakage_rms < 0:
        raise AnalysisError("leakage RMS cannot be negative")
    return leakage_rms <= VDE_LIMIT_A


@dataclass(frozen=True)
class AnalysisReport:
    kind: TopologyKind | None
    leakage_rms: float
    thd_percent: float
    thd_order3_percent: float
    max_order: int
    fundamental_mag: float
    cmv_levels: frozenset
    dmv_levels: frozenset
    cmv_constant: bool
    vde_compliant: bool
    window: str
    cmv_excluded_fraction: float = 0.0
    dmv_excluded_fraction: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "topology": self.kind.value if self.kind is not None else None,
            "leakage_rms_A": self.leakage_rms,
            "thd_percent": self.thd_percent,
            "thd_order3_percent": self.thd_order3_percent,
            "max_order": self.max_order,
            "fundamental_A": self.fundamental_mag,
            "cmv_levels_V": sorted(self.cmv_levels),
            "dmv_levels_V": sorted(self.dmv_levels),
            "cmv_constant": self.cmv_constant,
            "vde_compliant": self.vde_compliant,
            "cmv_excluded_fraction": self.cmv_excluded_fraction,
            "dmv_excluded_fraction": self.dmv_excluded_fraction,
            "window": self.window,
            **self.extras,
        }


def build_report(record, params: CircuitParams | None = None, max_order: int | None = None,
                 tol_fraction: float = 0.05) -> AnalysisReport:
    """Aggregate every metric over the post-startup window of ``record``.

    THD is taken on the grid current; ``max_order=None`` runs up to Nyquist.
    """
    params = params or record.params
    try:
        window = record.metrics_window()
    except ValueError as exc:
        raise AnalysisError(str(exc)) from None
    fs = 1.0 / record.sample_interval
    i_grid = record.i_grid[window]
    spectrum = harmonic_spectrum(i_grid, fs, params.f0)
    nyquist_order = len(spectrum) - 1
    order = nyquist_order if max_order is None else min(int(max_order), nyquist_order)
    leak = rms(record.i_cm[window])
    cmv = classify_levels(record.cmv[window], params.v_pv, tol_fraction)
    dmv = classify_levels(record.dmv[window], params.v_pv, tol_fraction)
    n_per = int(round(record.samples_per_cycle))
    first = window.start // n_per
    last = window.stop // n_per
    return AnalysisReport(
        kind=record.kind,
        leakage_rms=leak,
        thd_percent=thd(spectrum, order),
        thd_order3_percent=thd(spectrum, 3),
        max_order=order,
        fundamental_mag=spectrum[1].magnitude,
        cmv_levels=cmv.levels,
        dmv_levels=dmv.levels,
        cmv_constant=len(cmv.levels) == 1,
        vde_compliant=vde_compliance(leak),
        window=f"cycles {first}-{last} ({last - first} cycles, {window.stop - window.start} samples)",
        cmv_excluded_fraction=cmv.excluded_fraction,
        dmv_excluded_fraction=dmv.excluded_fraction,
    )
