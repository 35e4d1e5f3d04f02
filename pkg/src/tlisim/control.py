"""Hysteresis-band current control of the bridge switches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .params import CircuitParams
from .topology import GateCommand, TopologyKind

__all__ = [
    "ControllerState",
    "reference_current",
    "half_cycle_sign",
    "hbcc_step",
    "initial_state",
    "gate_schedule",
    "schedule_masks",
]

# (half_cycle, active) -> switches on.  Bipolar ignores the half-cycle.
_SCHEDULE = {
    TopologyKind.H4_BIPOLAR: {
        (1, True): ("Q1", "Q4"), (1, False): ("Q2", "Q3"),
        (-1, True): ("Q1", "Q4"), (-1, False): ("Q2", "Q3"),
    },
    TopologyKind.H4_UNIPOLAR: {
        (1, True): ("Q1", "Q4"), (1, False): ("Q1",),
        (-1, True): ("Q2", "Q3"), (-1, False): ("Q2",),
    },
    TopologyKind.H5: {
        (1, True): ("Q1", "Q4", "Q5"), (1, False): ("Q1",),
        (-1, True): ("Q2", "Q3", "Q5"), (-1, False): ("Q3",),
    },
    TopologyKind.HERIC: {
        (1, True): ("Q1", "Q4", "Q6"), (1, False): ("Q6",),
        (-1, True): ("Q2", "Q3", "Q5"), (-1, False): ("Q5",),
    },
}


@dataclass(frozen=True)
class ControllerState:
    """``active`` is True while the energy-delivery vector of the current
    half-cycle is applied (for bipolar: the positive diagonal)."""

    active: bool
    half_cycle: int
    gates: GateCommand


def gate_schedule(kind: TopologyKind, half_cycle: int, active: bool) -> GateCommand:
    kind = TopologyKind.parse(kind)
    return GateCommand.of(kind, *_SCHEDULE[kind][(1 if half_cycle >= 0 else -1, bool(active))])


@lru_cache(maxsize=None)
def schedule_masks(kind: TopologyKind) -> np.ndarray:
    """``masks[half_index, active]`` with half_index 0 for +1 and 1 for -1."""
    out = np.zeros((2, 2), dtype=np.int64)
    for hi, half in enumerate((1, -1)):
        for active in (0, 1):
            out[hi, active] = gate_schedule(kind, half, bool(active)).mask
    out.setflags(write=False)
    return out


@njit(cache=True)
def _half_cycle(t, f0):
    phase = (t * f0) % 1.0
    return 1 if phase <= 0.5 else -1


@njit(cache=True)
def _reference(t, i_peak, f0):
    return i_peak * math.sin(2.0 * math.pi * f0 * t)


@njit(cache=True)
def _band_decision(active, signed_error, h):
    if signed_error > h:
        return True
    if signed_error < -h:
        return False
    return active


def reference_current(t: float, params: CircuitParams) -> float:
    return float(_reference(float(t), params.i_ref_peak, params.f0))


def half_cycle_sign(t: float, f0: float) -> int:
    """+1 over the positive half of the reference (zero crossings count as +1)."""
    return int(_half_cycle(float(t), float(f0)))


def initial_state(kind: TopologyKind) -> ControllerState:
    return ControllerState(False, 1, gate_schedule(kind, 1, False))


def hbcc_step(
    kind: TopologyKind, i_meas: float, t: float, state: ControllerState, params: CircuitParams
) -> tuple[GateCommand, ControllerState]:
    """One controller sample.

    The active vector is applied when the error toward the half-cycle's
    polarity exceeds half the band, the freewheeling (or, for bipolar, the
    opposite) vector when it falls below minus half the band, and the previous
    choice is held in between.
    """
    kind = TopologyKind.parse(kind)
    half = half_cycle_sign(t, params.f0)
    error = reference_current(t, params) - i_meas
    sign = half if kind.three_level else 1
    active = bool(_band_decision(state.active, sign * error, params.h_band / 2.0))
    gates = gate_schedule(kind, half, active)
    return gates, ControllerState(active, half, gates)
