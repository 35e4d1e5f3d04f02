"""Fixed-step simulation of the grid (differential-mode) and leakage
(common-mode) loops driven by the current controller.

The bridge is replaced by its common- and differential-mode sources.  The
grid loop is ``(l_a + l_b) di/dt = dmv - v_grid(t)``; the leakage loop is a
series R-L-C with ``L = l_a || l_b`` driven by ``v_icm``.  Switch states only
change on step boundaries, so both loops see piecewise-constant bridge inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from numba import njit

from .control import (
    ControllerState,
    _band_decision,
    _half_cycle,
    _reference,
    initial_state,
    schedule_masks,
)
from .params import CircuitParams, cm_inductance, validate_params
from .topology import GateCommand, TopologyKind, pole_table

__all__ = [
    "SimState",
    "WaveformRecord",
    "SimulationError",
    "STARTUP_CYCLES",
    "METHODS",
    "cmv_dmv",
    "vicm",
    "cm_step_matrices",
    "initial_sim_state",
    "step",
    "run",
]

STARTUP_CYCLES = 5
METHODS = ("zoh", "heun")

_INVALID_GATES = 1
_NON_FINITE = 2


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimState:
    t: float
    i_grid: float
    i_cm: float
    v_cpv: float
    controller: ControllerState
    k: int = 0


@dataclass
class WaveformRecord:
    """Uniformly sampled observables of one run.

    Sample ``j`` is taken at step ``j * decimation``; the bridge quantities are
    those applied over the step that starts at that instant.
    """

    kind: TopologyKind
    params: CircuitParams
    sample_interval: float
    decimation: int
    t: np.ndarray
    v_an: np.ndarray
    v_bn: np.ndarray
    cmv: np.ndarray
    dmv: np.ndarray
    v_icm: np.ndarray
    i_grid: np.ndarray
    i_ref: np.ndarray
    i_cm: np.ndarray
    gate_mask: np.ndarray | None = field(default=None, repr=False)

    SERIES = ("t", "v_an", "v_bn", "cmv", "dmv", "v_icm", "i_grid", "i_ref", "i_cm")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples_per_cycle(self) -> float:
        return 1.0 / (self.params.f0 * self.sample_interval)

    def metrics_window(self, skip_cycles: int = STARTUP_CYCLES) -> slice:
        """Slice covering every whole cycle after the startup transient.

        Raises ``ValueError`` when a cycle is not an integer number of samples
        or nothing is left after the transient.
        """
        per = self.samples_per_cycle
        n_per = int(round(per))
        if n_per < 1 or abs(per - n_per) > 1e-6 * per:
            raise ValueError(f"{per:.6g} samples per fundamental cycle is not an integer")
        total_cycles = (len(self) - 1) // n_per
        if total_cycles <= skip_cycles:
            raise ValueError(
                f"record holds {total_cycles} whole cycles; need more than the {skip_cycles} startup cycles"
            )
        return slice(skip_cycles * n_per, total_cycles * n_per)


def cmv_dmv(v_an: float, v_bn: float) -> tuple[float, float]:
    return (v_an + v_bn) / 2.0, v_an - v_bn


@njit(cache=True)
def _vicm(cmv, dmv, l_a, l_b):
    return cmv + 0.5 * dmv * (l_b - l_a) / (l_b + l_a)


def vicm(cmv: float, dmv: float, l_a: float, l_b: float) -> float:
    """Total common-mode source including the filter-imbalance term."""
    if l_a + l_b == 0:
        raise ValueError("l_a + l_b must be nonzero")
    return float(_vicm(float(cmv), float(dmv), float(l_a), float(l_b)))


@lru_cache(maxsize=32)
def cm_step_matrices(params: CircuitParams, method: str = "zoh") -> tuple[np.ndarray, np.ndarray]:
    """Discrete update ``x' = phi @ x + gamma * v_s`` for x = (i_cm, v_cpv).

    ``zoh`` is the exact solution for a source held constant over the step;
    ``heun`` is the explicit trapezoidal predictor-corrector.
    """
    l_cm = cm_inductance(params.l_a, params.l_b)
    a = np.array([[-params.r_g / l_cm, -1.0 / l_cm], [1.0 / params.c_pv, 0.0]])
    b = np.array([1.0 / l_cm, 0.0])
    dt = params.dt
    if method == "zoh":
        aug = np.zeros((3, 3))
        aug[:2, :2] = a * dt
        aug[:2, 2] = b * dt
        e = scipy.linalg.expm(aug)
        phi, gamma = np.ascontiguousarray(e[:2, :2]), np.ascontiguousarray(e[:2, 2])
    elif method == "heun":
        ad = a * dt
        eye = np.eye(2)
        phi, gamma = eye + ad + ad @ ad / 2.0, (eye + ad / 2.0) @ b * dt
    else:
        raise ValueError(f"unknown method {method!r} (expected one of {METHODS})")
    phi.setflags(write=False)
    gamma.setflags(write=False)
    return phi, gamma


@njit(cache=True)
def _grid_integral(t, dt, v_peak, f0, exact):
    """Integral of the grid voltage over [t, t + dt]."""
    w = 2.0 * math.pi * f0
    if exact:
        # cos(wt) - cos(w(t+dt)) written to avoid cancellation
        return v_peak / w * 2.0 * math.sin(w * (t + 0.5 * dt)) * math.sin(0.5 * w * dt)
    return 0.5 * dt * v_peak * (math.sin(w * t) + math.sin(w * (t + dt)))


@njit(cache=True)
def _decide(k, i_grid, active, three_level, masks, table, dt, f0, i_peak, h):
    t = k * dt
    half = _half_cycle(t, f0)
    i_ref = _reference(t, i_peak, f0)
    sign = half if three_level else 1
    active = _band_decision(active, sign * (i_ref - i_grid), h)
    mask = masks[0 if half > 0 else 1, 1 if active else 0]
    if i_grid > 0.0:
        col = 2
    elif i_grid < 0.0:
        col = 0
    else:
        # zero current: take the direction the reference is heading
        col = 2 if half > 0 else 0
    return active, mask, table[mask, col, 0], table[mask, col, 1], i_ref


@njit(cache=True)
def _integrate(k, i_grid, i_cm, v_cpv, dmv, v_s, dt, f0, v_peak, l_dm, phi, gamma, exact):
    t = k * dt
    i_grid_next = i_grid + (dmv * dt - _grid_integral(t, dt, v_peak, f0, exact)) / l_dm
    i_cm_next = phi[0, 0] * i_cm + phi[0, 1] * v_cpv + gamma[0] * v_s
    v_cpv_next = phi[1, 0] * i_cm + phi[1, 1] * v_cpv + gamma[1] * v_s
    return i_grid_next, i_cm_next, v_cpv_next


@njit(cache=True, nogil=True)
def _run_kernel(
    n_steps, decimation, three_level, masks, table, v_pv, dt, f0, i_peak, h, v_peak,
    l_a, l_b, phi, gamma, exact, out, gate_out,
):
    i_grid = 0.0
    i_cm = 0.0
    v_cpv = 0.0
    active = False
    j = 0
    for k in range(n_steps + 1):
        active, mask, a_frac, b_frac, i_ref = _decide(
            k, i_grid, active, three_level, masks, table, dt, f0, i_peak, h
        )
        if a_frac != a_frac or b_frac != b_frac:
            return _INVALID_GATES, k, mask
        v_an = a_frac * v_pv
        v_bn = b_frac * v_pv
        cmv = 0.5 * (v_an + v_bn)
        dmv = v_an - v_bn
        v_s = _vicm(cmv, dmv, l_a, l_b)
        if k % decimation == 0:
            out[0, j] = k * dt
            out[1, j] = v_an
            out[2, j] = v_bn
            out[3, j] = cmv
            out[4, j] = dmv
            out[5, j] = v_s
            out[6, j] = i_grid
            out[7, j] = i_ref
            out[8, j] = i_cm
            gate_out[j] = mask
            j += 1
        if k == n_steps:
            break
        i_grid, i_cm, v_cpv = _integrate(
            k, i_grid, i_cm, v_cpv, dmv, v_s, dt, f0, v_peak, l_a + l_b, phi, gamma, exact
        )
        if not (math.isfinite(i_grid) and math.isfinite(i_cm) and math.isfinite(v_cpv)):
            return _NON_FINITE, k + 1, mask
    return 0, n_steps, 0


def _n_steps(params: CircuitParams) -> int:
    return int(round(params.n_cycles / (params.f0 * params.dt)))


def initial_sim_state(kind: TopologyKind) -> SimState:
    return SimState(0.0, 0.0, 0.0, 0.0, initial_state(kind), 0)


def step(state: SimState, kind: TopologyKind, params: CircuitParams, method: str = "zoh") -> SimState:
    """Advance one ``dt``: decide gates at ``state.t``, then integrate both loops."""
    kind = TopologyKind.parse(kind)
    phi, gamma = cm_step_matrices(params, method)
    table = pole_table(kind)
    active, mask, a_frac, b_frac, _ = _decide(
        state.k, state.i_grid, state.controller.active, kind.three_level, schedule_masks(kind), table,
        params.dt, params.f0, params.i_ref_peak, params.h_band / 2.0,
    )
    if math.isnan(a_frac) or math.isnan(b_frac):
        raise SimulationError(f"{GateCommand.from_mask(kind, mask)} has no valid pole potentials at t={state.t:g}")
    v_an, v_bn = a_frac * params.v_pv, b_frac * params.v_pv
    cmv, dmv = cmv_dmv(v_an, v_bn)
    i_grid, i_cm, v_cpv = _integrate(
        state.k, state.i_grid, state.i_cm, state.v_cpv, dmv, vicm(cmv, dmv, params.l_a, params.l_b),
        params.dt, params.f0, params.v_grid_peak, params.l_dm, phi, gamma, method == "zoh",
    )
    k = state.k + 1
    if not all(map(math.isfinite, (i_grid, i_cm, v_cpv))):
        raise SimulationError(f"non-finite state at t={k * params.dt:g}: i_grid={i_grid}, i_cm={i_cm}, v_cpv={v_cpv}")
    gates = GateCommand.from_mask(kind, int(mask))
    half = 1 if _half_cycle(state.k * params.dt, params.f0) > 0 else -1
    return SimState(k * params.dt, i_grid, i_cm, v_cpv, ControllerState(bool(active), half, gates), k)


def run(
    kind: TopologyKind, params: CircuitParams, decimation: int = 1, method: str = "zoh"
) -> WaveformRecord:
    """Simulate ``params.n_cycles`` fundamental cycles from rest."""
    kind = TopologyKind.parse(kind)
    validate_params(params)
    if not isinstance(decimation, int) or decimation < 1:
        raise ValueError(f"decimation must be a positive integer, got {decimation!r}")
    phi, gamma = cm_step_matrices(params, method)
    n_steps = _n_steps(params)
    n_rec = n_steps // decimation + 1
    out = np.empty((9, n_rec))
    gate_out = np.empty(n_rec, dtype=np.int8)
    status, k, mask = _run_kernel(
        n_steps, decimation, kind.three_level, schedule_masks(kind), pole_table(kind),
        params.v_pv, params.dt, params.f0, params.i_ref_peak, params.h_band / 2.0, params.v_grid_peak,
        params.l_a, params.l_b, phi, gamma, method == "zoh", out, gate_out,
    )
    if status == _INVALID_GATES:
        raise SimulationError(
            f"{kind.value}: {GateCommand.from_mask(kind, int(mask))} has no valid pole potentials at t={k * params.dt:g} s"
        )
    if status == _NON_FINITE:
        raise SimulationError(f"{kind.value}: state became non-finite at t={k * params.dt:g} s (unstable integration)")
    return WaveformRecord(
        kind, params, params.dt * decimation, decimation, *out, gate_mask=gate_out,
    )

