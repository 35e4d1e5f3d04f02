"""Electrical and solver constants shared by every part of the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

__all__ = ["CircuitParams", "ParamsError", "validate_params", "cm_inductance", "cm_resonant_frequency"]


class ParamsError(ValueError):
    """Raised when a parameter set violates one or more invariants.

    ``fields`` lists the offending field names in the order they were checked.
    """

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        self.fields = [name for name, _ in problems]
        super().__init__("; ".join(f"{name}: {msg}" for name, msg in problems))


@dataclass(frozen=True)
class CircuitParams:
    """DC link, filter, parasitic and grid constants plus solver settings (SI units)."""

    v_pv: float = 400.0
    c_dc: float = 3000e-6
    l_a: float = 4e-3
    l_b: float = 4e-3
    c_pv: float = 24e-9
    r_g: float = 10.0
    v_grid_rms: float = 230.0
    f0: float = 50.0
    p_rated: float = 2200.0
    h_band: float = 0.25
    dt: float = 0.5e-6
    n_cycles: int = 40

    @property
    def v_grid_peak(self) -> float:
        return math.sqrt(2.0) * self.v_grid_rms

    @property
    def i_ref_peak(self) -> float:
        """Peak grid current reference at unity power factor."""
        return math.sqrt(2.0) * self.p_rated / self.v_grid_rms

    @property
    def l_dm(self) -> float:
        """Series inductance seen by the differential-mode loop."""
        return self.l_a + self.l_b

    def replace(self, **changes) -> "CircuitParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return CircuitParams(**values)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def cm_inductance(l_a: float, l_b: float) -> float:
    """Parallel combination of the two filter inductors."""
    return l_a * l_b / (l_a + l_b)


def cm_resonant_frequency(params: CircuitParams) -> float:
    return 1.0 / (2.0 * math.pi * math.sqrt(cm_inductance(params.l_a, params.l_b) * params.c_pv))


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_params(raw: CircuitParams) -> CircuitParams:
    """Check every invariant of ``raw`` and return it unchanged.

    All violations are collected before raising, so a single ``ParamsError``
    names every bad field.
    """
    problems: list[tuple[str, str]] = []
    positive = ("v_pv", "c_dc", "l_a", "l_b", "c_pv", "v_grid_rms", "f0", "p_rated", "h_band", "dt")
    for name in positive:
        value = getattr(raw, name)
        if not _is_number(value):
            problems.append((name, f"must be a finite number, got {value!r}"))
        elif value <= 0:
            problems.append((name, f"must be > 0, got {value!r}"))
    if not _is_number(raw.r_g):
        problems.append(("r_g", f"must be a finite number, got {raw.r_g!r}"))
    elif raw.r_g < 0:
        problems.append(("r_g", f"must be >= 0, got {raw.r_g!r}"))
    n = raw.n_cycles
    if not isinstance(n, int) or isinstance(n, bool):
        problems.append(("n_cycles", f"must be an integer, got {n!r}"))
    elif n < 1:
        problems.append(("n_cycles", f"must be >= 1, got {n!r}"))

    bad = set(name for name, _ in problems)
    if not bad & {"l_a", "l_b", "c_pv", "dt"}:
        period = 2.0 * math.pi * math.sqrt(cm_inductance(raw.l_a, raw.l_b) * raw.c_pv)
        if raw.dt > period / 20.0:
            problems.append(
                ("dt", f"{raw.dt:g} s exceeds 1/20 of the common-mode resonant period ({period / 20.0:g} s)")
            )
    if not bad & {"v_pv", "v_grid_rms"}:
        peak = math.sqrt(2.0) * raw.v_grid_rms
        if raw.v_pv <= peak:
            problems.append(("v_pv", f"{raw.v_pv:g} V does not exceed the grid peak {peak:.1f} V"))

    if problems:
        raise ParamsError(problems)
    return raw
