"""Switch-level models of the H4, H5 and HERIC bridges.

Each topology is a tiny netlist of ideal switches and diodes between the DC
rails (``P`` at v_pv, ``N`` at 0) and the two poles ``A`` and ``B``.  Pole
potentials are found by searching the diode on/off subsets for the one that is
electrically consistent with the commanded switches and the direction of the
filter current.  H5 and HERIC carry clamping diodes to an ideal DC-link
midpoint, so a pole left floating by a decoupled freewheeling loop sits at
v_pv/2.

Potentials are solved once in units of v_pv and cached; ``pole_table`` exposes
them as a dense lookup for the simulation kernel.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TopologyKind",
    "GateCommand",
    "PoleVoltages",
    "ModeRow",
    "TopologyError",
    "pole_voltages",
    "pole_fractions",
    "validate_gates",
    "enumerate_modes",
    "switch_frequency_class",
    "pole_table",
    "LINE",
    "HIGH",
]

LINE = "LINE"
HIGH = "HIGH"


class TopologyError(ValueError):
    pass


class TopologyKind(str, enum.Enum):
    H4_UNIPOLAR = "h4_unipolar"
    H4_BIPOLAR = "h4_bipolar"
    H5 = "h5"
    HERIC = "heric"

    @property
    def switches(self) -> tuple[str, ...]:
        return _SWITCHES[self]

    @property
    def switch_count(self) -> int:
        return len(_SWITCHES[self])

    @property
    def clamped(self) -> bool:
        """True when clamping diodes tie floating poles to the DC midpoint."""
        return self in (TopologyKind.H5, TopologyKind.HERIC)

    @property
    def three_level(self) -> bool:
        return self is not TopologyKind.H4_BIPOLAR

    @classmethod
    def parse(cls, value) -> "TopologyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise TopologyError(f"unknown topology {value!r} (expected one of {valid})") from None


_BRIDGE = ("Q1", "Q2", "Q3", "Q4")
_SWITCHES = {
    TopologyKind.H4_UNIPOLAR: _BRIDGE,
    TopologyKind.H4_BIPOLAR: _BRIDGE,
    TopologyKind.H5: _BRIDGE + ("Q5",),
    TopologyKind.HERIC: _BRIDGE + ("Q5", "Q6"),
}

# (pole A clamp, pole B clamp)
_CLAMP_DIODES = {
    TopologyKind.H5: ("D6", "D7"),
    TopologyKind.HERIC: ("D7", "D8"),
}

_FREQUENCY_CLASS = {
    TopologyKind.H4_UNIPOLAR: {"Q1": LINE, "Q2": LINE, "Q3": HIGH, "Q4": HIGH},
    TopologyKind.H4_BIPOLAR: {"Q1": HIGH, "Q2": HIGH, "Q3": HIGH, "Q4": HIGH},
    TopologyKind.H5: {"Q1": LINE, "Q2": HIGH, "Q3": LINE, "Q4": HIGH, "Q5": HIGH},
    TopologyKind.HERIC: {"Q1": HIGH, "Q2": HIGH, "Q3": HIGH, "Q4": HIGH, "Q5": LINE, "Q6": LINE},
}


@dataclass(frozen=True)
class GateCommand:
    """The set of switches commanded on for one topology."""

    kind: TopologyKind
    on: frozenset

    @classmethod
    def of(cls, kind: TopologyKind, *switches: str) -> "GateCommand":
        kind = TopologyKind.parse(kind)
        unknown = [s for s in switches if s not in kind.switches]
        if unknown:
            raise TopologyError(f"{kind.value} has no switch {unknown[0]}")
        return cls(kind, frozenset(switches))

    @classmethod
    def from_mask(cls, kind: TopologyKind, mask: int) -> "GateCommand":
        names = kind.switches
        return cls(kind, frozenset(n for i, n in enumerate(names) if mask >> i & 1))

    @property
    def mask(self) -> int:
        return sum(1 << i for i, n in enumerate(self.kind.switches) if n in self.on)

    def is_on(self, switch: str) -> bool:
        return switch in self.on

    def conducting_diodes(self, i_sign: int) -> frozenset:
        """Diodes carrying current for the given filter-current direction."""
        return _solve(self.kind, self.on, int(i_sign))[2]

    def __str__(self) -> str:
        on = ",".join(s for s in self.kind.switches if s in self.on) or "-"
        return f"{self.kind.value}{{{on}}}"


@dataclass(frozen=True)
class PoleVoltages:
    v_an: float
    v_bn: float

    @property
    def cmv(self) -> float:
        return (self.v_an + self.v_bn) / 2.0

    @property
    def dmv(self) -> float:
        return self.v_an - self.v_bn


@dataclass(frozen=True)
class ModeRow:
    """One conduction mode; voltages are multiples of v_pv."""

    mode: int
    gates: GateCommand
    i_sign: int
    v_an: float
    v_bn: float
    dmv: float
    cmv: float


def validate_gates(gates: GateCommand) -> GateCommand:
    """Reject shoot-through states: a leg with both switches on, or a HERIC
    bypass switch on together with the diagonal it would short."""
    on = gates.on
    unknown = on - set(gates.kind.switches)
    if unknown:
        raise TopologyError(f"{gates.kind.value} has no switch {sorted(unknown)[0]}")
    if {"Q1", "Q2"} <= on:
        raise TopologyError(f"leg A shoot-through in {gates}: Q1 and Q2 both on")
    if {"Q3", "Q4"} <= on:
        raise TopologyError(f"leg B shoot-through in {gates}: Q3 and Q4 both on")
    if gates.kind is TopologyKind.HERIC:
        # Q5 path conducts A->B, Q6 path conducts B->A.
        if {"Q1", "Q4", "Q5"} <= on or {"Q2", "Q3", "Q6"} <= on:
            raise TopologyError(f"bypass switch shorts the active diagonal in {gates}")
        if {"Q5", "Q6"} <= on and ({"Q1", "Q4"} <= on or {"Q2", "Q3"} <= on):
            raise TopologyError(f"bypass pair on with an active diagonal in {gates}")
    return gates


# --- netlist solver -------------------------------------------------------------

_FIXED = {"P": 1.0, "N": 0.0}


@lru_cache(maxsize=None)
def _netlist(kind: TopologyKind):
    switches = {"Q1": ("T", "A"), "Q2": ("A", "N"), "Q3": ("T", "B"), "Q4": ("B", "N")}
    # diode -> (anode, cathode)
    diodes = {"D1": ("A", "T"), "D2": ("N", "A"), "D3": ("B", "T"), "D4": ("N", "B")}
    wires = []
    if kind is TopologyKind.H5:
        switches["Q5"] = ("P", "T")
        diodes["D5"] = ("T", "P")
    else:
        wires.append(("P", "T"))
    if kind is TopologyKind.HERIC:
        # anti-series bypass A -Q5- X -Q6- B
        switches["Q5"] = ("A", "X")
        switches["Q6"] = ("B", "X")
        diodes["D5"] = ("X", "A")
        diodes["D6"] = ("X", "B")
    return switches, diodes, tuple(wires)


class _Groups:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)


def _bias_intervals(groups, fixed_of, off_diodes, tol=1e-12):
    """Potential interval of every floating group such that every blocking
    diode is reverse (or zero) biased; None when no assignment exists."""
    lo, hi = {}, {}
    edges = []
    for anode, cathode in off_diodes:
        ga, gc = groups.find(anode), groups.find(cathode)
        va, vc = fixed_of.get(ga), fixed_of.get(gc)
        if va is not None and vc is not None:
            if va > vc + tol:
                return None
        elif va is not None:
            lo[gc] = max(lo.get(gc, -np.inf), va)
        elif vc is not None:
            hi[ga] = min(hi.get(ga, np.inf), vc)
        elif ga != gc:
            edges.append((ga, gc))
    for _ in range(len(edges) + 1):
        changed = False
        for ga, gc in edges:
            if lo.get(ga, -np.inf) > lo.get(gc, -np.inf):
                lo[gc] = lo[ga]
                changed = True
            if hi.get(gc, np.inf) < hi.get(ga, np.inf):
                hi[ga] = hi[gc]
                changed = True
        if not changed:
            break
    for g in set(lo) | set(hi):
        if lo.get(g, -np.inf) > hi.get(g, np.inf) + tol:
            return None
    return lo, hi


def _path_covers(adj, start, goal, required):
    """Is there a simple directed path start->goal using every edge in
    ``required`` (diode names)?"""
    stack = [(start, frozenset([start]), frozenset())]
    while stack:
        node, seen, used = stack.pop()
        if node == goal and required <= used:
            return True
        for nxt, label in adj.get(node, ()):
            if nxt in seen:
                continue
            stack.append((nxt, seen | {nxt}, used | {label} if label else used))
    return False


@lru_cache(maxsize=None)
def _solve(kind: TopologyKind, on: frozenset, i_sign: int):
    """Return (v_an, v_bn, conducting diodes) in units of v_pv."""
    gates = validate_gates(GateCommand(kind, on))
    if i_sign not in (-1, 0, 1):
        raise TopologyError(f"i_sign must be -1, 0 or +1, got {i_sign!r}")
    if not on and i_sign == 0:
        raise TopologyError(f"{gates}: fully open bridge with zero current has undefined pole potentials")
    switches, diodes, wires = _netlist(kind)
    links = list(wires) + [switches[s] for s in sorted(on)]
    names = sorted(diodes)

    found = {}
    for r in range(len(names) + 1):
        for subset in itertools.combinations(names, r):
            if i_sign == 0 and subset:
                continue
            groups = _Groups()
            for a, b in links:
                groups.union(a, b)
            redundant = False
            for d in subset:
                a, c = diodes[d]
                if groups.find(a) == groups.find(c):
                    redundant = True
                    break
                groups.union(a, c)
            if redundant or groups.find("P") == groups.find("N"):
                continue
            fixed_of = {groups.find(n): v for n, v in _FIXED.items()}
            off = [diodes[d] for d in names if d not in subset]
            bounds = _bias_intervals(groups, fixed_of, off)
            if bounds is None:
                continue
            if i_sign != 0:
                adj = {}
                for a, b in links + [("P", "N")]:
                    adj.setdefault(a, []).append((b, None))
                    adj.setdefault(b, []).append((a, None))
                for d in subset:
                    a, c = diodes[d]
                    adj.setdefault(a, []).append((c, d))
                # the load pushes current out of A and back into B
                start, goal = ("B", "A") if i_sign > 0 else ("A", "B")
                if not _path_covers(adj, start, goal, frozenset(subset)):
                    continue
            poles = []
            clamps = set()
            for pole, clamp in zip("AB", _CLAMP_DIODES.get(kind, (None, None))):
                g = groups.find(pole)
                if g in fixed_of:
                    poles.append(fixed_of[g])
                    continue
                lo, hi = bounds[0].get(g, -np.inf), bounds[1].get(g, np.inf)
                if kind.clamped and lo <= 0.5 <= hi:
                    poles.append(0.5)
                    clamps.add(clamp)
                else:
                    poles.append(None)
            found[subset] = (poles[0], poles[1], frozenset(subset) | clamps)

    if not found:
        raise TopologyError(f"{gates} with i_sign={i_sign}: no consistent conduction state")
    results = {(v_an, v_bn) for v_an, v_bn, _ in found.values()}
    if len(results) > 1:
        raise TopologyError(f"{gates} with i_sign={i_sign}: ambiguous pole potentials {sorted(results, key=str)}")
    v_an, v_bn = results.pop()
    if v_an is None or v_bn is None:
        raise TopologyError(f"{gates} with i_sign={i_sign}: pole potential left floating")
    conducting = frozenset().union(*(d for _, _, d in found.values()))
    return v_an, v_bn, conducting


def pole_fractions(kind: TopologyKind, gates: GateCommand, i_sign: int) -> tuple[float, float]:
    """Pole potentials (v_an, v_bn) as multiples of v_pv."""
    kind = TopologyKind.parse(kind)
    if gates.kind is not kind:
        raise TopologyError(f"gate command for {gates.kind.value} used with {kind.value}")
    v_an, v_bn, _ = _solve(kind, gates.on, int(np.sign(i_sign)))
    return v_an, v_bn


def pole_voltages(kind: TopologyKind, gates: GateCommand, i_sign: int, v_pv: float) -> PoleVoltages:
    """Pole-to-N voltages for the commanded switches and filter-current sign.

    ``i_sign`` is +1 when current leaves pole A toward the grid.
    """
    a, b = pole_fractions(kind, gates, i_sign)
    return PoleVoltages(a * v_pv, b * v_pv)


_MODE_GATES = {
    TopologyKind.H4_UNIPOLAR: ((("Q1", "Q4"), 1), (("Q1",), 1), (("Q2", "Q3"), -1), (("Q2",), -1)),
    TopologyKind.H4_BIPOLAR: ((("Q1", "Q4"), 1), (("Q2", "Q3"), 1), (("Q2", "Q3"), -1), (("Q1", "Q4"), -1)),
    TopologyKind.H5: ((("Q1", "Q4", "Q5"), 1), (("Q1",), 1), (("Q2", "Q3", "Q5"), -1), (("Q3",), -1)),
    TopologyKind.HERIC: ((("Q1", "Q4", "Q6"), 1), (("Q6",), 1), (("Q2", "Q3", "Q5"), -1), (("Q5",), -1)),
}


def enumerate_modes(kind: TopologyKind) -> list[ModeRow]:
    kind = TopologyKind.parse(kind)
    rows = []
    for index, (switches, i_sign) in enumerate(_MODE_GATES[kind], start=1):
        gates = GateCommand.of(kind, *switches)
        v_an, v_bn = pole_fractions(kind, gates, i_sign)
        rows.append(ModeRow(index, gates, i_sign, v_an, v_bn, v_an - v_bn, (v_an + v_bn) / 2.0))
    return rows


def switch_frequency_class(kind: TopologyKind, switch_id: str) -> str:
    kind = TopologyKind.parse(kind)
    try:
        return _FREQUENCY_CLASS[kind][switch_id]
    except KeyError:
        raise TopologyError(f"{kind.value} has no switch {switch_id!r}") from None


@lru_cache(maxsize=None)
def pole_table(kind: TopologyKind) -> np.ndarray:
    """Dense lookup ``table[mask, i_sign + 1] -> (v_an, v_bn)`` in units of
    v_pv; NaN marks gate states that are illegal or unresolvable."""
    kind = TopologyKind.parse(kind)
    n = kind.switch_count
    table = np.full((1 << n, 3, 2), np.nan)
    for mask in range(1 << n):
        gates = GateCommand.from_mask(kind, mask)
        for i_sign in (-1, 0, 1):
            try:
                table[mask, i_sign + 1] = pole_fractions(kind, gates, i_sign)
            except TopologyError:
                pass
    table.setflags(write=False)
    return table
