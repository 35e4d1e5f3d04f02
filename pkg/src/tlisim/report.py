"""Scenario configuration, batch comparison and waveform export."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import build_report
from .analytic import leakage_rms_estimate
from .params import CircuitParams, ParamsError, validate_params
from .simulate import WaveformRecord, run
from .topology import TopologyError, TopologyKind

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "ComparisonTable",
    "CONFIG_KEYS",
    "CSV_HEADER",
    "parse_config",
    "serialize_config",
    "compare_all",
    "export_waveforms",
    "read_waveforms",
]

log = logging.getLogger(__name__)

TOPOLOGY_ORDER = tuple(TopologyKind)
_PARAM_KEYS = tuple(CircuitParams().to_dict())
CONFIG_KEYS = _PARAM_KEYS + ("topologies", "out_dir", "decimation", "max_order")
CSV_HEADER = ",".join(WaveformRecord.SERIES)
TABLE_COLUMNS = (
    "topology", "v_dc", "cmv_constant", "dmv_levels", "leakage_rms_mA", "switch_count",
    "thd_percent", "vde_compliant", "analytical_leakage_rms_mA",
)


class ConfigError(ValueError):
    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = fields or []


@dataclass(frozen=True)
class ScenarioConfig:
    params: CircuitParams = field(default_factory=CircuitParams)
    topologies: tuple = TOPOLOGY_ORDER
    out_dir: str = "out"
    decimation: int = 1
    max_order: int | None = None


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def parse_config(text: str) -> ScenarioConfig:
    """Parse a JSON scenario; absent keys take their defaults."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown)

    values = CircuitParams().to_dict()
    for key in _PARAM_KEYS:
        if key not in doc:
            continue
        value = doc[key]
        if key == "n_cycles":
            if not _is_int(value):
                raise ConfigError(f"n_cycles must be an integer, got {value!r}", [key])
        elif not _is_real(value):
            raise ConfigError(f"{key} must be a number, got {value!r}", [key])
        else:
            value = float(value)
        values[key] = value
    try:
        params = validate_params(CircuitParams(**values))
    except ParamsError as exc:
        raise ConfigError(f"invalid parameters: {exc}", exc.fields) from None

    topologies = doc.get("topologies", [k.value for k in TOPOLOGY_ORDER])
    if not isinstance(topologies, list) or not all(isinstance(t, str) for t in topologies):
        raise ConfigError("topologies must be a list of names", ["topologies"])
    if not topologies:
        raise ConfigError("topologies must not be empty", ["topologies"])
    try:
        kinds = tuple(TopologyKind.parse(t) for t in topologies)
    except TopologyError as exc:
        raise ConfigError(f"topologies: {exc}", ["topologies"]) from None

    out_dir = doc.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a non-empty string", ["out_dir"])
    decimation = doc.get("decimation", 1)
    if not _is_int(decimation) or decimation < 1:
        raise ConfigError(f"decimation must be an integer >= 1, got {decimation!r}", ["decimation"])
    max_order = doc.get("max_order")
    if max_order is not None and (not _is_int(max_order) or max_order < 2):
        raise ConfigError(f"max_order must be null or an integer >= 2, got {max_order!r}", ["max_order"])
    return ScenarioConfig(params, kinds, out_dir, decimation, max_order)


def serialize_config(config: ScenarioConfig) -> str:
    doc = config.params.to_dict()
    doc.update(
        topologies=[k.value for k in config.topologies],
        out_dir=config.out_dir,
        decimation=config.decimation,
        max_order=config.max_order,
    )
    return json.dumps(doc, indent=2) + "\n"


@dataclass
class ComparisonTable:
    rows: list
    reports: dict
    errors: dict

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> str:
        doc = {"columns": list(TABLE_COLUMNS), "rows": self.rows, "reports": self.reports, "errors": self.errors}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def format(self) -> str:
        headers = list(TABLE_COLUMNS)
        body = []
        for row in self.rows:
            cells = []
            for col in headers:
                v = row[col]
                if isinstance(v, float):
                    cells.append(f"{v:.4g}")
                else:
                    cells.append(str(v))
            body.append(cells)
        for name, msg in self.errors.items():
            body.append([name, "FAILED: " + msg] + [""] * (len(headers) - 2))
        widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body)
        return "\n".join(lines) + "\n"


def _evaluate(kind: TopologyKind, config: ScenarioConfig):
    record = run(kind, config.params)
    report = build_report(record, config.params, config.max_order)
    estimate = leakage_rms_estimate(record, config.params)
    row = {
        "topology": kind.value,
        "v_dc": config.params.v_pv,
        "cmv_constant": report.cmv_constant,
        "dmv_levels": len(report.dmv_levels),
        "leakage_rms_mA": report.leakage_rms * 1e3,
        "switch_count": kind.switch_count,
        "thd_percent": report.thd_percent,
        "vde_compliant": report.vde_compliant,
        "analytical_leakage_rms_mA": estimate * 1e3,
    }
    return row, report.to_dict()


def compare_all(config: ScenarioConfig, jobs: int = 1) -> ComparisonTable:
    """Run every configured topology and tabulate the results.

    A failing topology is reported in ``errors`` without stopping the others;
    rows always follow the fixed topology order.
    """
    if not config.topologies:
        raise ConfigError("topologies must not be empty", ["topologies"])
    kinds = [k for k in TOPOLOGY_ORDER if k in config.topologies]

    def attempt(kind):
        try:
            return kind, _evaluate(kind, config), None
        except Exception as exc:  # one bad run must not sink the batch
            log.error("%s failed: %s", kind.value, exc)
            return kind, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(attempt, kinds))
    else:
        results = [attempt(k) for k in kinds]
    rows, reports, errors = [], {}, {}
    for kind, result, error in results:
        if error is not None:
            errors[kind.value] = error
        else:
            rows.append(result[0])
            reports[kind.value] = result[1]
    return ComparisonTable(rows, reports, errors)


def export_waveforms(record: WaveformRecord, path, decimation: int = 1) -> Path:
    """Write every ``decimation``-th sample to CSV, atomically.

    Values are SI and printed with 17 significant digits so they round-trip.
    """
    if not isinstance(decimation, int) or decimation < 1:
        raise ValueError(f"decimation must be an integer >= 1, got {decimation!r}")
    path = Path(path)
    data = np.column_stack([getattr(record, name)[::decimation] for name in WaveformRecord.SERIES])
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            np.savetxt(fh, data, fmt="%.17g", delimiter=",", header=CSV_HEADER, comments="")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_waveforms(path, kind: TopologyKind | None, params: CircuitParams) -> WaveformRecord:
    """Load a CSV written by ``export_waveforms`` back into a record.

    The sample interval comes from the time column; ``params.n_cycles`` is
    replaced by the number of whole cycles the file spans.
    """
    with open(path) as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples")
    interval = float(data[1, 0] - data[0, 0])
    per = 1.0 / (params.f0 * interval)
    n_per = max(int(round(per)), 1)
    cycles = max((data.shape[0] - 1) // n_per, 1)
    decimation = max(int(round(interval / params.dt)), 1)
    snapshot = params.replace(n_cycles=cycles)
    kind = TopologyKind.parse(kind) if kind is not None else None
    return WaveformRecord(kind, snapshot, interval, decimation, *data.T)
