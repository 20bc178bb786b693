"""Line-oriented text persistence for instances, truths and reports.

All files share the same skeleton: a header comment naming the document
type and version, `key = value` metadata lines, then `begin <section>` /
`end <section>` blocks with one record per line.  Numbers are written
with 17 significant digits so every float64 round-trips exactly; the
files are UTF-8 with LF line endings and diff cleanly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .engine1d import BranchDecision, ProblemInstance1D, SolveReport
from .engine2d import BranchDecision2D, ProblemInstance2D, SolveReport2D
from .oracle import ErrorMetrics
from .spectral import CenteredSpectrum

INSTANCE_HEADER = "# phaserec instance v1"
TRUTH_HEADER = "# phaserec truth v1"
REPORT_HEADER = "# phaserec report v1"


def fmt(x: float) -> str:
    """17-significant-digit decimal form; round-trips any float64."""
    return format(float(x), ".17g")


def _fmt_complex(z: complex) -> str:
    return f"{fmt(z.real)} {fmt(z.imag)}"


@dataclass
class InstanceDocument:
    """Parsed instance file: the problem plus its generator metadata."""

    mode: str
    instance: ProblemInstance1D | ProblemInstance2D
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def is_2d(self) -> bool:
        return self.mode == "2d"


class _BlockWriter:
    def __init__(self) -> None:
        self.lines: list[str] = []

    def meta(self, key: str, value) -> None:
        self.lines.append(f"{key} = {value}")

    def section(self, name: str, rows: Iterable[str]) -> None:
        self.lines.append(f"begin {name}")
        self.lines.extend(rows)
        self.lines.append(f"end {name}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _parse_sections(lines: list[str], expected_header: str, path: str) -> tuple[dict, dict]:
    if not lines or lines[0].strip() != expected_header:
        raise ValueError(f"{path}: expected header {expected_header!r}")
    meta: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    current_name = ""
    for raw in lines[1:]:
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("begin "):
            if current is not None:
                raise ValueError(f"{path}: nested section {stripped!r}")
            current_name = stripped[len("begin "):]
            current = []
            continue
        if stripped.startswith("end "):
            name = stripped[len("end "):]
            if current is None or name != current_name:
                raise ValueError(f"{path}: unmatched {stripped!r}")
            sections[current_name] = current
            current = None
            continue
        if current is not None:
            current.append(stripped)
        elif "=" in line:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        else:
            raise ValueError(f"{path}: cannot parse line {line!r}")
    if current is not None:
        raise ValueError(f"{path}: section {current_name!r} never closed")
    return meta, sections


def _require(meta: dict, key: str, path: str) -> str:
    if key not in meta:
        raise ValueError(f"{path}: missing required field {key!r}")
    return meta[key]


def _gauge_of(meta: dict) -> complex:
    if "gauge" not in meta:
        return 1.0 + 0.0j
    re, im = (float(v) for v in meta["gauge"].split())
    return complex(re, im)


# -- instances ---------------------------------------------------------------


def write_instance(
    path: str | Path,
    instance: ProblemInstance1D | ProblemInstance2D,
    metadata: dict[str, str] | None = None,
) -> None:
    w = _BlockWriter()
    w.lines.append(INSTANCE_HEADER)
    if isinstance(instance, ProblemInstance1D):
        w.meta("mode", "1d")
        w.meta("grid_len", instance.grid_len)
        w.meta("support", f"{instance.support[0]} {instance.support[1]}")
    else:
        w.meta("mode", "2d")
        w.meta("order", instance.order)
        w.meta("grid_len", instance.grid_len)
    w.meta("gauge", _fmt_complex(complex(instance.gauge_phase)))
    for key, value in (metadata or {}).items():
        w.meta(key, value)
    if isinstance(instance, ProblemInstance1D):
        w.section("field_magnitude", (fmt(v) for v in instance.field_magnitude))
        w.section("coeff_magnitudes", (fmt(v) for v in instance.coeff_magnitudes))
        if instance.priors:
            w.section(
                "priors",
                (f"{k} {_fmt_complex(v)}" for k, v in sorted(instance.priors.items())),
            )
    else:
        w.section(
            "field_magnitude",
            (" ".join(fmt(v) for v in row) for row in instance.field_magnitude),
        )
        w.section(
            "coeff_magnitudes",
            (" ".join(fmt(v) for v in row) for row in instance.coeff_magnitudes),
        )
        if instance.priors:
            w.section(
                "priors",
                (
                    f"{k[0]} {k[1]} {_fmt_complex(v)}"
                    for k, v in sorted(instance.priors.items())
                ),
            )
    Path(path).write_text(w.text(), encoding="utf-8", newline="\n")


def read_instance(path: str | Path) -> InstanceDocument:
    path = str(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta, sections = _parse_sections(lines, INSTANCE_HEADER, path)
    mode = _require(meta, "mode", path)
    gauge = _gauge_of(meta)
    known = {"mode", "grid_len", "support", "order", "gauge"}
    extra = {k: v for k, v in meta.items() if k not in known}
    if mode == "1d":
        grid_len = int(_require(meta, "grid_len", path))
        s0, s1 = (int(v) for v in _require(meta, "support", path).split())
        fm = np.array([float(v) for v in sections.get("field_magnitude", [])])
        cm = np.array([float(v) for v in sections.get("coeff_magnitudes", [])])
        priors = None
        if "priors" in sections:
            priors = {}
            for row in sections["priors"]:
                idx, re, im = row.split()
                priors[int(idx)] = complex(float(re), float(im))
        inst = ProblemInstance1D(
            grid_len=grid_len,
            field_magnitude=fm,
            coeff_magnitudes=cm,
            support=(s0, s1),
            priors=priors,
            gauge_phase=gauge,
        )
        return InstanceDocument("1d", inst, extra)
    if mode == "2d":
        order = int(_require(meta, "order", path))
        grid_len = int(_require(meta, "grid_len", path))
        fm = np.array(
            [[float(v) for v in row.split()] for row in sections.get("field_magnitude", [])]
        )
        cm = np.array(
            [[float(v) for v in row.split()] for row in sections.get("coeff_magnitudes", [])]
        )
        priors = None
        if "priors" in sections:
            priors = {}
            for row in sections["priors"]:
                n1, n2, re, im = row.split()
                priors[(int(n1), int(n2))] = complex(float(re), float(im))
        inst = ProblemInstance2D(
            order=order,
            grid_len=grid_len,
            field_magnitude=fm,
            coeff_magnitudes=cm,
            priors=priors,
            gauge_phase=gauge,
        )
        return InstanceDocument("2d", inst, extra)
    raise ValueError(f"{path}: unknown mode {mode!r}")


# -- truths ------------------------------------------------------------------


def write_truth_1d(
    path: str | Path,
    truth: CenteredSpectrum,
    metadata: dict[str, str] | None = None,
) -> None:
    w = _BlockWriter()
    w.lines.append(TRUTH_HEADER)
    w.meta("mode", "1d")
    w.meta("grid_len", truth.grid_len)
    w.meta("support", f"{truth.support[0]} {truth.support[1]}")
    for key, value in (metadata or {}).items():
        w.meta(key, value)
    s0 = truth.support[0]
    w.section(
        "coeffs",
        (f"{s0 + i} {_fmt_complex(v)}" for i, v in enumerate(truth.window())),
    )
    Path(path).write_text(w.text(), encoding="utf-8", newline="\n")


def write_truth_2d(
    path: str | Path,
    coeffs: np.ndarray,
    grid_len: int,
    metadata: dict[str, str] | None = None,
) -> None:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    order = (coeffs.shape[0] - 1) // 2
    w = _BlockWriter()
    w.lines.append(TRUTH_HEADER)
    w.meta("mode", "2d")
    w.meta("order", order)
    w.meta("grid_len", grid_len)
    for key, value in (metadata or {}).items():
        w.meta(key, value)
    rows = []
    for i in range(coeffs.shape[0]):
        for j in range(coeffs.shape[1]):
            rows.append(f"{i - order} {j - order} {_fmt_complex(coeffs[i, j])}")
    w.section("coeffs", rows)
    Path(path).write_text(w.text(), encoding="utf-8", newline="\n")


@dataclass
class TruthDocument:
    mode: str
    grid_len: int
    support: tuple[int, int] | None   # 1d only
    order: int | None                 # 2d only
    coeffs: np.ndarray                # 1d: window vector; 2d: square array
    metadata: dict[str, str]

    def spectrum(self) -> CenteredSpectrum:
        if self.mode != "1d":
            raise ValueError("spectrum() is only available for 1d truths")
        return CenteredSpectrum.from_window(self.coeffs, self.grid_len, self.support)


def read_truth(path: str | Path) -> TruthDocument:
    path = str(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta, sections = _parse_sections(lines, TRUTH_HEADER, path)
    mode = _require(meta, "mode", path)
    grid_len = int(_require(meta, "grid_len", path))
    known = {"mode", "grid_len", "support", "order"}
    extra = {k: v for k, v in meta.items() if k not in known}
    rows = sections.get("coeffs", [])
    if mode == "1d":
        s0, s1 = (int(v) for v in _require(meta, "support", path).split())
        window = np.zeros(s1 - s0 + 1, dtype=np.complex128)
        for row in rows:
            idx, re, im = row.split()
            window[int(idx) - s0] = complex(float(re), float(im))
        return TruthDocument("1d", grid_len, (s0, s1), None, window, extra)
    if mode == "2d":
        order = int(_require(meta, "order", path))
        n = 2 * order + 1
        coeffs = np.zeros((n, n), dtype=np.complex128)
        for row in rows:
            n1, n2, re, im = row.split()
            coeffs[int(n1) + order, int(n2) + order] = complex(float(re), float(im))
        return TruthDocument("2d", grid_len, None, order, coeffs, extra)
    raise ValueError(f"{path}: unknown mode {mode!r}")


# -- reports -----------------------------------------------------------------


def _branch_rows_1d(log: tuple[BranchDecision, ...]) -> list[str]:
    return [
        f"{d.step} {d.pair[0]} {d.pair[1]} {d.chosen} {fmt(d.gap)} {int(d.tie)}"
        for d in log
    ]


def _branch_rows_2d(log: tuple[BranchDecision2D, ...]) -> list[str]:
    return [
        f"{d.step} {d.pair[0][0]} {d.pair[0][1]} {d.chosen} {fmt(d.gap)} {int(d.tie)}"
        for d in log
    ]


def report_to_dict(
    report: SolveReport | SolveReport2D,
    metrics: ErrorMetrics | None = None,
    timing_s: float | None = None,
    refine_passes: int = 1,
) -> dict:
    """JSON-ready view of a solve report (used by both output formats)."""
    doc: dict = {
        "tool_version": __version__,
        "selector": report.selector,
        "refine_passes": refine_passes,
        "final_residual": report.final_residual,
        "consistency_flags": list(report.consistency_flags),
    }
    if isinstance(report, SolveReport):
        doc["mode"] = "1d"
        doc["grid_len"] = report.recovered.grid_len
        doc["support"] = list(report.recovered.support)
        s0 = report.recovered.support[0]
        doc["recovered"] = [
            {"index": s0 + i, "re": v.real, "im": v.imag}
            for i, v in enumerate(report.recovered.window())
        ]
        doc["branch_log"] = [
            {
                "step": d.step,
                "pair": list(d.pair),
                "chosen": d.chosen,
                "gap": d.gap,
                "tie": d.tie,
            }
            for d in report.branch_log
        ]
    else:
        doc["mode"] = "2d"
        doc["order"] = report.order
        doc["grid_len"] = report.grid_len
        n = report.order
        doc["recovered"] = [
            {
                "n1": i - n,
                "n2": j - n,
                "re": report.recovered[i, j].real,
                "im": report.recovered[i, j].imag,
            }
            for i in range(2 * n + 1)
            for j in range(2 * n + 1)
        ]
        doc["branch_log"] = [
            {
                "step": d.step,
                "pair": [list(d.pair[0]), list(d.pair[1])],
                "chosen": d.chosen,
                "gap": d.gap,
                "tie": d.tie,
            }
            for d in report.branch_log
        ]
    if metrics is not None:
        doc["metrics"] = {
            "spectral_error": None if np.isnan(metrics.spectral_error) else metrics.spectral_error,
            "field_magnitude_error": metrics.field_magnitude_error,
            "residual": metrics.residual,
            "flags": list(metrics.flags),
        }
    if timing_s is not None:
        doc["timing_s"] = timing_s
    return doc


def render_report_text(
    report: SolveReport | SolveReport2D,
    metrics: ErrorMetrics | None = None,
    timing_s: float | None = None,
    refine_passes: int = 1,
) -> str:
    w = _BlockWriter()
    w.lines.append(REPORT_HEADER)
    w.meta("tool_version", __version__)
    if isinstance(report, SolveReport):
        w.meta("mode", "1d")
        w.meta("grid_len", report.recovered.grid_len)
        w.meta("support", f"{report.recovered.support[0]} {report.recovered.support[1]}")
    else:
        w.meta("mode", "2d")
        w.meta("order", report.order)
        w.meta("grid_len", report.grid_len)
    w.meta("selector", report.selector)
    w.meta("refine_passes", refine_passes)
    w.meta("final_residual", fmt(report.final_residual))
    if metrics is not None:
        w.meta("spectral_error", fmt(metrics.spectral_error))
        w.meta("field_magnitude_error", fmt(metrics.field_magnitude_error))
        w.meta("residual", fmt(metrics.residual))
        if metrics.flags:
            w.meta("metric_flags", ",".join(metrics.flags))
    if timing_s is not None:
        w.meta("timing_s", fmt(timing_s))
    w.section("flags", report.consistency_flags)
    if isinstance(report, SolveReport):
        w.section("branch_log", _branch_rows_1d(report.branch_log))
        s0 = report.recovered.support[0]
        w.section(
            "recovered",
            (
                f"{s0 + i} {_fmt_complex(v)}"
                for i, v in enumerate(report.recovered.window())
            ),
        )
    else:
        w.section("branch_log", _branch_rows_2d(report.branch_log))
        n = report.order
        w.section(
            "recovered",
            (
                f"{i - n} {j - n} {_fmt_complex(report.recovered[i, j])}"
                for i in range(2 * n + 1)
                for j in range(2 * n + 1)
            ),
        )
    return w.text()


def render_report_json(
    report: SolveReport | SolveReport2D,
    metrics: ErrorMetrics | None = None,
    timing_s: float | None = None,
    refine_passes: int = 1,
) -> str:
    doc = report_to_dict(report, metrics, timing_s, refine_passes)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_report_recovered(path: str | Path) -> tuple[str, np.ndarray, dict]:
    """Recovered coefficients from a report file (text or JSON).

    Returns (mode, coefficients, header): the 1-D window vector together
    with grid/support info, or the 2-D square array with order/grid info.
    """
    path = str(path)
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        mode = doc["mode"]
        if mode == "1d":
            s0, s1 = doc["support"]
            window = np.zeros(s1 - s0 + 1, dtype=np.complex128)
            for entry in doc["recovered"]:
                window[entry["index"] - s0] = complex(entry["re"], entry["im"])
            return "1d", window, {"grid_len": doc["grid_len"], "support": (s0, s1)}
        order = doc["order"]
        n = 2 * order + 1
        coeffs = np.zeros((n, n), dtype=np.complex128)
        for entry in doc["recovered"]:
            coeffs[entry["n1"] + order, entry["n2"] + order] = complex(entry["re"], entry["im"])
        return "2d", coeffs, {"grid_len": doc["grid_len"], "order": order}
    lines = text.splitlines()
    meta, sections = _parse_sections(lines, REPORT_HEADER, path)
    mode = _require(meta, "mode", path)
    rows = sections.get("recovered", [])
    if mode == "1d":
        s0, s1 = (int(v) for v in _require(meta, "support", path).split())
        window = np.zeros(s1 - s0 + 1, dtype=np.complex128)
        for row in rows:
            idx, re, im = row.split()
            window[int(idx) - s0] = complex(float(re), float(im))
        return "1d", window, {"grid_len": int(meta["grid_len"]), "support": (s0, s1)}
    order = int(_require(meta, "order", path))
    n = 2 * order + 1
    coeffs = np.zeros((n, n), dtype=np.complex128)
    for row in rows:
        n1, n2, re, im = row.split()
        coeffs[int(n1) + order, int(n2) + order] = complex(float(re), float(im))
    return "2d", coeffs, {"grid_len": int(meta["grid_len"]), "order": order}


def sniff_kind(path: str | Path) -> str:
    """Identify a phaserec file: 'instance', 'truth', 'report' or 'unknown'."""
    try:
        head = Path(path).read_text(encoding="utf-8")[:4096]
    except OSError:
        return "unknown"
    stripped = head.lstrip()
    if stripped.startswith("{"):
        return "report" if '"branch_log"' in head or '"recovered"' in head else "unknown"
    first = head.splitlines()[0].strip() if head.splitlines() else ""
    return {
        INSTANCE_HEADER: "instance",
        TRUTH_HEADER: "truth",
        REPORT_HEADER: "report",
    }.get(first, "unknown")
