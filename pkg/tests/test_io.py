"""File formats: lossless round trips and header discipline."""

import json

import numpy as np
import pytest

from phaserec.engine1d import solve_1d
from phaserec.engine2d import solve_2d
from phaserec.io import (
    fmt,
    read_instance,
    read_report_recovered,
    read_truth,
    render_report_json,
    render_report_text,
    sniff_kind,
    write_instance,
    write_truth_1d,
    write_truth_2d,
)
from phaserec.oracle import ErrorMetrics, GeneratorSpec, generate, generate_2d


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-12, 12, 200):
        assert float(fmt(float(x))) == float(x)


def test_instance_round_trip_1d(tmp_path):
    truth, inst = generate(GeneratorSpec(kind="random_smooth", size=9, seed=2))
    path = tmp_path / "inst.txt"
    write_instance(path, inst, {"kind": "random-smooth", "seed": "2"})
    doc = read_instance(path)
    assert doc.mode == "1d"
    assert doc.instance.grid_len == inst.grid_len
    assert doc.instance.support == inst.support
    assert np.array_equal(doc.instance.field_magnitude, inst.field_magnitude)
    assert np.array_equal(doc.instance.coeff_magnitudes, inst.coeff_magnitudes)
    assert doc.metadata["kind"] == "random-smooth"


def test_instance_round_trip_priors_and_gauge(tmp_path):
    truth, base = generate(GeneratorSpec(kind="random_smooth", size=5, seed=1))
    inst = type(base)(
        grid_len=base.grid_len,
        field_magnitude=base.field_magnitude,
        coeff_magnitudes=base.coeff_magnitudes,
        support=base.support,
        priors={-1: 1j, 0: np.exp(0.3j)},
        gauge_phase=np.exp(1.1j),
    )
    path = tmp_path / "inst.txt"
    write_instance(path, inst)
    doc = read_instance(path)
    assert doc.instance.gauge_phase == inst.gauge_phase
    assert set(doc.instance.priors) == {-1, 0}
    assert doc.instance.priors[0] == inst.priors[0]


def test_instance_round_trip_2d(tmp_path):
    truth, inst = generate_2d(2, seed=4)
    path = tmp_path / "inst2d.txt"
    write_instance(path, inst, {"kind": "random-2d"})
    doc = read_instance(path)
    assert doc.mode == "2d"
    assert doc.instance.order == 2
    assert np.array_equal(doc.instance.field_magnitude, inst.field_magnitude)
    assert np.array_equal(doc.instance.coeff_magnitudes, inst.coeff_magnitudes)


def test_truth_round_trip_1d(tmp_path):
    truth, _ = generate(GeneratorSpec(kind="one_sided", size=6, seed=3))
    path = tmp_path / "truth.txt"
    write_truth_1d(path, truth)
    doc = read_truth(path)
    assert doc.mode == "1d"
    assert np.array_equal(doc.coeffs, truth.window())
    assert np.array_equal(doc.spectrum().coeffs, truth.coeffs)


def test_truth_round_trip_2d(tmp_path):
    truth, inst = generate_2d(1, seed=6)
    path = tmp_path / "truth2d.txt"
    write_truth_2d(path, truth, inst.grid_len)
    doc = read_truth(path)
    assert doc.mode == "2d"
    assert doc.order == 1
    assert np.array_equal(doc.coeffs, truth)


@pytest.mark.parametrize("render,is_json", [(render_report_text, False), (render_report_json, True)])
def test_report_recovered_round_trip(tmp_path, render, is_json):
    truth, inst = generate(GeneratorSpec(kind="random_smooth", size=7, seed=5))
    report = solve_1d(inst)
    metrics = ErrorMetrics(1e-16, 2e-16, report.final_residual)
    path = tmp_path / ("report.json" if is_json else "report.txt")
    path.write_text(render(report, metrics, timing_s=0.25), encoding="utf-8")
    mode, window, info = read_report_recovered(path)
    assert mode == "1d"
    assert info["support"] == report.recovered.support
    assert np.array_equal(window, report.recovered.window())


def test_report_recovered_round_trip_2d(tmp_path):
    truth, inst = generate_2d(1, seed=2)
    report = solve_2d(inst)
    path = tmp_path / "report2d.txt"
    path.write_text(render_report_text(report), encoding="utf-8")
    mode, coeffs, info = read_report_recovered(path)
    assert mode == "2d"
    assert info["order"] == 1
    assert np.array_equal(coeffs, report.recovered)


def test_report_json_is_valid_json():
    truth, inst = generate(GeneratorSpec(kind="random_smooth", size=5, seed=9))
    report = solve_1d(inst)
    doc = json.loads(render_report_json(report))
    assert doc["mode"] == "1d"
    assert len(doc["recovered"]) == 5
    assert doc["tool_version"]


def test_sniff_kind(tmp_path):
    truth, inst = generate(GeneratorSpec(kind="random_smooth", size=5, seed=0))
    ip, tp, rp = tmp_path / "i.txt", tmp_path / "t.txt", tmp_path / "r.txt"
    write_instance(ip, inst)
    write_truth_1d(tp, truth)
    rp.write_text(render_report_text(solve_1d(inst)), encoding="utf-8")
    assert sniff_kind(ip) == "instance"
    assert sniff_kind(tp) == "truth"
    assert sniff_kind(rp) == "report"
    other = tmp_path / "other.txt"
    other.write_text("hello\n", encoding="utf-8")
    assert sniff_kind(other) == "unknown"


def test_corrupt_header_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# not a phaserec file\nmode = 1d\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_instance(path)


def test_unclosed_section_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(
        "# phaserec instance v1\nmode = 1d\ngrid_len = 3\nsupport = 0 0\n"
        "begin field_magnitude\n1\n1\n1\n",
        encoding="utf-8",
    )
    with pytest.raises(ValueError):
        read_instance(path)


def test_text_files_use_lf(tmp_path):
    truth, inst = generate(GeneratorSpec(kind="random_smooth", size=5, seed=0))
    path = tmp_path / "inst.txt"
    write_instance(path, inst)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8")
