"""CLI pipeline: generate, solve, verify, bench; determinism and exit codes."""

import json
import re

import numpy as np
import pytest

from phaserec.cli import main


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def strip_timing(text: str) -> str:
    return "\n".join(
        line for line in text.splitlines() if not line.startswith("timing_s")
    )


@pytest.fixture()
def workspace(tmp_path):
    return tmp_path


class TestGenerate:
    def test_writes_instance_and_truth(self, workspace, capsys):
        inst = workspace / "inst.txt"
        truth = workspace / "truth.txt"
        code, _, err = run(
            ["generate", "--kind", "random-smooth", "--size", "8", "--seed", "1",
             "--out", str(inst), "--truth-out", str(truth)],
            capsys,
        )
        assert code == 0 and not err
        assert inst.exists() and truth.exists()

    def test_deterministic_bytes(self, workspace, capsys):
        a, b = workspace / "a.txt", workspace / "b.txt"
        for path in (a, b):
            code, _, _ = run(
                ["generate", "--kind", "random-smooth", "--size", "8", "--seed", "7",
                 "--out", str(path)],
                capsys,
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_paper_h_dimensions(self, workspace, capsys):
        inst = workspace / "paper.txt"
        code, _, _ = run(["generate", "--kind", "paper-h", "--out", str(inst)], capsys)
        assert code == 0
        text = inst.read_text()
        assert "grid_len = 399" in text
        assert "support = -100 99" in text
        assert "sinc = unnormalized" in text

    def test_one_sided(self, workspace, capsys):
        inst = workspace / "os.txt"
        code, _, _ = run(
            ["generate", "--kind", "one-sided", "--size", "16", "--out", str(inst)],
            capsys,
        )
        assert code == 0
        assert "support = 0 15" in inst.read_text()

    def test_unknown_kind_fails(self, workspace, capsys):
        code, _, err = run(
            ["generate", "--kind", "mystery", "--out", str(workspace / "x.txt")], capsys
        )
        assert code != 0
        assert "mystery" in err

    def test_missing_out_fails(self, workspace, capsys):
        code, _, err = run(["generate", "--kind", "random-smooth"], capsys)
        assert code != 0


class TestSolve:
    @pytest.fixture()
    def instance_files(self, workspace, capsys):
        inst = workspace / "inst.txt"
        truth = workspace / "truth.txt"
        run(
            ["generate", "--kind", "random-smooth", "--size", "12", "--seed", "3",
             "--out", str(inst), "--truth-out", str(truth)],
            capsys,
        )
        return inst, truth

    def test_report_written_with_metrics(self, workspace, capsys, instance_files):
        inst, truth = instance_files
        report = workspace / "report.txt"
        code, _, _ = run(
            ["solve", str(inst), "--truth", str(truth), "--out", str(report)], capsys
        )
        assert code == 0
        text = report.read_text()
        spectral = float(re.search(r"spectral_error = (\S+)", text).group(1))
        assert spectral < 1e-5

    def test_bit_identical_reports(self, workspace, capsys, instance_files):
        inst, truth = instance_files
        a, b = workspace / "a.txt", workspace / "b.txt"
        for path in (a, b):
            code, _, _ = run(["solve", str(inst), "--out", str(path)], capsys)
            assert code == 0
        assert strip_timing(a.read_text()) == strip_timing(b.read_text())

    def test_selector_equivalent_branch_logs(self, workspace, capsys, instance_files):
        inst, _ = instance_files
        logs = {}
        for selector in ("incremental", "full"):
            path = workspace / f"{selector}.txt"
            code, _, _ = run(
                ["solve", str(inst), "--selector", selector, "--out", str(path)], capsys
            )
            assert code == 0
            text = path.read_text()
            section = text.split("begin branch_log\n")[1].split("end branch_log")[0]
            logs[selector] = [line.split()[:4] for line in section.splitlines() if line]
        assert logs["incremental"] == logs["full"]

    def test_emit_curves_files_and_figures(self, workspace, capsys, instance_files):
        inst, _ = instance_files
        prefix = workspace / "curves"
        code, _, _ = run(
            ["solve", str(inst), "--emit-curves", str(prefix), "--out",
             str(workspace / "r.txt")],
            capsys,
        )
        assert code == 0
        field = workspace / "curves_field.txt"
        assert field.exists()
        rows = [l for l in field.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 23  # grid length for S = 12
        assert all(len(r.split()) == 3 for r in rows)
        assert (workspace / "curves_spectrum.txt").exists()
        for name in ("curves_field.png", "curves_spectrum.png"):
            png = workspace / name
            assert png.exists() and png.stat().st_size > 1000

    def test_no_figures_flag(self, workspace, capsys, instance_files):
        inst, _ = instance_files
        prefix = workspace / "plain"
        code, _, _ = run(
            ["solve", str(inst), "--emit-curves", str(prefix), "--no-figures",
             "--out", str(workspace / "r.txt")],
            capsys,
        )
        assert code == 0
        assert (workspace / "plain_field.txt").exists()
        assert not (workspace / "plain_field.png").exists()

    def test_json_format(self, workspace, capsys, instance_files):
        inst, truth = instance_files
        code, out, _ = run(
            ["solve", str(inst), "--truth", str(truth), "--format", "json"], capsys
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["mode"] == "1d"
        assert doc["metrics"]["spectral_error"] < 1e-5

    def test_gauge_override(self, workspace, capsys, instance_files):
        inst, _ = instance_files
        out_a, out_b = workspace / "ga.txt", workspace / "gb.txt"
        run(["solve", str(inst), "--gauge", "0.0", "--out", str(out_a)], capsys)
        run(["solve", str(inst), "--gauge", "1.0", "--out", str(out_b)], capsys)
        assert strip_timing(out_a.read_text()) != strip_timing(out_b.read_text())

    def test_priors_from_report(self, workspace, capsys):
        inst = workspace / "hard.txt"
        truth = workspace / "hard_truth.txt"
        run(
            ["generate", "--kind", "random-uniform", "--size", "8", "--seed", "3",
             "--out", str(inst), "--truth-out", str(truth)],
            capsys,
        )
        first = workspace / "first.txt"
        run(["solve", str(inst), "--out", str(first)], capsys)
        seeded = workspace / "seeded.txt"
        code, _, _ = run(
            ["solve", str(inst), "--priors", str(first), "--out", str(seeded)], capsys
        )
        assert code == 0
        res_first = float(re.search(r"final_residual = (\S+)", first.read_text()).group(1))
        res_seeded = float(re.search(r"final_residual = (\S+)", seeded.read_text()).group(1))
        assert res_seeded <= res_first + 1e-12

    def test_refine_passes_recorded(self, workspace, capsys, instance_files):
        inst, _ = instance_files
        report = workspace / "refined.txt"
        code, _, _ = run(
            ["solve", str(inst), "--refine-passes", "2", "--out", str(report)], capsys
        )
        assert code == 0
        assert "refine_passes = 2" in report.read_text()

    def test_missing_instance_errors(self, workspace, capsys):
        code, _, err = run(["solve", str(workspace / "absent.txt")], capsys)
        assert code == 1
        assert "error:" in err

    def test_noisy_solve_exits_zero_with_flags(self, workspace, capsys):
        inst = workspace / "noisy.txt"
        run(
            ["generate", "--kind", "random-smooth", "--size", "12", "--seed", "5",
             "--noise", "0.3", "--out", str(inst)],
            capsys,
        )
        report = workspace / "noisy_report.txt"
        code, _, _ = run(["solve", str(inst), "--out", str(report)], capsys)
        assert code == 0
        section = report.read_text().split("begin flags\n")[1].split("end flags")[0]
        assert section.strip()


class TestVerify:
    def test_truth_against_itself(self, workspace, capsys):
        truth = workspace / "truth.txt"
        run(
            ["generate", "--kind", "random-smooth", "--size", "8", "--seed", "2",
             "--out", str(workspace / "i.txt"), "--truth-out", str(truth)],
            capsys,
        )
        code, out, _ = run(["verify", str(truth), str(truth)], capsys)
        assert code == 0
        values = dict(
            line.split(" = ") for line in out.splitlines() if " = " in line
        )
        assert float(values["spectral_error"]) < 1e-14
        assert float(values["field_magnitude_error"]) < 1e-14
        assert float(values["residual"]) < 1e-20

    def test_gauge_rotated_truth_scores_zero(self, workspace, capsys):
        from phaserec.io import write_truth_1d
        from phaserec.oracle import GeneratorSpec, generate
        from phaserec.spectral import CenteredSpectrum

        truth, _ = generate(GeneratorSpec(kind="random_smooth", size=8, seed=4))
        rotated = CenteredSpectrum.from_window(
            truth.window() * np.exp(0.9j), truth.grid_len, truth.support
        )
        t_path, r_path = workspace / "t.txt", workspace / "r.txt"
        write_truth_1d(t_path, truth)
        write_truth_1d(r_path, rotated)
        code, out, _ = run(["verify", str(r_path), str(t_path)], capsys)
        assert code == 0
        spectral = float(re.search(r"spectral_error = (\S+)", out).group(1))
        assert spectral < 1e-12

    def test_recovered_report_verifies(self, workspace, capsys):
        inst, truth = workspace / "i.txt", workspace / "t.txt"
        run(
            ["generate", "--kind", "random-smooth", "--size", "10", "--seed", "6",
             "--out", str(inst), "--truth-out", str(truth)],
            capsys,
        )
        report = workspace / "rep.txt"
        run(["solve", str(inst), "--out", str(report)], capsys)
        code, out, _ = run(["verify", str(report), str(truth), "--format", "json"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["spectral_error"] < 1e-10

    def test_wrong_file_kind_errors(self, workspace, capsys):
        plain = workspace / "plain.txt"
        plain.write_text("not a phaserec file\n", encoding="utf-8")
        code, _, err = run(["verify", str(plain), str(plain)], capsys)
        assert code == 1


class TestBench:
    def test_table_shape(self, capsys):
        code, out, _ = run(["bench", "--sizes", "8,12", "--trials", "2"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].split() == [
            "size", "mean_runtime_s", "mean_spectral_error", "success_rate"
        ]
        assert len(lines) == 3
        first = lines[1].split()
        assert first[0] == "8"
        assert float(first[3]) == 1.0

    def test_json_format(self, capsys):
        code, out, _ = run(["bench", "--sizes", "8", "--trials", "2", "--format", "json"], capsys)
        assert code == 0
        rows = json.loads(out)
        assert rows[0]["size"] == 8
        assert rows[0]["success_rate"] == 1.0

    def test_empty_sizes_usage_error(self, capsys):
        code, _, err = run(["bench", "--sizes", ""], capsys)
        assert code != 0

    def test_bad_sizes_usage_error(self, capsys):
        code, _, err = run(["bench", "--sizes", "8,x"], capsys)
        assert code != 0


class TestTwoDimensional:
    def test_end_to_end(self, workspace, capsys):
        inst, truth = workspace / "i2.txt", workspace / "t2.txt"
        code, _, _ = run(
            ["generate", "--mode", "2d", "--order", "2", "--seed", "3",
             "--out", str(inst), "--truth-out", str(truth)],
            capsys,
        )
        assert code == 0
        report = workspace / "r2.txt"
        code, _, _ = run(
            ["solve", str(inst), "--truth", str(truth), "--out", str(report)], capsys
        )
        assert code == 0
        spectral = float(
            re.search(r"spectral_error = (\S+)", report.read_text()).group(1)
        )
        assert spectral < 1e-5
        code, out, _ = run(["verify", str(report), str(truth)], capsys)
        assert code == 0

    def test_emit_curves_2d(self, workspace, capsys):
        inst = workspace / "i2.txt"
        run(["generate", "--mode", "2d", "--order", "1", "--seed", "1", "--out", str(inst)], capsys)
        prefix = workspace / "grid"
        code, _, _ = run(
            ["solve", str(inst), "--emit-curves", str(prefix), "--out", str(workspace / "r.txt")],
            capsys,
        )
        assert code == 0
        assert (workspace / "grid_field.txt").exists()
        assert (workspace / "grid_field.png").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
