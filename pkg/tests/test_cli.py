"""Command-line interface: exit codes, file formats, byte-level determinism."""

import json
import math
import time

import pytest

from spinsens.cli import (RECORD_COLUMNS, SUMMARY_COLUMNS, CommandLineError,
                          config_hash, file_sha256, main, resolve_threads)

RING_FLAGS = ["--n", "4", "--topology", "ring", "--in", "1", "--out", "2"]


def run_synth(tmp_path, name, threads, restarts=6, seed=3):
    out = tmp_path / name / "controllers.json"
    code = main(["synth", *RING_FLAGS, "--restarts", str(restarts),
                 "--seed", str(seed), "--tf-range", "1", "10",
                 "--threads", str(threads), "-o", str(out)])
    assert code == 0
    return out


def run_analyze(controllers_path, threads):
    records = controllers_path.with_name("records.csv")
    summaries = controllers_path.with_name("summaries.csv")
    code = main(["analyze", str(controllers_path), "--records", str(records),
                 "--summaries", str(summaries), "--threads", str(threads)])
    assert code == 0
    return records, summaries


class TestArgumentHandling:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "spinsens" in capsys.readouterr().out

    def test_no_command_is_validation_error(self):
        assert main([]) == 1

    def test_unknown_flag_is_validation_error(self):
        assert main(["synth", "--bogus"]) == 1

    def test_missing_network_flags(self, capsys):
        assert main(["synth", "--n", "4"]) == 1
        assert "missing required flags" in capsys.readouterr().err

    def test_spec_and_flags_conflict(self, tmp_path):
        spec = tmp_path / "net.json"
        spec.write_text('{"n": 4, "topology": "ring", "j": 1.0, "in": 1, "out": 2}')
        assert main(["synth", "--spec", str(spec), "--n", "4"]) == 1

    def test_invalid_network_is_validation_error(self, capsys):
        assert main(["synth", "--n", "4", "--topology", "ring",
                     "--in", "1", "--out", "1"]) == 1
        assert "differ" in capsys.readouterr().err

    def test_nonzero_kappa_rejected(self):
        assert main(["synth", *RING_FLAGS, "--kappa", "0.5"]) == 1


class TestThreadResolution:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv("SPINSENS_THREADS", "7")
        assert resolve_threads(3) == 3

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("SPINSENS_THREADS", "2")
        assert resolve_threads(None) == 2

    def test_default_without_env(self, monkeypatch):
        monkeypatch.delenv("SPINSENS_THREADS", raising=False)
        assert resolve_threads(None) >= 1

    def test_bad_values_rejected(self, monkeypatch):
        with pytest.raises(CommandLineError):
            resolve_threads(0)
        monkeypatch.setenv("SPINSENS_THREADS", "zero")
        with pytest.raises(CommandLineError):
            resolve_threads(None)
        monkeypatch.setenv("SPINSENS_THREADS", "-1")
        with pytest.raises(CommandLineError):
            resolve_threads(None)


class TestAnalyzeInputs:
    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["analyze", str(tmp_path / "absent.json")]) == 3

    def test_unparseable_json_is_io_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("[{")
        (tmp_path / "bad.spec.json").write_text(
            '{"n": 2, "topology": "chain", "j": 1.0, "in": 1, "out": 2}')
        assert main(["analyze", str(bad)]) == 3
        assert "corrupt" in capsys.readouterr().err

    def test_row_missing_key_is_validation_error(self, tmp_path):
        bad = tmp_path / "rows.json"
        bad.write_text('[{"index": 0, "tf": 1.0}]')
        (tmp_path / "rows.spec.json").write_text(
            '{"n": 2, "topology": "chain", "j": 1.0, "in": 1, "out": 2}')
        assert main(["analyze", str(bad)]) == 1

    def test_empty_ensemble_is_validation_error(self, tmp_path):
        empty = tmp_path / "none.json"
        empty.write_text("[]")
        (tmp_path / "none.spec.json").write_text(
            '{"n": 2, "topology": "chain", "j": 1.0, "in": 1, "out": 2}')
        assert main(["analyze", str(empty)]) == 1


class TestSynthOutputs:
    def test_writes_ensemble_sidecar_and_manifest(self, tmp_path):
        out = run_synth(tmp_path, "a", threads=1)
        sidecar = out.with_name("controllers.spec.json")
        manifest_path = out.with_name("controllers.manifest.json")
        assert out.exists() and sidecar.exists() and manifest_path.exists()
        rows = json.loads(out.read_text())
        assert rows and {"index", "seed", "tf", "biases", "fidelity"} <= set(rows[0])
        # deduplication can only shrink the ensemble below the restart count
        assert len(rows) <= 6
        manifest = json.loads(manifest_path.read_text())
        assert manifest["command"] == "synth"
        assert manifest["outputs"][str(out)] == file_sha256(out)
        assert manifest["config_hash"] == config_hash(manifest["config"])

    def test_fidelity_sorted_descending(self, tmp_path):
        out = run_synth(tmp_path, "b", threads=1)
        fids = [row["fidelity"] for row in json.loads(out.read_text())]
        assert fids == sorted(fids, reverse=True)


class TestAnalyzeOutputs:
    def test_headers_and_row_count(self, tmp_path):
        out = run_synth(tmp_path, "c", threads=1)
        records, summaries = run_analyze(out, threads=1)
        rec_lines = records.read_text().splitlines()
        sum_lines = summaries.read_text().splitlines()
        assert rec_lines[0] == ",".join(RECORD_COLUMNS)
        assert sum_lines[0] == ",".join(SUMMARY_COLUMNS)
        n_controllers = len(json.loads(out.read_text()))
        assert len(rec_lines) == 1 + 8 * n_controllers
        assert len(sum_lines) == 1 + 8

    def test_sidecar_spec_found_by_default(self, tmp_path):
        out = run_synth(tmp_path, "d", threads=1)
        records, _ = run_analyze(out, threads=1)
        assert records.exists()

    def test_manifest_references_inputs(self, tmp_path):
        out = run_synth(tmp_path, "e", threads=1)
        records, summaries = run_analyze(out, threads=1)
        manifest = json.loads(records.with_name("records.manifest.json").read_text())
        assert manifest["inputs"][str(out)] == file_sha256(out)
        assert manifest["outputs"][str(records)] == file_sha256(records)
        assert manifest["outputs"][str(summaries)] == file_sha256(summaries)


class TestDeterminism:
    def test_byte_identical_across_runs_and_threads(self, tmp_path):
        outs = [run_synth(tmp_path, name, threads=threads)
                for name, threads in (("r1", 1), ("r2", 1), ("r4", 4))]
        blobs = [o.read_bytes() for o in outs]
        assert blobs[0] == blobs[1] == blobs[2]

        tables = []
        for out, threads in zip(outs, (1, 4, 1)):
            records, summaries = run_analyze(out, threads=threads)
            tables.append((records.read_bytes(), summaries.read_bytes()))
        assert tables[0] == tables[1] == tables[2]

    def test_manifests_identical_up_to_timestamp(self, tmp_path):
        m = []
        for name in ("t1", "t2"):
            out = run_synth(tmp_path, name, threads=1)
            doc = json.loads(out.with_name("controllers.manifest.json").read_text())
            doc.pop("created_utc")
            doc["outputs"] = sorted(doc["outputs"].values())
            m.append(doc)
        assert m[0] == m[1]


class TestPerfectTransferRows:
    def test_flag_and_vanishing_sensitivity(self, tmp_path):
        # hand-built analytic optimum: every row must carry the transfer
        # flag and a sensitivity at the noise floor
        controllers = tmp_path / "pst.json"
        controllers.write_text(
            '[{"index": 0, "seed": 0, "tf": 1.5707963267948966, '
            '"biases": [0, 0], "fidelity": 1}]\n')
        (tmp_path / "pst.spec.json").write_text(
            '{"n": 2, "topology": "chain", "j": 1.0, "in": 1, "out": 2}')
        records, _ = run_analyze(controllers, threads=1)
        lines = records.read_text().splitlines()
        assert len(lines) == 1 + 3
        cols = {name: i for i, name in enumerate(RECORD_COLUMNS)}
        for line in lines[1:]:
            parts = line.split(",")
            assert parts[cols["pst_flag"]] == "1"
            assert abs(float(parts[cols["abs_zeta"]])) <= 1e-8
            assert float(parts[cols["norm_Rs"]]) == pytest.approx(0.5, abs=1e-9)

    def test_nan_statistics_render(self, tmp_path):
        controllers = tmp_path / "pst.json"
        controllers.write_text(
            '[{"index": 0, "seed": 0, "tf": 1.5707963267948966, '
            '"biases": [0, 0], "fidelity": 1}]\n')
        (tmp_path / "pst.spec.json").write_text(
            '{"n": 2, "topology": "chain", "j": 1.0, "in": 1, "out": 2}')
        _, summaries = run_analyze(controllers, threads=1)
        body = summaries.read_text().splitlines()[1:]
        for line in body:
            assert math.isnan(float(line.split(",")[2]))


class TestVerifyCommand:
    SMALL = ["--n", "2", "3", "--systems-per-dim", "3", "--three-way-per-dim", "3",
             "--cross-count", "10", "--restarts", "2", "--seed", "5",
             "--threads", "2"]

    def test_pst_only_passes(self, capsys):
        assert main(["verify", "--n", "2", "--pst"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "verify:" in out

    def test_small_suite_passes(self, capsys):
        assert main(["verify", *self.SMALL]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_default_suite_passes_within_budget(self, capsys):
        start = time.monotonic()
        assert main(["verify"]) == 0
        assert time.monotonic() - start <= 300.0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "9 checks, 9 passed" in out

    def test_injected_convention_error_caught(self, capsys):
        assert main(["verify", *self.SMALL, "--inject-sign-error"]) == 2
        out = capsys.readouterr().out
        fails = [line for line in out.splitlines() if line.startswith("FAIL")]
        assert fails and any("cross-formulation" in line for line in fails)
        assert "(seed 5)" in out
