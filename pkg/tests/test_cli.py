import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from phonoradar.cli import main


def tree_digest(root: Path) -> dict:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def run(argv):
    return main(argv)


@pytest.fixture
def small_cohort(tmp_path):
    cohort = tmp_path / "cohort"
    assert run(["synth", "--out", str(cohort), "--cohort", "3", "--seed", "9",
                "--duration", "0.8"]) == 0
    assert run(["radar", "--cohort", str(cohort)]) == 0
    assert run(["transform", "--cohort", str(cohort)]) == 0
    return cohort


class TestSynth:
    def test_single_subject_files(self, tmp_path):
        out = tmp_path / "one"
        assert run(["synth", "--out", str(out), "--f0", "140", "--duration", "0.5",
                    "--seed", "3"]) == 0
        for name in ("subject.json", "speech.wav", "vocal_fold.csv",
                     "excitation.csv", "neck_true.csv"):
            assert (out / name).exists()

    def test_seeded_cohorts_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["synth", "--out", str(out), "--cohort", "2",
                        "--seed", "7", "--duration", "0.5"]) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_cohort_count(self, tmp_path):
        out = tmp_path / "c"
        assert run(["synth", "--out", str(out), "--cohort", "4", "--seed", "1",
                    "--duration", "0.5"]) == 0
        assert len(list(out.glob("subject_*"))) == 4

    def test_low_f0_rejected_as_usage_error(self, tmp_path):
        assert run(["synth", "--out", str(tmp_path / "x"), "--f0", "50"]) == 1

    def test_bad_open_quotient(self, tmp_path):
        assert run(["synth", "--out", str(tmp_path / "x"),
                    "--open-quotient", "1.5"]) == 1


class TestRadar:
    def test_writes_measurement_and_meta(self, tmp_path):
        subj = tmp_path / "s"
        run(["synth", "--out", str(subj), "--duration", "0.5", "--seed", "2"])
        assert run(["radar", "--subject", str(subj)]) == 0
        assert (subj / "neck_radar.csv").exists()
        meta = json.loads((subj / "radar.json").read_text())
        assert meta["correlation_vs_truth"] > 0.999

    def test_missing_subject_is_data_error(self, tmp_path):
        assert run(["radar", "--subject", str(tmp_path / "nope")]) == 2


class TestTransform:
    def test_subject_mode(self, tmp_path):
        subj = tmp_path / "s"
        run(["synth", "--out", str(subj), "--duration", "0.5", "--seed", "2"])
        run(["radar", "--subject", str(subj)])
        assert run(["transform", "--subject", str(subj)]) == 0
        for name in ("e_hat.csv", "x_hat.csv", "d_hat.csv", "transform.json"):
            assert (subj / name).exists()
        meta = json.loads((subj / "transform.json").read_text())
        assert meta["n_voiced"] >= 1
        assert meta["global_tau_samples"] == 2  # 1 ms default at 2 kHz

    def test_explicit_files_and_tau_mode(self, tmp_path):
        subj = tmp_path / "s"
        run(["synth", "--out", str(subj), "--duration", "0.5", "--seed", "2"])
        out = tmp_path / "result"
        assert run(["transform", "--speech", str(subj / "speech.wav"),
                    "--displacement", str(subj / "neck_true.csv"),
                    "--out", str(out), "--tau-mode", "per-frame"]) == 0
        assert (out / "d_hat.csv").exists()

    def test_silent_input_is_data_error(self, tmp_path):
        from phonoradar.io import write_csv_signal, write_wav
        from phonoradar.signals import SampledSignal
        silent = SampledSignal(np.zeros(2000), 2000.0)
        write_wav(tmp_path / "s.wav", silent)
        write_csv_signal(tmp_path / "d.csv", silent)
        assert run(["transform", "--speech", str(tmp_path / "s.wav"),
                    "--displacement", str(tmp_path / "d.csv"),
                    "--out", str(tmp_path / "o")]) == 2

    def test_rate_mismatch_without_resample(self, tmp_path):
        from phonoradar.io import write_csv_signal, write_wav
        from phonoradar.signals import SampledSignal
        t = np.arange(8000) / 16000.0
        speech = SampledSignal(np.sin(2 * np.pi * 150 * t), 16000.0)
        disp = SampledSignal(np.sin(2 * np.pi * 150 * np.arange(1000) / 2000.0), 2000.0)
        write_wav(tmp_path / "s.wav", speech)
        write_csv_signal(tmp_path / "d.csv", disp)
        args = ["transform", "--speech", str(tmp_path / "s.wav"),
                "--displacement", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o")]
        assert run(args) == 2
        assert run(args + ["--resample"]) == 0


class TestEvaluate:
    def test_full_report(self, small_cohort):
        assert run(["evaluate", str(small_cohort)]) == 0
        report_dir = small_cohort / "report"
        report = json.loads((report_dir / "report.json").read_text())
        assert len(report["subjects"]) == 3
        assert set(report["t_tests"]) == {"raw_speech_vs_model_filtered",
                                          "estimated_excitation_vs_model_filtered"}
        assert (report_dir / "report.csv").exists()
        windows = list((report_dir / "windows").glob("subject_*.csv"))
        assert len(windows) == 3

    def test_inputs_not_mutated(self, small_cohort):
        before = tree_digest(small_cohort / "subject_000")
        run(["evaluate", str(small_cohort)])
        assert tree_digest(small_cohort / "subject_000") == before

    def test_single_subject_no_t_tests(self, tmp_path):
        cohort = tmp_path / "c1"
        run(["synth", "--out", str(cohort), "--cohort", "1", "--seed", "5",
             "--duration", "0.8"])
        run(["radar", "--cohort", str(cohort)])
        run(["transform", "--cohort", str(cohort)])
        assert run(["evaluate", str(cohort)]) == 0
        report = json.loads((cohort / "report" / "report.json").read_text())
        assert report["t_tests"] == {}
        assert report["descriptive"] == {}

    def test_empty_directory_is_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run(["evaluate", str(empty)]) == 2

    def test_incomplete_subject_skipped(self, small_cohort):
        (small_cohort / "subject_001" / "d_hat.csv").unlink()
        assert run(["evaluate", str(small_cohort), "--out",
                    str(small_cohort.parent / "r2")]) == 0
        report = json.loads((small_cohort.parent / "r2" / "report.json").read_text())
        assert report["skipped"] == ["subject_001"]
        assert len(report["subjects"]) == 2

    def test_pipeline_rerun_reproduces_report(self, tmp_path):
        digests = []
        for name in ("p1", "p2"):
            cohort = tmp_path / name
            run(["synth", "--out", str(cohort), "--cohort", "2", "--seed", "21",
                 "--duration", "0.8"])
            run(["radar", "--cohort", str(cohort)])
            run(["transform", "--cohort", str(cohort)])
            run(["evaluate", str(cohort)])
            digests.append(hashlib.sha256(
                (cohort / "report" / "report.json").read_bytes()).hexdigest())
        assert digests[0] == digests[1]


def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == 1


def test_config_file_overrides_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"f0": 200.0, "duration": 0.5, "seed": 8}))
    out = tmp_path / "subj"
    assert run(["synth", "--out", str(out), "--config", str(cfg)]) == 0
    manifest = json.loads((out / "subject.json").read_text())
    assert manifest["glottal"]["f0_hz"] == 200.0
    # explicit flags still win over the config file
    out2 = tmp_path / "subj2"
    assert run(["synth", "--out", str(out2), "--config", str(cfg),
                "--f0", "300"]) == 0
    manifest2 = json.loads((out2 / "subject.json").read_text())
    assert manifest2["glottal"]["f0_hz"] == 300.0


def test_radar_with_noise_flag(tmp_path):
    subj = tmp_path / "s"
    run(["synth", "--out", str(subj), "--duration", "1.0", "--seed", "4"])
    assert run(["radar", "--subject", str(subj), "--snr", "20"]) == 0
    meta = json.loads((subj / "radar.json").read_text())
    assert meta["snr_db"] == 20.0
    assert meta["correlation_vs_truth"] > 0.99


def test_parallel_jobs_match_serial(tmp_path):
    serial, parallel = tmp_path / "ser", tmp_path / "par"
    for out, jobs in ((serial, "1"), (parallel, "2")):
        run(["synth", "--out", str(out), "--cohort", "2", "--seed", "13",
             "--duration", "0.6", "--jobs", jobs])
        run(["radar", "--cohort", str(out), "--jobs", jobs])
        run(["transform", "--cohort", str(out), "--jobs", jobs])
        run(["evaluate", str(out), "--jobs", jobs])
    assert tree_digest(serial) == tree_digest(parallel)
