"""Cohort evaluation: per-subject mean log-spectral distances of speech,
excitation estimate, and model-filtered displacement against the radar
displacement; descriptive statistics and paired t-tests over the cohort."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import LsdSeries, loess_smooth, lsd_over_windows
from .signals import FramePlan, SampledSignal
from .stats import DescriptiveStats, PairedTTestResult, descriptive_stats, paired_t_test
from .transform import voicing_mask

__all__ = [
    "SubjectEvaluation",
    "evaluate_signals",
    "CohortReport",
    "build_cohort_report",
    "write_report_json",
    "write_report_csv",
    "write_window_csv",
]

COMPARISONS = ("raw_speech", "estimated_excitation", "model_filtered")


@dataclass(frozen=True)
class SubjectEvaluation:
    subject_id: str
    lsd_raw_speech: float
    lsd_estimated_excitation: float
    lsd_model_filtered: float
    n_voiced_windows: int
    series: dict


def evaluate_signals(subject_id: str, s: SampledSignal, e_hat: SampledSignal,
                     d_hat: SampledSignal, d: SampledSignal,
                     plan: FramePlan | None = None,
                     voiced_mask: np.ndarray | None = None,
                     voicing_threshold: float = 0.5) -> SubjectEvaluation:
    """Mean LSD of each candidate signal against the radar displacement over
    voiced windows. The voiced mask comes from the speech signal unless one
    is supplied (e.g. from transform diagnostics)."""
    if plan is None:
        plan = FramePlan.for_rate(s.rate_hz)
    if voiced_mask is None:
        voiced_mask = voicing_mask(s, plan, voicing_threshold)
    series = {
        "raw_speech": lsd_over_windows(s, d, plan, voiced_mask),
        "estimated_excitation": lsd_over_windows(e_hat, d, plan, voiced_mask),
        "model_filtered": lsd_over_windows(d_hat, d, plan, voiced_mask),
    }
    return SubjectEvaluation(
        subject_id=subject_id,
        lsd_raw_speech=series["raw_speech"].mean,
        lsd_estimated_excitation=series["estimated_excitation"].mean,
        lsd_model_filtered=series["model_filtered"].mean,
        n_voiced_windows=len(series["model_filtered"]),
        series=series,
    )


@dataclass(frozen=True)
class CohortReport:
    subjects: tuple
    descriptive: dict
    t_tests: dict
    skipped: tuple


def build_cohort_report(evaluations: list[SubjectEvaluation],
                        skipped: list[str] | None = None) -> CohortReport:
    """Descriptive statistics per comparison and the two paired t-tests
    (model vs raw speech, model vs estimated excitation).

    t statistics are computed on (model - other) differences, so a negative t
    means the model-filtered signal sits closer to the radar displacement.
    """
    evaluations = sorted(evaluations, key=lambda ev: ev.subject_id)
    raw = np.array([ev.lsd_raw_speech for ev in evaluations])
    exc = np.array([ev.lsd_estimated_excitation for ev in evaluations])
    mod = np.array([ev.lsd_model_filtered for ev in evaluations])
    descriptive = {}
    if len(evaluations) >= 2:
        descriptive = {
            "raw_speech": descriptive_stats(raw),
            "estimated_excitation": descriptive_stats(exc),
            "model_filtered": descriptive_stats(mod),
        }
    t_tests = {}
    if len(evaluations) >= 2:
        try:
            t_tests["raw_speech_vs_model_filtered"] = paired_t_test(mod, raw)
            t_tests["estimated_excitation_vs_model_filtered"] = paired_t_test(mod, exc)
        except ValueError:
            t_tests = {}
    return CohortReport(subjects=tuple(evaluations), descriptive=descriptive,
                        t_tests=t_tests, skipped=tuple(skipped or []))


def _stats_dict(st: DescriptiveStats) -> dict:
    return {"mean": st.mean, "n": st.n, "std": st.std, "sem": st.sem}


def _ttest_dict(tt: PairedTTestResult) -> dict:
    return {"t_stat": tt.t_stat, "n": tt.n, "std": tt.std_of_differences,
            "p_value": tt.p_value, "df": tt.df}


def report_as_dict(report: CohortReport) -> dict:
    return {
        "subjects": [
            {
                "id": ev.subject_id,
                "lsd_raw_speech": ev.lsd_raw_speech,
                "lsd_estimated_excitation": ev.lsd_estimated_excitation,
                "lsd_model_filtered": ev.lsd_model_filtered,
                "n_voiced_windows": ev.n_voiced_windows,
            }
            for ev in report.subjects
        ],
        "descriptive": {k: _stats_dict(v) for k, v in report.descriptive.items()},
        "t_tests": {k: _ttest_dict(v) for k, v in report.t_tests.items()},
        "skipped": list(report.skipped),
    }


def write_report_json(path: str | Path, report: CohortReport) -> None:
    with open(path, "w") as fh:
        json.dump(report_as_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(path: str | Path, report: CohortReport) -> None:
    """Single CSV with a `table` column carrying both summary tables."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["table", "comparison", "mean", "n", "std", "sem",
                         "t_stat", "p_value"])
        for name in COMPARISONS:
            st = report.descriptive.get(name)
            if st is None:
                continue
            writer.writerow(["descriptive", name, repr(st.mean), st.n,
                             repr(st.std), repr(st.sem), "", ""])
        for name, tt in report.t_tests.items():
            writer.writerow(["paired_t_test", name, "", tt.n,
                             repr(tt.std_of_differences), "",
                             repr(tt.t_stat), repr(tt.p_value)])


def write_window_csv(path: str | Path, series: dict, span: float = 0.3) -> None:
    """Per-window LSD curves (raw plus loess-smoothed) for plotting."""
    smoothed: dict[str, LsdSeries] = {}
    for name, ser in series.items():
        try:
            smoothed[name] = loess_smooth(ser, span)
        except ValueError:
            smoothed[name] = ser
    base = series["model_filtered"]
    index_of = {name: {int(i): k for k, i in enumerate(ser.window_indices)}
                for name, ser in series.items()}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["window_index", "time_s"]
        for name in COMPARISONS:
            header += [f"lsd_{name}", f"lsd_{name}_loess"]
        writer.writerow(header)
        for k, widx in enumerate(base.window_indices):
            row = [int(widx), repr(float(base.times_s[k]))]
            for name in COMPARISONS:
                ser = series[name]
                sm = smoothed[name]
                j = index_of[name].get(int(widx))
                if j is None:
                    row += ["", ""]
                else:
                    row += [repr(float(ser.values[j])), repr(float(sm.values[j]))]
            writer.writerow(row)
