#!/usr/bin/env python3
"""
CSV, JSON and manifest tests for artifacts.py

Also covers the seeding and thread helpers in runtime.py.
"""

import json
import math

import numpy as np
import pytest

from qal.artifacts import (
    MANIFEST_NAME,
    TRACE_HEADER,
    ManifestError,
    RunArtifacts,
    dumps_json,
    format_value,
    load_manifest,
    persist,
    read_csv,
    verify_manifest,
    write_csv,
)
from qal.config import load_config
from qal.evaluation import evaluate
from qal.hamiltonians import average_hamiltonian, spectrum
from qal.runtime import parallel_map, spawn_generators
from qal.trainer import TrainConfig, train


@pytest.fixture
def bundle(toy_problem):
    enc, scheme = toy_problem["encoder"], toy_problem["scheme"]
    trace = train(toy_problem["train"], enc, scheme, TrainConfig(eta=0.1, steps=6, seed=2))
    report = evaluate(trace.final_state, toy_problem["train"], toy_problem["test"], enc, scheme,
                      ks=(1, 3, math.inf))
    spec = spectrum(average_hamiltonian(toy_problem["train"], enc, scheme))
    return RunArtifacts(
        config=load_config().to_dict(),
        trace=trace,
        report=report,
        spectrum=spec,
        tables={"curve": (("step", "train_acc"), [(0, 0.5), (6, 0.625)])},
        summaries={"extra": {"nan": float("nan"), "enum": trace.mode}},
    )


class TestFormatting:
    def test_format_value(self):
        assert format_value(None) == ""
        assert format_value(True) == "1"
        assert format_value(np.bool_(False)) == "0"
        assert format_value(np.int64(7)) == "7"
        assert format_value(0.1) == "0.1"
        assert format_value(np.float64(1 / 3)) == repr(1 / 3)
        assert format_value("x") == "x"

    def test_json_is_sorted_and_finite(self):
        text = dumps_json({"b": 1, "a": [np.float64(math.inf), np.arange(2)]})
        assert text.endswith("\n")
        assert json.loads(text) == {"a": [None, [0, 1]], "b": 1}
        assert text.index('"a"') < text.index('"b"')

    def test_csv_lf_and_row_width(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ("a", "b"), [(1, 2.5), (None, True)])
        assert path.read_bytes() == b"a,b\n1,2.5\n,1\n"
        header, rows = read_csv(path)
        assert header == ["a", "b"] and rows == [["1", "2.5"], ["", "1"]]
        with pytest.raises(ManifestError, match="row of 1 values"):
            write_csv(tmp_path / "u.csv", ("a", "b"), [(1,)])

    def test_empty_csv(self, tmp_path):
        (tmp_path / "e.csv").write_text("")
        with pytest.raises(ManifestError):
            read_csv(tmp_path / "e.csv")


class TestPersist:
    def test_layout(self, bundle, tmp_path):
        files = persist(bundle, tmp_path)
        expected = {
            "config.json", "trace.csv", "trace.json", "report.json", "spectrum.csv",
            "spectrum.json", "curve.csv", "extra.json",
        }
        assert set(files) == expected
        assert set(load_manifest(tmp_path)) == expected
        header, rows = read_csv(tmp_path / "trace.csv")
        assert tuple(header) == TRACE_HEADER
        assert len(rows) == 6
        extra = json.loads((tmp_path / "extra.json").read_text())
        assert extra == {"enum": "exact", "nan": None}
        report = json.loads((tmp_path / "report.json").read_text())
        assert set(report["k_accuracy"]) == {"1", "3", "inf"}

    def test_same_inputs_same_bytes(self, bundle, tmp_path):
        a = persist(bundle, tmp_path / "a")
        b = persist(bundle, tmp_path / "b")
        assert a == b
        assert (tmp_path / "a" / MANIFEST_NAME).read_bytes() == (
            tmp_path / "b" / MANIFEST_NAME
        ).read_bytes()

    def test_same_seed_same_files(self, toy_problem, tmp_path):
        enc, scheme = toy_problem["encoder"], toy_problem["scheme"]
        digests = []
        for run in ("one", "two"):
            trace = train(toy_problem["train"], enc, scheme, TrainConfig(steps=5, seed=8))
            digests.append(persist(RunArtifacts(config={"seed": 8}, trace=trace), tmp_path / run))
        assert digests[0] == digests[1]

    def test_verify_detects_tampering(self, bundle, tmp_path):
        persist(bundle, tmp_path)
        assert verify_manifest(tmp_path) == []
        with open(tmp_path / "curve.csv", "a") as f:
            f.write("7,1.0\n")
        (tmp_path / "report.json").unlink()
        assert verify_manifest(tmp_path, strict=False) == ["curve.csv", "report.json"]
        with pytest.raises(ManifestError, match="content mismatch"):
            verify_manifest(tmp_path)

    def test_bad_manifest(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            load_manifest(tmp_path)
        (tmp_path / MANIFEST_NAME).write_text("{not json")
        with pytest.raises(ManifestError, match="invalid JSON"):
            load_manifest(tmp_path)
        (tmp_path / MANIFEST_NAME).write_text('{"schema_version": 2, "files": {}}')
        with pytest.raises(ManifestError, match="schema_version"):
            load_manifest(tmp_path)
        (tmp_path / MANIFEST_NAME).write_text('{"schema_version": 1, "files": []}')
        with pytest.raises(ManifestError, match="mapping"):
            load_manifest(tmp_path)


class TestRuntime:
    def test_spawned_generators_are_reproducible_and_distinct(self):
        a = [g.random() for g in spawn_generators(5, 3)]
        b = [g.random() for g in spawn_generators(5, 3)]
        assert a == b
        assert len(set(a)) == 3

    def test_parallel_map_keeps_order(self):
        assert parallel_map(lambda x: x * x, range(10), threads=4) == [x * x for x in range(10)]
        assert parallel_map(str, [1], threads=8) == ["1"]
