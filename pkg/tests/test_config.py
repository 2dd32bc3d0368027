#!/usr/bin/env python3
"""
Parser tests for config.py
"""

import json
import math
from pathlib import Path

import pytest
import yaml

from qal.config import (
    RECIPES,
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if name.endswith(".yaml") else json.dumps(data))
    return path


class TestRecipes:
    @pytest.mark.parametrize("recipe", sorted(RECIPES))
    def test_every_recipe_resolves(self, recipe):
        cfg = load_config(recipe=recipe)
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.recipe == recipe
        assert cfg.out_dir == f"runs/{recipe}"

    def test_defaults(self):
        cfg = load_config()
        assert cfg.recipe == "toy"
        assert cfg.encoder.n_qubits == 3
        assert cfg.eval.ks == (1, 3, math.inf)
        assert cfg.majority.copies == 0
        assert cfg.threads == 0

    def test_noise_recipe(self):
        cfg = load_config(recipe="fashion-mnist-5q-noise")
        assert cfg.encoder.n_qubits == 5
        assert cfg.dataset.side == 5
        assert cfg.noise.rates == (0.0, 0.001, 0.005, 0.01)
        assert cfg.train.eta == 0.2

    def test_unknown_recipe(self):
        with pytest.raises(ConfigError, match="unknown recipe"):
            load_config(recipe="cifar")

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_config_files(self, path):
        cfg = load_config(path)
        assert cfg.recipe == path.stem


class TestLayering:
    def test_file_overrides_recipe_section_by_section(self, tmp_path):
        path = _write(tmp_path, {"recipe": "fashion-mnist-10q", "train": {"steps": 5}})
        cfg = load_config(path)
        assert cfg.train.steps == 5
        assert cfg.train.eta == 0.1
        assert cfg.dataset.classes == (1, 9)

    def test_recipe_argument_wins(self, tmp_path):
        path = _write(tmp_path, {"recipe": "mnist-10q"})
        assert load_config(path, recipe="toy").recipe == "toy"

    def test_overrides_applied_last(self, tmp_path):
        path = _write(tmp_path, {"seed": 1, "threads": 2})
        cfg = load_config(path, overrides={"seed": 9, "threads": None, "out_dir": "x"})
        assert cfg.seed == 9
        assert cfg.threads == 2
        assert cfg.out_dir == "x"

    def test_json_file(self, tmp_path):
        path = _write(tmp_path, {"seed": 4, "eval": {"ks": [1, "inf"]}}, name="cfg.json")
        cfg = load_config(path)
        assert cfg.seed == 4
        assert cfg.eval.ks == (1, math.inf)

    def test_to_dict_round_trip(self):
        cfg = load_config(recipe="cluster-ising-10q", overrides={"seed": 3})
        data = cfg.to_dict()
        assert data["schema_version"] == 1
        assert data["eval"]["ks"][-1] == "inf"
        assert parse_config(data) == cfg


class TestValidation:
    @pytest.mark.parametrize("data, message", [
        ({"colour": 1}, "config: unknown keys colour"),
        ({"train": {"lr": 0.1}}, "train: unknown keys lr"),
        ({"train": {"eta": 0.0}}, "train.eta"),
        ({"train": {"eta": 1.5}}, "train.eta"),
        ({"train": {"steps": -1}}, "train.steps"),
        ({"train": {"steps": 2.5}}, "train.steps"),
        ({"train": {"mode": "adiabatic"}}, "train.mode"),
        ({"train": {"init": "maximally_mixed"}}, "requires mode oracle"),
        ({"train": {"continue_on_reject": "yes"}}, "train.continue_on_reject"),
        ({"eval": {"ks": [2]}}, "odd K"),
        ({"eval": {"ks": [0]}}, "eval.ks"),
        ({"majority": {"copies": 4}}, "majority.copies"),
        ({"noise": {"rates": [1.2]}}, "noise.rates"),
        ({"noise": {"convention": "amplitude"}}, "noise.convention"),
        ({"dataset": {"classes": [1, 1]}}, "dataset.classes"),
        ({"dataset": {"h_range": [2.0, 0.0]}}, "dataset.h_range"),
        ({"encoder": {"label_qubits": []}}, "encoder.label_qubits"),
        ({"tradeoff": {"betas": []}}, "tradeoff.betas"),
        ({"reuse": {"tau": 0.0}}, "reuse.tau"),
        ({"spectrum": {"grid_points": 1}}, "spectrum.grid_points"),
        ({"schema_version": 2}, "schema_version"),
        ({"seed": -1}, "seed"),
        ({"out_dir": ""}, "out_dir"),
    ])
    def test_invalid(self, data, message):
        with pytest.raises(ConfigError, match=message):
            parse_config(data)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Failed to load config"):
            load_config(tmp_path / "missing.yaml")

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("train: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path)

    def test_config_error_is_value_error(self):
        assert issubclass(ConfigError, ValueError)
