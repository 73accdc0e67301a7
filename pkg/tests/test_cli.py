import hashlib
import json
from pathlib import Path

import pytest

from tensorgen_cli.__main__ import cli
from tensorgen_cli.lib.export import csv_paths


def _digests(directory: Path):
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())
    }


class TestGenerate:
    def test_writes_dataset_and_summary(self, runner, write_config, small_config):
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config)), "--json"])
        assert result.exit_code == 0, result.stderr
        summary = json.loads(result.stdout)
        assert summary["status"] == "ok"
        assert summary["shape"] == [4, 5, 6]
        assert summary["ranks"] == [2, 2, 2]
        data = Path(small_config["output"]["path"])
        assert summary["outputs"][0] == str(data)
        assert csv_paths(data)["manifest"].exists()

    def test_table_summary(self, runner, write_config, small_config):
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config))])
        assert result.exit_code == 0, result.stderr
        assert "Generated dataset" in result.stdout
        assert "seed" in result.stdout

    def test_byte_identical_runs(self, runner, write_config, small_config, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        config = str(write_config(small_config))
        out_dir = Path(small_config["output"]["path"]).parent
        args = ["generate", "-c", config, "--seed", "42", "--overwrite"]
        assert runner.invoke(cli, args).exit_code == 0
        first = _digests(out_dir)
        assert runner.invoke(cli, args).exit_code == 0
        assert _digests(out_dir) == first

    def test_seed_override_in_manifest(self, runner, write_config, small_config):
        result = runner.invoke(
            cli, ["generate", "-c", str(write_config(small_config)), "--seed", "42"]
        )
        assert result.exit_code == 0, result.stderr
        manifest_path = csv_paths(Path(small_config["output"]["path"]))["manifest"]
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        assert manifest["seed"] == 42
        assert manifest["overrides"] == {"seed": 42}

    def test_out_selects_hdf5(self, runner, write_config, small_config, tmp_path):
        out = tmp_path / "h5" / "data.h5"
        result = runner.invoke(
            cli, ["generate", "-c", str(write_config(small_config)), "-o", str(out), "--json"]
        )
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["outputs"] == [str(out)]

    def test_validation_failure(self, runner, write_config, small_config):
        small_config["shape"] = [4, 5, 1]
        small_config["modes"] = [None, None, {"generator": {"method": "orthogonal"}}]
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config))])
        assert result.exit_code == 1
        assert "modes[2].generator.method" in result.stderr
        assert result.stdout == ""

    def test_existing_output(self, runner, write_config, small_config):
        config = str(write_config(small_config))
        assert runner.invoke(cli, ["generate", "-c", config]).exit_code == 0
        result = runner.invoke(cli, ["generate", "-c", config])
        assert result.exit_code == 2
        assert "OutputExistsError" in result.stderr

    def test_numerical_failure(self, runner, write_config, small_config):
        small_config["model"]["weights"] = {"method": "custom", "values": [0, 0]}
        small_config["effects"] = [{"kind": "tensor_awgn", "snr_db": 10}]
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config))])
        assert result.exit_code == 3
        assert "zero-norm" in result.stderr

    def test_seed_out_of_range(self, runner, write_config, small_config):
        config = str(write_config(small_config))
        result = runner.invoke(cli, ["generate", "-c", config, "--seed", str(2**64)])
        assert result.exit_code == 1

    def test_verbose_logs_timings(self, runner, write_config, small_config):
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config)), "-v"])
        assert result.exit_code == 0
        assert "Generation took" in result.stderr


class TestValidate:
    def test_ok_with_defaults(self, runner, write_config, small_config):
        result = runner.invoke(cli, ["validate", "-c", str(write_config(small_config))])
        assert result.exit_code == 0
        assert result.stdout.startswith("OK\n")
        materialised = json.loads(result.stdout[3:])
        assert materialised["modes"][0]["generator"] == {
            "method": "multi_normal",
            "mus": 0.0,
            "sigmas": 1.0,
        }

    def test_json(self, runner, write_config, small_config):
        result = runner.invoke(cli, ["validate", "-c", str(write_config(small_config)), "--json"])
        assert json.loads(result.stdout)["status"] == "ok"

    def test_epsilon_out_of_range(self, runner, write_config, small_config):
        small_config["temporal_mode"] = 2
        small_config["modes"] = [None, None, {"temporal": {"kind": "streaming", "epsilon": 1.5}}]
        result = runner.invoke(cli, ["validate", "-c", str(write_config(small_config))])
        assert result.exit_code == 1
        assert "epsilon" in result.stderr

    def test_congruence_not_positive_definite(self, runner, write_config, small_config):
        small_config["model"]["rank"] = 3
        small_config["effects"] = [{"kind": "column_congruence", "mode": 1, "c": -0.5}]
        result = runner.invoke(cli, ["validate", "-c", str(write_config(small_config))])
        assert result.exit_code == 1
        assert "positive definite" in result.stderr

    def test_nothing_written(self, runner, write_config, small_config):
        runner.invoke(cli, ["validate", "-c", str(write_config(small_config))])
        assert not Path(small_config["output"]["path"]).exists()


class TestInspect:
    @pytest.fixture
    def generated(self, runner, write_config, small_config) -> Path:
        small_config["effects"] = [{"kind": "sparsify_tensor", "fraction": 0.5}]
        result = runner.invoke(cli, ["generate", "-c", str(write_config(small_config))])
        assert result.exit_code == 0, result.stderr
        return Path(small_config["output"]["path"])

    def test_json_report(self, runner, generated):
        result = runner.invoke(cli, ["inspect", str(generated), "--json"])
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["storage"] == "sparse"
        assert report["nnz"] == 60
        assert report["density"] == pytest.approx(60 / 120)
        assert report["seed"] == 7
        assert report["model_type"] == "cp"
        assert [e["kind"] for e in report["effects"]] == ["sparsify_tensor"]

    def test_norm_matches_data(self, runner, generated):
        from tensorgen_cli.lib.export import import_dataset

        values = import_dataset(generated).tensor.values
        report = json.loads(runner.invoke(cli, ["inspect", str(generated), "--json"]).stdout)
        assert report["frobenius_norm"] == pytest.approx(float((values**2).sum() ** 0.5))

    def test_table_report(self, runner, generated):
        result = runner.invoke(cli, ["inspect", str(generated)])
        assert result.exit_code == 0
        assert "sparsify_tensor" in result.stdout

    def test_without_manifest(self, runner, generated):
        csv_paths(generated)["manifest"].unlink()
        result = runner.invoke(cli, ["inspect", str(generated), "--json"])
        assert result.exit_code == 0
        assert "No manifest" in result.stderr
        assert json.loads(result.stdout)["seed"] is None

    def test_foreign_file(self, runner, tmp_path):
        path = tmp_path / "photo.h5"
        path.write_bytes(b"\x89PNG not really")
        result = runner.invoke(cli, ["inspect", str(path)])
        assert result.exit_code == 2
        assert "DatasetFormatError" in result.stderr


class TestRecipes:
    def test_list(self, runner):
        result = runner.invoke(cli, ["recipes", "list"])
        assert result.exit_code == 0
        assert "streaming" in result.stdout

    def test_show_is_a_valid_config(self, runner, tmp_path):
        result = runner.invoke(cli, ["recipes", "show", "seasonal"])
        assert result.exit_code == 0
        config = tmp_path / "seasonal.json"
        config.write_text(result.stdout, encoding="utf-8")
        assert runner.invoke(cli, ["validate", "-c", str(config)]).exit_code == 0

    def test_show_to_file(self, runner, tmp_path):
        out = tmp_path / "recipes" / "noisy.json"
        result = runner.invoke(cli, ["recipes", "show", "noisy", "-o", str(out)])
        assert result.exit_code == 0
        assert json.loads(out.read_text(encoding="utf-8"))["seed"] == 10

    def test_unknown(self, runner):
        assert runner.invoke(cli, ["recipes", "show", "nope"]).exit_code == 1
