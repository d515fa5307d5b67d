import itertools
import subprocess
import sys

import pytest

from hotspot import cli, config, formats

STAGES = ("generate", "impute", "analyze", "forecast", "report")


def run_pipeline(root, *extra):
    for cmd in STAGES:
        assert cli.main([cmd, "--config", "tiny", "--out", str(root), *extra]) == 0, cmd


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    run_pipeline(root)
    return root


def test_pipeline_outputs(tiny_run):
    expected = [
        "dataset/telemetry.csv", "dataset/ground_truth.json", "dataset/run.json",
        "imputed/autoencoder.bin", "imputed/loss_trace.tsv", "imputed/loss_trace.svg",
        "analysis/weekly_patterns.tsv", "analysis/weekly_patterns.svg", "analysis/spatial_max-top.svg",
        "forecast/results.jsonl", "forecast/skipped.jsonl", "forecast/importance_be-hot_h7_w7.tsv",
        "report/lift_by_h_be-hot.tsv", "report/lift_by_h_be-hot.svg", "report/stability_summary.tsv",
        "report/importance_be-hot_h7_w7.svg", "report/importance_by_channel_be-hot_h7_w7.tsv",
    ]
    missing = [p for p in expected if not (tiny_run / p).exists()]
    assert not missing


def test_one_record_per_cell(tiny_run):
    grid = config.load_config("tiny").grid
    records = formats.read_jsonl(tiny_run / "forecast/results.jsonl")
    skipped = formats.read_jsonl(tiny_run / "forecast/skipped.jsonl")
    keys = [(r["target"], r["model"], r["t"], r["h"], r["w"]) for r in records + skipped]
    assert len(keys) == len(set(keys))
    full = set(itertools.product(grid.targets, grid.models, grid.t_values, grid.h_values, grid.w_values))
    assert set(keys) == full
    assert records and all(r["runtime_ms"] is None for r in records)
    assert all(0.0 <= r["psi"] <= 1.0 for r in records)


def test_svg_embeds_data(tiny_run):
    svg = (tiny_run / "report/lift_by_h_be-hot.svg").read_text()
    assert "<!-- data\nmodel\th\tmean" in svg
    assert "<dc:date>" not in svg


def test_rerun_with_threads_is_byte_identical(tiny_run, tmp_path):
    run_pipeline(tmp_path, "--threads", "3")
    a = sorted(p.relative_to(tiny_run) for p in tiny_run.rglob("*") if p.is_file())
    b = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*") if p.is_file())
    assert a == b
    differ = [str(p) for p in a if (tiny_run / p).read_bytes() != (tmp_path / p).read_bytes()]
    assert differ == []


def test_record_timing(tiny_run, tmp_path):
    import shutil

    shutil.copytree(tiny_run / "imputed", tmp_path / "imputed")
    assert cli.main(["forecast", "--config", "tiny", "--out", str(tmp_path), "--record-timing"]) == 0
    records = formats.read_jsonl(tmp_path / "forecast/results.jsonl")
    assert all(r["runtime_ms"] >= 0 for r in records)


def test_missing_upstream_is_data_error(tmp_path, capsys):
    assert cli.main(["forecast", "--config", "tiny", "--out", str(tmp_path)]) == cli.EXIT_DATA
    assert "run the upstream command" in capsys.readouterr().err


def test_corrupt_input_is_data_error(tiny_run, tmp_path):
    import shutil

    shutil.copytree(tiny_run / "dataset", tmp_path / "dataset")
    (tmp_path / "dataset/dataset.json").write_text("{not json")
    assert cli.main(["impute", "--config", "tiny", "--out", str(tmp_path)]) == cli.EXIT_DATA


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid:\n  modelz: [Tree]\n")
    assert cli.main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["generate", "--config", "tiny", "--threads", "0", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["generate", "--config", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_seed_override_changes_data(tiny_run, tmp_path):
    assert cli.main(["generate", "--config", "tiny", "--out", str(tmp_path), "--seed", "8"]) == 0
    assert (tmp_path / "dataset/telemetry.csv").read_bytes() != (tiny_run / "dataset/telemetry.csv").read_bytes()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "hotspot.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "forecast" in out.stdout
