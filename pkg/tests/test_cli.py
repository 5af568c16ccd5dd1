import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from diffnea.cli import main
from diffnea.fixtures import arm7_path, planar2_path


BAD_URDF = """
<robot name="impossible">
  <link name="base">
    <inertial><mass value="1"/><inertia ixx="0.1" iyy="0.1" izz="0.1"/></inertial>
  </link>
  <link name="arm">
    <inertial><mass value="1"/><inertia ixx="1" iyy="1" izz="3"/></inertial>
  </link>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="arm"/>
    <axis xyz="0 0 1"/><limit lower="-1" upper="1" velocity="2"/>
  </joint>
</robot>
"""


@pytest.fixture
def runner():
    return CliRunner()


def run_generate(runner, out, duration="2.0", rate="50"):
    return runner.invoke(main, [
        "generate", "--urdf", planar2_path(), "--duration", duration,
        "--rate", rate, "--seed", "0", "--out", str(out)])


def test_generate_writes_dataset_and_manifest(runner, tmp_path):
    result = run_generate(runner, tmp_path / "d")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "d" / "train.csv").is_file()
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["command"] == "generate"
    assert "train.csv" in manifest["outputs"]
    assert manifest["config"]["duration"] == 2.0


def test_generate_missing_urdf_is_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["generate", "--urdf", "no/such/file.urdf",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "no/such/file.urdf" in result.output


def test_generate_is_byte_identical_across_reruns(runner, tmp_path):
    out = tmp_path / "a"
    run_generate(runner, out)
    first = {name: (out / name).read_bytes()
             for name in ("train.csv", "train.csv.json", "manifest.json")}
    run_generate(runner, out)  # same seed, same directory
    for name, blob in first.items():
        assert (out / name).read_bytes() == blob


def test_config_file_with_flag_override(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"urdf": planar2_path(), "duration": 2.0,
                               "rate": 50, "out": str(tmp_path / "o")}))
    result = runner.invoke(main, ["generate", "--config", str(cfg),
                                  "--duration", "1.0"])
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["duration"] == 1.0  # flag beats config file
    assert manifest["config"]["rate"] == 50


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    result = CliRunner().invoke(main, [
        "generate", "--urdf", planar2_path(), "--duration", "4.0",
        "--rate", "125", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def test_train_writes_reports(runner, tmp_path, dataset_dir):
    result = runner.invoke(main, [
        "train", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kind", "cov", "--batch-size", "128", "--epochs", "3",
        "--init-mode", "from_urdf_perturbed", "--init-sigma", "0.05",
        "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert "epochs_to_converge" in report
    assert (tmp_path / "history.csv").is_file()
    assert (tmp_path / "params.json").is_file()


def test_train_unknown_kind_is_usage_error(runner, tmp_path, dataset_dir):
    result = runner.invoke(main, [
        "train", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kind", "magic", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "nostr" in result.output  # the valid choices are listed


def test_check_consistent_fixture_passes(runner):
    result = runner.invoke(main, ["check", arm7_path()])
    assert result.exit_code == 0, result.output
    assert "INCONSISTENT" not in result.output


def test_check_impossible_inertia_fails(runner, tmp_path):
    bad = tmp_path / "bad.urdf"
    bad.write_text(BAD_URDF)
    result = runner.invoke(main, ["check", str(bad)])
    assert result.exit_code == 1
    assert "arm" in result.output and "triangle" in result.output


def test_check_params_json_route(runner, tmp_path, dataset_dir):
    train = runner.invoke(main, [
        "train", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kind", "cov", "--batch-size", "128", "--epochs", "1",
        "--out", str(tmp_path)])
    assert train.exit_code == 0, train.output
    result = runner.invoke(main, ["check", str(tmp_path / "params.json"),
                                  "--urdf", planar2_path()])
    assert result.exit_code == 0, result.output
    missing_model = runner.invoke(main, ["check", str(tmp_path / "params.json")])
    assert missing_model.exit_code == 2


def test_online_writes_curves(runner, tmp_path, dataset_dir):
    result = runner.invoke(main, [
        "online", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kinds", "cov", "--batch-size", "128", "--init-sigma", "0.05",
        "--init-mode", "from_urdf_perturbed", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "online_cov.csv").is_file()


def test_online_assert_order_malformed(runner, tmp_path, dataset_dir):
    result = runner.invoke(main, [
        "online", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kinds", "cov,nostr", "--batch-size", "128",
        "--assert-order", "covnostr", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_eval_single_kind(runner, tmp_path, dataset_dir):
    result = runner.invoke(main, [
        "eval", "--urdf", planar2_path(), "--data", str(dataset_dir / "train.csv"),
        "--kinds", "cov", "--seeds", "0", "--batch-size", "128", "--epochs", "3",
        "--init-mode", "from_urdf_perturbed", "--init-sigma", "0.05",
        "--track-duration", "2.0", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "report.csv").is_file()
    assert (tmp_path / "report.md").is_file()
    assert (tmp_path / "history_cov_seed0.csv").is_file()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert sorted(manifest["outputs"]) == manifest["outputs"]
