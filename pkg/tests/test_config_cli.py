"""Scene-config parsing and the command-line interface (run in process)."""

import os

import numpy as np
import pytest

from dinobot import ConfigError, SceneSpec, load_scene_spec, parse_scene_text
from dinobot.cli import main
from dinobot.config import demo_from_spec
from dinobot.errors import BufferIOError
from dinobot.persistence import encode_record_blob, write_feature_bundle

FAST_SCENE = """
# noiseless planar scene small enough for CLI tests
object_points = 96
object_radius = 0.07
depth_noise = 0
dropout = 0
threshold = 1e-4
trials = 1
"""


class TestSceneText:
    def test_empty_text_gives_defaults(self):
        assert parse_scene_text("") == SceneSpec()

    def test_overrides_each_kind(self):
        spec = parse_scene_text(
            "object_points = 96\n"
            "object_radius = 0.07\n"
            "planar = false\n"
            "mode = 6dof\n"
            "class_label = plate\n"
        )
        assert spec.object_points == 96
        assert spec.object_radius == 0.07
        assert spec.planar is False
        assert spec.mode == "6dof"
        assert spec.class_label == "plate"

    def test_comments_and_blanks_skipped(self):
        spec = parse_scene_text(
            "\n# full-line comment\n"
            "object_points = 32  # trailing comment\n"
            "   \n"
        )
        assert spec.object_points == 32

    def test_bool_spellings(self):
        assert parse_scene_text("planar = off").planar is False
        assert parse_scene_text("planar = Yes").planar is True
        assert parse_scene_text("planar = 1").planar is True

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_scene_text("object_pints = 5")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            parse_scene_text("object_points = four")
        with pytest.raises(ConfigError, match="bad value"):
            parse_scene_text("planar = maybe")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_scene_text("object_points 5")

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError, match="mode"):
            parse_scene_text("mode = 5dof")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scene.cfg"
        path.write_text("object_points = 48\n")
        assert load_scene_spec(str(path)).object_points == 48

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_scene_spec(str(tmp_path / "absent.cfg"))


@pytest.fixture
def scene_cfg(tmp_path):
    path = tmp_path / "scene.cfg"
    path.write_text(FAST_SCENE)
    return str(path)


@pytest.fixture
def buffer_dir(tmp_path, scene_cfg):
    path = str(tmp_path / "buffer")
    code = main(["buffer", "add", "--buffer", path, "--id", "demo-0",
                 "--scene", scene_cfg])
    assert code == 0
    return path


class TestCli:
    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 2

    def test_missing_buffer_is_domain_error(self, capsys, monkeypatch):
        monkeypatch.delenv("DINOBOT_BUFFER", raising=False)
        code = main(["buffer", "list"])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("error: Config")

    def test_unreadable_buffer_reports_io_error(self, capsys, tmp_path):
        code = main(["buffer", "list", "--buffer", str(tmp_path / "none")])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("error: ")

    def test_buffer_add_and_list(self, capsys, buffer_dir):
        code = main(["buffer", "list", "--buffer", buffer_dir])
        captured = capsys.readouterr()
        assert code == 0
        lines = [l for l in captured.out.splitlines() if l.startswith("demo-0")]
        assert len(lines) == 1
        assert "grasp" in lines[0]

    def test_buffer_env_variable(self, capsys, buffer_dir, monkeypatch):
        monkeypatch.setenv("DINOBOT_BUFFER", buffer_dir)
        code = main(["buffer", "list"])
        captured = capsys.readouterr()
        assert code == 0
        assert "demo-0" in captured.out

    def test_duplicate_add_is_domain_error(self, capsys, buffer_dir, scene_cfg):
        code = main(["buffer", "add", "--buffer", buffer_dir, "--id", "demo-0",
                     "--scene", scene_cfg])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("error: ")

    def test_retrieve_ranks_stored_demo(self, capsys, buffer_dir, tmp_path,
                                        scene_cfg):
        spec = load_scene_spec(scene_cfg)
        record = demo_from_spec(spec, "query").record
        features = tmp_path / "live.dfea"
        write_feature_bundle(record.bottleneck_features, features)
        capsys.readouterr()  # drop fixture output
        code = main(["retrieve", "--buffer", buffer_dir, "--features",
                     str(features), "--task", "grasp"])
        captured = capsys.readouterr()
        assert code == 0
        first = captured.out.splitlines()[0].split()
        assert first[0] == "demo-0"
        assert float(first[1]) > 0.9

    def test_match_output_and_determinism(self, capsys, tmp_path, scene_cfg):
        spec = load_scene_spec(scene_cfg)
        record = demo_from_spec(spec, "m").record
        fa = tmp_path / "a.dfea"
        fb = tmp_path / "b.dfea"
        write_feature_bundle(record.bottleneck_features, fa)
        write_feature_bundle(record.bottleneck_features, fb)
        argv = ["match", "--a", str(fa), "--b", str(fb),
                "--min-similarity", "0.5"]
        assert main(argv) == 0
        out_a = capsys.readouterr().out
        assert main(argv) == 0
        out_b = capsys.readouterr().out
        assert out_a == out_b
        lines = out_a.splitlines()
        n = int(lines[0].split()[1])
        assert lines[0].startswith("pairs ")
        assert len(lines) == n + 1
        # self match: every pair relates a cell to itself at similarity 1
        row = lines[1].split()
        assert row[0] == row[1]
        assert float(row[-1]) == pytest.approx(1.0, abs=1e-5)

    def test_match_viz_writes_ppm(self, capsys, tmp_path, scene_cfg):
        spec = load_scene_spec(scene_cfg)
        record = demo_from_spec(spec, "m").record
        fa = tmp_path / "a.dfea"
        write_feature_bundle(record.bottleneck_features, fa)
        viz = tmp_path / "viz.ppm"
        code = main(["match", "--a", str(fa), "--b", str(fa),
                     "--min-similarity", "0.5", "--viz", str(viz)])
        capsys.readouterr()
        assert code == 0
        blob = viz.read_bytes()
        assert blob.startswith(b"P6\n456 224\n255\n")
        assert len(blob) == len(b"P6\n456 224\n255\n") + 456 * 224 * 3

    def test_align_between_blobs(self, capsys, tmp_path, scene_cfg):
        spec = load_scene_spec(scene_cfg)
        live = tmp_path / "live.demo"
        goal = tmp_path / "goal.demo"
        record = demo_from_spec(spec, "d").record
        blob = encode_record_blob(record)
        live.write_bytes(blob)
        goal.write_bytes(blob)
        code = main(["align", "--live", str(live), "--goal", str(goal),
                     "--min-similarity", "0.5"])
        captured = capsys.readouterr()
        assert code == 0
        lines = captured.out.splitlines()
        values = [float(v) for v in lines[0].split()]
        assert len(values) == 12
        # identical views solve to the identity
        assert np.allclose(values[:9], np.eye(3).reshape(-1), atol=1e-6)
        assert np.allclose(values[9:], 0.0, atol=1e-9)
        assert lines[1].startswith("residual ")

    def test_run_trial_csv(self, capsys, buffer_dir, tmp_path, scene_cfg):
        csv_path = tmp_path / "run.csv"
        code = main(["run", "--buffer", buffer_dir, "--scene", scene_cfg,
                     "--seed", "3", "--csv", str(csv_path)])
        captured = capsys.readouterr()
        assert code == 0
        assert "converged" in captured.out
        assert "retrieved=demo-0" in captured.out
        assert "final-error" in captured.out
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "iter,residual,tx,ty,tz,yaw_err_deg"
        assert len(lines) >= 2
        first = lines[1].split(",")
        assert first[0] == "1"
        assert len(first) == 6
        float(first[1])

    def test_run_csv_to_stdout(self, capsys, buffer_dir, scene_cfg):
        code = main(["run", "--buffer", buffer_dir, "--scene", scene_cfg,
                     "--seed", "3", "--csv", "-"])
        captured = capsys.readouterr()
        assert code == 0
        assert "iter,residual,tx,ty,tz,yaw_err_deg" in captured.out

    def test_bench_alignment(self, capsys):
        code = main(["bench", "alignment", "--pairs", "4", "--seed", "2"])
        captured = capsys.readouterr()
        assert code == 0
        lines = captured.out.splitlines()
        assert lines[0] == "pairs 4"
        stats = dict(l.split() for l in lines[1:])
        assert float(stats["median_translation_m"]) < 1e-6

    def test_bench_suite(self, capsys, tmp_path, scene_cfg):
        code = main(["bench", "suite", "--scene", scene_cfg, "--objects", "2",
                     "--trials", "1", "--seed", "3", "--csv", "-"])
        captured = capsys.readouterr()
        assert code == 0
        assert "object,class,trials,successes,rate" in captured.out
        assert "rate 2/2 1.0000" in captured.out

    def test_bench_retrieval(self, capsys, scene_cfg):
        code = main(["bench", "retrieval", "--scene", scene_cfg,
                     "--classes", "2", "--per-class", "2",
                     "--queries-per-class", "2", "--seed", "1"])
        captured = capsys.readouterr()
        assert code == 0
        assert "accuracy 1.0000 (4 queries)" in captured.out
