import json
from pathlib import Path

import numpy as np
import pytest

from satdehaze.archive import save_generator_checkpoint
from satdehaze.cli import run
from satdehaze.generator import GeneratorSpec, build_generator
from satdehaze.imaging import save_image

from conftest import random_unit_image


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def gen_checkpoint(tmp_path):
    net = build_generator(GeneratorSpec(8, 1), 2)
    path = tmp_path / "gen.sdnt"
    save_generator_checkpoint(path, net, init_seed=2)
    return path


class TestUsage:
    def test_no_command_is_usage_error(self, capsys):
        assert run([]) == 1

    def test_unknown_command(self):
        assert run(["transmogrify"]) == 1

    @pytest.mark.parametrize("cmd", ["synthesize", "train", "infer", "eval", "explain"])
    def test_help_exits_zero(self, cmd, capsys):
        assert run([cmd, "--help"]) == 0
        out = capsys.readouterr().out
        assert "--" in out

    def test_top_level_help(self, capsys):
        assert run(["--help"]) == 0

    def test_missing_required_flag(self):
        assert run(["synthesize", "--n", "4"]) == 1


class TestSynthesize:
    def test_deterministic_reruns(self, tmp_path, capsys):
        args = ["synthesize", "--n", "4", "--seed", "7", "--size", "24"]
        assert run(args + ["--out", str(tmp_path / "a")]) == 0
        assert run(args + ["--out", str(tmp_path / "b")]) == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
        out = capsys.readouterr().out
        assert "resolved config" in out

    def test_severity_list(self, tmp_path):
        assert run([
            "synthesize", "--out", str(tmp_path / "s"), "--n", "2",
            "--severity", "thin,thick", "--seed", "1", "--size", "24",
        ]) == 0
        kinds = [
            json.loads((tmp_path / "s" / "params" / f"{i:05d}.json").read_text())["severity"]
            for i in range(2)
        ]
        assert kinds == ["thin", "thick"]

    def test_bad_severity_is_runtime_error(self, tmp_path):
        assert run([
            "synthesize", "--out", str(tmp_path / "x"), "--n", "1",
            "--severity", "foggy",
        ]) == 2


class TestEval:
    def test_identical_dirs_hit_maxima(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        d = tmp_path / "imgs"
        d.mkdir()
        for i in range(2):
            save_image(random_unit_image(rng, 48, 48), d / f"i{i}.png")
        report_path = tmp_path / "report.json"
        code = run(["eval", "--pred", str(d), "--gt", str(d), "--report", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["mean_psnr"] == 100.0
        assert report["mean_ssim"] == 1.0
        assert report["mean_fsim"] == 1.0
        assert "PSNR" in capsys.readouterr().out

    def test_unpaired_is_runtime_error(self, tmp_path):
        rng = np.random.default_rng(0)
        (tmp_path / "pred").mkdir()
        (tmp_path / "gt").mkdir()
        save_image(random_unit_image(rng, 48, 48), tmp_path / "pred" / "x.png")
        assert run([
            "eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
            "--report", str(tmp_path / "r.json"),
        ]) == 2


class TestInfer:
    def test_round_trip(self, tmp_path, gen_checkpoint):
        rng = np.random.default_rng(1)
        src = tmp_path / "in"
        src.mkdir()
        for i in range(2):
            save_image(random_unit_image(rng, 48, 48), src / f"im{i}.png")
        out = tmp_path / "out"
        assert run(["infer", "--gen", str(gen_checkpoint), "--in", str(src),
                    "--out", str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == ["im0.png", "im1.png"]

    def test_indivisible_size_is_runtime_error(self, tmp_path, gen_checkpoint, capsys):
        rng = np.random.default_rng(1)
        src = tmp_path / "in"
        src.mkdir()
        save_image(random_unit_image(rng, 250, 250), src / "odd.png")
        code = run(["infer", "--gen", str(gen_checkpoint), "--in", str(src),
                    "--out", str(tmp_path / "out")])
        assert code == 2
        assert "multiples of 4" in capsys.readouterr().err

    def test_missing_checkpoint(self, tmp_path):
        assert run(["infer", "--gen", str(tmp_path / "none.sdnt"),
                    "--in", str(tmp_path), "--out", str(tmp_path / "o")]) == 2


class TestExplain:
    def test_writes_triptych_and_sidecar(self, tmp_path, gen_checkpoint):
        rng = np.random.default_rng(2)
        img = tmp_path / "scene.png"
        save_image(random_unit_image(rng, 48, 48), img)
        out = tmp_path / "cam"
        assert run(["explain", "--gen", str(gen_checkpoint), "--in", str(img),
                    "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "scene_dehazed.png", "scene_gradcam.json", "scene_heatmap.png",
            "scene_overlay.png",
        ]
        sidecar = json.loads((out / "scene_gradcam.json").read_text())
        assert sidecar["target_layer"] == "fuse"
        assert sidecar["target_kind"] == "residual_magnitude"
        assert set(sidecar["alpha_stats"]) == {"count", "mean", "std", "min", "max"}

    def test_unknown_layer_is_runtime_error(self, tmp_path, gen_checkpoint):
        rng = np.random.default_rng(2)
        img = tmp_path / "scene.png"
        save_image(random_unit_image(rng, 48, 48), img)
        assert run(["explain", "--gen", str(gen_checkpoint), "--in", str(img),
                    "--layer", "nope", "--out", str(tmp_path / "cam")]) == 2


class TestTrain:
    def _config(self, tmp_path, **extra):
        data_dir = tmp_path / "data"
        run(["synthesize", "--out", str(data_dir), "--n", "2", "--seed", "3",
             "--size", "48"])
        cfg = {
            "data_dir": str(data_dir),
            "out_dir": str(tmp_path / "run"),
            "seed": 3,
            "epochs": 1,
            "resize": "bicubic-48",
            "base_channels": 8,
            "num_inception_blocks": 1,
            "disc_base_channels": 8,
        }
        cfg.update(extra)
        path = tmp_path / "train.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_end_to_end(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert run(["train", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "resolved config" in out
        assert (tmp_path / "run" / "losses.jsonl").exists()
        assert (tmp_path / "run" / "generator_final.sdnt").exists()

    def test_set_override_applies(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert run(["train", "--config", str(cfg), "--set", "epochs=1",
                    "--set", "lambda_l1=50"]) == 0
        assert '"lambda_l1": 50' in capsys.readouterr().out

    def test_unknown_key_rejected(self, tmp_path):
        cfg = self._config(tmp_path)
        assert run(["train", "--config", str(cfg), "--set", "warp_speed=9"]) == 1

    def test_missing_data_dir_key(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"epochs": 1}))
        assert run(["train", "--config", str(path)]) == 1
