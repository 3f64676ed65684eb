import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from actol import ClipSequence, random_clip
from actol.cli import main

runner = CliRunner()


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def invoke(cmd, config, out):
    return runner.invoke(main, [cmd, "--config", config, "--out", str(out)])


class TestTrainCommand:
    def config(self, tmp_path):
        return write_config(
            tmp_path,
            {
                "seed": 3,
                "clip": {"synthetic": {"T": 6, "d": 4, "completion_index": 4,
                                       "tail_mode": "drift-away", "noise_sigma": 0.05}},
                "train": {"learning_rate": 0.05, "steps": 20},
            },
        )

    def test_writes_artifacts(self, tmp_path):
        out = tmp_path / "out"
        result = invoke("train", self.config(tmp_path), out)
        assert result.exit_code == 0, result.output
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "step,vlo,bb,total,lower_bound,gap"
        assert len(history) == 21
        final = json.loads((out / "final_clip.json").read_text())
        assert final["schema_version"] == 1
        clip = ClipSequence(final["timestamps"], final["embeddings"], final["language"])
        assert clip.T == 6

    def test_byte_identical_rerun(self, tmp_path):
        cfg = self.config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert invoke("train", cfg, out1).exit_code == 0
        assert invoke("train", cfg, out2).exit_code == 0
        for name in ("history.csv", "final_clip.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = self.config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        runner.invoke(main, ["train", "--config", cfg, "--out", str(out1), "--seed", "7"])
        runner.invoke(main, ["train", "--config", cfg, "--out", str(out2), "--seed", "8"])
        assert (out1 / "history.csv").read_bytes() != (out2 / "history.csv").read_bytes()

    def test_clip_from_file(self, tmp_path):
        clip = random_clip(5, 3, np.random.default_rng(0))
        clip_path = tmp_path / "clip.json"
        clip.save(clip_path)
        cfg = write_config(tmp_path, {"clip": {"file": str(clip_path)},
                                      "train": {"steps": 5}})
        result = invoke("train", cfg, tmp_path / "out")
        assert result.exit_code == 0, result.output

    def test_missing_clip_section(self, tmp_path):
        cfg = write_config(tmp_path, {"train": {"steps": 5}})
        assert invoke("train", cfg, tmp_path / "out").exit_code == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert invoke("train", str(path), tmp_path / "out").exit_code == 2

    def test_bad_train_field(self, tmp_path):
        cfg = write_config(tmp_path, {"clip": {"synthetic": {"T": 4, "d": 3,
                                                             "completion_index": 4}},
                                      "train": {"steps": -1}})
        assert invoke("train", cfg, tmp_path / "out").exit_code == 2


class TestVerifyCommand:
    def test_all_checks_pass(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {
                "seed": 0,
                "checks": ["lower-bound", "tightness", "lipschitz", "robustness",
                           "bridge-stats"],
                "lower_bound": {"clips": 100},
                "lipschitz": {"trials": 500},
                "robustness": {"trials": 500},
                "bridge_stats": {"samples": 2000},
            },
        )
        out = tmp_path / "out"
        result = invoke("verify", cfg, out)
        assert result.exit_code == 0, result.output
        data = json.loads((out / "theorem_reports.json").read_text())
        assert len(data["reports"]) == 5
        assert all(r["passed"] for r in data["reports"])

    def test_negative_control_fails(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {
                "seed": 0,
                "checks": ["bridge-stats"],
                "bridge_stats": {"samples": 2000},
                "debug_flip_bb_variance_sign": True,
            },
        )
        out = tmp_path / "out"
        result = invoke("verify", cfg, out)
        assert result.exit_code == 1
        data = json.loads((out / "theorem_reports.json").read_text())
        assert not data["reports"][0]["passed"]

    def test_empty_checks_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"checks": []})
        assert invoke("verify", cfg, tmp_path / "out").exit_code == 2

    def test_unknown_check_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"checks": ["teleportation"]})
        assert invoke("verify", cfg, tmp_path / "out").exit_code == 2


class TestRewardCommand:
    def config(self, tmp_path):
        return write_config(
            tmp_path,
            {
                "seed": 0,
                "synthetic": {"T": 6, "d": 4, "completion_index": 3,
                              "tail_mode": "drift-away", "noise_sigma": 0.05},
                "objectives": ["actol", "last-frame"],
                "train": {"learning_rate": 0.05, "steps": 10, "temperature": 0.5},
                "seeds": 2,
            },
        )

    def test_writes_curves_and_comparison(self, tmp_path):
        out = tmp_path / "out"
        result = invoke("reward", self.config(tmp_path), out)
        assert result.exit_code == 0, result.output
        for obj in ("actol", "last-frame"):
            for seed in (0, 1):
                lines = (out / f"reward_{obj}_seed{seed}.csv").read_text().splitlines()
                assert lines[0] == "frame_index,timestamp,raw_reward,normalized_reward"
                assert len(lines) == 7
        comp = json.loads((out / "comparison.json").read_text())
        assert comp["completion_index"] == 3
        assert set(comp["median_error"]) == {"actol", "last-frame"}
        assert len(comp["per_seed"]) == 2

    def test_byte_identical_rerun(self, tmp_path):
        cfg = self.config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert invoke("reward", cfg, out1).exit_code == 0
        assert invoke("reward", cfg, out2).exit_code == 0
        for p in sorted(Path(out1).iterdir()):
            assert p.read_bytes() == (out2 / p.name).read_bytes()

    def test_unknown_objective(self, tmp_path):
        cfg = write_config(tmp_path, {"synthetic": {"T": 4, "d": 3, "completion_index": 2},
                                      "objectives": ["mystery"]})
        assert invoke("reward", cfg, tmp_path / "out").exit_code == 2


class TestGradcheckCommand:
    def test_passes_on_defaults(self, tmp_path):
        cfg = write_config(tmp_path, {"seed": 1, "clips": 3, "T": 5, "d": 4})
        out = tmp_path / "out"
        result = invoke("gradcheck", cfg, out)
        assert result.exit_code == 0, result.output
        data = json.loads((out / "gradcheck.json").read_text())
        assert set(data["max_relative_error"]) == {"vlo", "bb", "total"}
        assert all(v < 1e-5 for v in data["max_relative_error"].values())

    def test_unknown_loss_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"losses": ["vlo", "entropy"]})
        assert invoke("gradcheck", cfg, tmp_path / "out").exit_code == 2
