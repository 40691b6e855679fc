import json

import pytest
from click.testing import CliRunner

from slotworld.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


GRID_SPEC = {
    "image_size": 16,
    "grid_step": 4,
    "n_shapes": 1,
    "episode_length": 6,
    "direction_change_prob": 0.25,
}

TRAIN_SPEC = {
    "model": {"profile": "tiny"},
    "train": {
        "total_steps": 3,
        "batch_size": 2,
        "seq_len": 2,
        "n_seed": 2,
        "n_predict": 2,
        "schedule": "constant",
        "log_every": 1,
        "eval_every": 0,
        "ckpt_every": 0,
    },
}


def run(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


class TestPipelineCli:
    def test_datagen_train_eval_chain(self, workspace):
        cfg = workspace / "grid.json"
        cfg.write_text(json.dumps(GRID_SPEC))
        run(["datagen", "--config", str(cfg), "--episodes", "4", "--seed", "1", "--out", str(workspace / "data")])
        assert (workspace / "data" / "index.json").exists()

        tcfg = workspace / "train.json"
        tcfg.write_text(json.dumps(TRAIN_SPEC))
        run(["train", "--stage", "parser", "--config", str(tcfg), "--data", str(workspace / "data"),
             "--out", str(workspace / "parser_run")])
        parser_ckpt = workspace / "parser_run" / "model.ckpt"
        assert parser_ckpt.exists()

        run(["train", "--stage", "dynamics", "--config", str(tcfg), "--data", str(workspace / "data"),
             "--out", str(workspace / "dyn_run"), "--base-model", str(parser_ckpt)])
        dyn_ckpt = workspace / "dyn_run" / "model.ckpt"
        assert dyn_ckpt.exists()

        run(["eval", "predict", "--model", str(dyn_ckpt), "--data", str(workspace / "data"),
             "--out", str(workspace / "report.json"), "--seed-frames", "2", "--horizon", "2"])
        report = json.loads((workspace / "report.json").read_text())
        assert report["n_episodes"] == 4
        assert len(report["per_step_psnr"]) == 2

    def test_codebook_dump(self, workspace):
        result = run(["codebook", "dump", "--model", str(workspace / "dyn_run" / "model.ckpt")])
        payload = json.loads(result.output)
        assert payload["k"] == 3
        assert len(payload["prototypes"]) == 3

    def test_metrics_log_structure(self, workspace):
        lines = (workspace / "parser_run" / "metrics.ndjson").read_text().splitlines()
        records = [json.loads(l) for l in lines]
        assert all({"step", "stage", "wallclock"} <= set(r) for r in records)
        assert any("loss" in r and "lr" in r for r in records)
