"""Run orchestration: config handling, loop mechanics, determinism,
checkpoint resume, CLI exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from currmask.cli import main as cli_main
from currmask.runner import (
    ArtifactError,
    ConfigError,
    RunConfig,
    config_from_dict,
    config_hash,
    dump_config,
    derive_seed,
    gen_data,
    load_config,
    parse_method,
    read_eval_csv,
    report,
    run_eval,
    run_pretraining,
)


def small_run_tree(dataset_dir: Path, out_dir: Path, method="currmask", seed=3, steps=120):
    return {
        "method": method,
        "out_dir": str(out_dir),
        "seed": seed,
        "data": {"train": str(dataset_dir / "train"), "val": str(dataset_dir / "val")},
        "pool": {"ratios": [0.15, 0.55, 0.95], "blocks": [1, 2, 4, 8]},
        "model": {"hidden": 32, "encoder_layers": 1, "decoder_layers": 1,
                  "heads": 2, "context_tokens": 16},
        "train": {"steps": steps, "batch_size": 8, "checkpoint_every": 60},
        "scheduler": {"interval": 60, "samples": 2},
        "eval": {"episodes": 3, "prompt_len": 4, "rollout": 20,
                 "goal_steps": [20, 40], "goal_budget": 50},
    }


def strip_wallclock(csv_text: str) -> str:
    lines = []
    for ln in csv_text.splitlines():
        if ln.startswith("#") or ln.startswith("step,"):
            lines.append(ln)
            continue
        parts = ln.split(",")
        parts[1] = "WALLCLOCK"
        lines.append(",".join(parts))
    return "\n".join(lines)


def strip_jsonl_wallclock(text: str) -> list[dict]:
    rows = []
    for ln in text.splitlines():
        obj = json.loads(ln)
        obj.pop("wallclock", None)
        rows.append(obj)
    return rows


class TestConfig:
    def test_defaults_round_trip(self):
        config = RunConfig()
        dumped = yaml.safe_load(dump_config(config))
        assert config_from_dict(dumped) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"methodd": "mixed"})
        with pytest.raises(ConfigError):
            config_from_dict({"train": {"stepss": 10}})

    def test_method_parsing(self):
        assert parse_method("currmask") == ("currmask", None)
        assert parse_method("fixed(7)") == ("fixed", 7)
        with pytest.raises(ConfigError):
            parse_method("ucb")
        with pytest.raises(ConfigError):
            parse_method("fixed(x)")

    def test_block_exceeding_context_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"pool": {"blocks": [1, 40]}})

    def test_hash_changes_with_config(self):
        a = config_from_dict({"seed": 1})
        b = config_from_dict({"seed": 2})
        assert config_hash(a) != config_hash(b)
        assert config_hash(a) == config_hash(config_from_dict({"seed": 1}))

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_derive_seed_stable(self):
        assert derive_seed(3, "sampler") == derive_seed(3, "sampler")
        assert derive_seed(3, "sampler") != derive_seed(3, "mask")
        assert derive_seed(3, "sampler") != derive_seed(4, "sampler")


class TestPretrainLoop:
    def test_interval_count_and_metrics_rows(self, small_dataset_dir, tmp_path):
        config = config_from_dict(
            small_run_tree(small_dataset_dir, tmp_path / "run", steps=120)
        )
        artifacts = run_pretraining(config)
        assert artifacts.completed_steps == 120
        lines = artifacts.metrics_csv.read_text().splitlines()
        rows = [ln for ln in lines if not ln.startswith("#") and not ln.startswith("step,")]
        assert len(rows) == 2  # steps 60 and 120
        assert rows[0].split(",")[0] == "60"
        assert rows[1].split(",")[0] == "120"
        header = lines[1].split(",")
        assert header[:9] == [
            "step", "wallclock", "arm_index", "ratio", "block",
            "raw_reward", "scaled_reward", "loss_before", "loss_after",
        ]
        assert sum(1 for h in header if h.startswith("p_")) == 12

    def test_rerun_byte_identical_minus_wallclock(self, small_dataset_dir, tmp_path):
        texts = []
        jsonls = []
        for name in ("r1", "r2"):
            tree = small_run_tree(small_dataset_dir, tmp_path / name, steps=120)
            artifacts = run_pretraining(config_from_dict(tree))
            text = artifacts.metrics_csv.read_text()
            # out_dir differs between the two runs; normalize it out of the hash
            text = text.replace(name, "RUN")
            texts.append(strip_wallclock(text))
            jsonls.append(strip_jsonl_wallclock(artifacts.metrics_jsonl.read_text()))
        assert texts[0] != texts[1]  # config hash differs via out_dir
        body = lambda t: "\n".join(t.splitlines()[1:])
        assert body(texts[0]) == body(texts[1])
        assert jsonls[0][1:] == jsonls[1][1:]

    def test_full_exploration_currmask_equals_mixed_arms(self, small_dataset_dir, tmp_path):
        tree_cm = small_run_tree(small_dataset_dir, tmp_path / "cm", steps=180)
        tree_cm["scheduler"]["epsilon"] = 1.0
        tree_mx = small_run_tree(small_dataset_dir, tmp_path / "mx", method="mixed", steps=180)
        arms = {}
        for name, tree in (("cm", tree_cm), ("mx", tree_mx)):
            artifacts = run_pretraining(config_from_dict(tree))
            rows = [
                ln.split(",")
                for ln in artifacts.metrics_csv.read_text().splitlines()
                if not ln.startswith("#") and not ln.startswith("step,")
            ]
            arms[name] = [int(r[2]) for r in rows]
        assert arms["cm"] == arms["mx"]

    def test_resume_matches_uninterrupted(self, small_dataset_dir, tmp_path):
        tree_a = small_run_tree(small_dataset_dir, tmp_path / "full", steps=240)
        full = run_pretraining(config_from_dict(tree_a))

        tree_b = small_run_tree(small_dataset_dir, tmp_path / "split", steps=240)
        config_b = config_from_dict(tree_b)
        partial = run_pretraining(config_b, stop_after=150)
        assert partial.completed_steps == 150
        resumed = run_pretraining(config_b, resume=True)
        assert resumed.completed_steps == 240

        normalize = lambda a, t: strip_wallclock(t.replace(a, "RUN"))
        body = lambda t: "\n".join(t.splitlines()[2:])
        assert body(normalize("full", full.metrics_csv.read_text())) == body(
            normalize("split", resumed.metrics_csv.read_text())
        )
        # checkpoints carry identical parameters
        from currmask.learner import MaskedPredictionLearner

        w_full = MaskedPredictionLearner.load_checkpoint(full.checkpoint).parameter_vector()
        w_resumed = MaskedPredictionLearner.load_checkpoint(resumed.checkpoint).parameter_vector()
        assert np.array_equal(w_full, w_resumed)

    def test_resume_refuses_config_mismatch(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "run", steps=120)
        config = config_from_dict(tree)
        run_pretraining(config, stop_after=60)
        tree["train"]["learning_rate"] = 5e-4
        with pytest.raises(ArtifactError):
            run_pretraining(config_from_dict(tree), resume=True)

    def test_resume_without_checkpoint_rejected(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "fresh", steps=60)
        with pytest.raises(ArtifactError):
            run_pretraining(config_from_dict(tree), resume=True)

    def test_scheme_subsample_limits_target_pool(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "sub", steps=60)
        tree["scheduler"]["scheme_subsample"] = 4
        artifacts = run_pretraining(config_from_dict(tree))
        rows = [
            ln for ln in artifacts.metrics_csv.read_text().splitlines()
            if not ln.startswith("#") and not ln.startswith("step,")
        ]
        loss_after = float(rows[0].split(",")[8])
        assert np.isfinite(loss_after)

    def test_numeric_abort_writes_diagnostics(self, small_dataset_dir, tmp_path, monkeypatch):
        from currmask.learner import MaskedPredictionLearner, NumericsError

        def poisoned(self, states, actions, mask, lr=None):
            raise NumericsError("poisoned", {"loss": float("nan")})

        monkeypatch.setattr(MaskedPredictionLearner, "train_step", poisoned)
        tree = small_run_tree(small_dataset_dir, tmp_path / "boom", steps=60)
        with pytest.raises(NumericsError):
            run_pretraining(config_from_dict(tree))
        diag = json.loads((tmp_path / "boom" / "numeric_abort.json").read_text())
        assert diag["step"] == 1

    def test_baseline_methods_run(self, small_dataset_dir, tmp_path):
        for method in ("maskdp", "mtm", "mixed_prog", "fixed(4)"):
            tree = small_run_tree(
                small_dataset_dir, tmp_path / method.replace("(", "_").replace(")", ""),
                method=method, steps=60,
            )
            artifacts = run_pretraining(config_from_dict(tree))
            rows = [
                ln for ln in artifacts.metrics_csv.read_text().splitlines()
                if not ln.startswith("#") and not ln.startswith("step,")
            ]
            assert len(rows) == 1
            parts = rows[0].split(",")
            assert parts[5] == "nan"  # baselines log without curriculum rewards


class TestEval:
    def test_untrained_checkpoint_eval_finite(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "run", steps=60)
        config = config_from_dict(tree)
        artifacts = run_pretraining(config)
        rows = run_eval(config, checkpoint=artifacts.checkpoint)
        assert rows
        for row in rows:
            assert np.isfinite(row["mean"]) and np.isfinite(row["stderr"])
        parsed = read_eval_csv(Path(config.out_dir) / "eval.csv")
        assert {r["task"] for r in parsed} == {"skill_prompt", "goal_plan"}

    def test_replay_oracle_rows(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "run", steps=60)
        config = config_from_dict(tree)
        rows = run_eval(config, replay_oracle=True)
        goal_rows = [r for r in rows if r["task"] == "goal_plan" and r["metric"] == "distance"]
        assert goal_rows[0]["mean"] == 0.0
        text = report(Path(config.out_dir) / "eval.csv")
        assert "replay_oracle" in text

    def test_missing_checkpoint_rejected(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "run", steps=60)
        config = config_from_dict(tree)
        with pytest.raises(ArtifactError):
            run_eval(config, checkpoint=tmp_path / "missing.ckpt")

    def test_architecture_mismatch_rejected(self, small_dataset_dir, tmp_path):
        tree = small_run_tree(small_dataset_dir, tmp_path / "run", steps=60)
        config = config_from_dict(tree)
        artifacts = run_pretraining(config)
        tree["model"]["hidden"] = 64
        with pytest.raises(ArtifactError):
            run_eval(config_from_dict(tree), checkpoint=artifacts.checkpoint)


class TestGenData:
    def test_refuses_nonempty_without_force(self, tmp_path):
        target = tmp_path / "data"
        target.mkdir()
        (target / "junk.txt").write_text("x")
        with pytest.raises(ArtifactError):
            gen_data("point_mass_2d", 2, 20, 0, target)
        gen_data("point_mass_2d", 2, 20, 0, target, force=True)
        assert (target / "manifest.json").exists()


class TestCli:
    def test_gen_data_and_exit_codes(self, tmp_path, capsys):
        out = tmp_path / "ds"
        assert cli_main([
            "gen-data", "--env", "point_mass_2d", "--episodes", "2",
            "--episode-len", "20", "--seed", "1", "--out", str(out),
        ]) == 0
        assert cli_main([
            "gen-data", "--env", "point_mass_2d", "--episodes", "2",
            "--episode-len", "20", "--seed", "1", "--out", str(out),
        ]) == 3  # refuses nonempty
        assert cli_main(["gen-data", "--env", "bogus_env", "--episodes", "1",
                         "--episode-len", "20", "--seed", "1",
                         "--out", str(tmp_path / "x")]) == 3

    def test_print_config(self, capsys):
        assert cli_main(["pretrain", "--print-config"]) == 0
        dumped = yaml.safe_load(capsys.readouterr().out)
        assert dumped["method"] == "currmask"
        assert dumped["scheduler"]["interval"] == 100

    def test_bad_config_exit_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("method: ucb\n")
        assert cli_main(["pretrain", "--config", str(bad)]) == 2

    def test_missing_dataset_exit_3(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(yaml.safe_dump({
            "method": "mixed",
            "out_dir": str(tmp_path / "out"),
            "data": {"train": str(tmp_path / "no_train"), "val": str(tmp_path / "no_val")},
        }))
        assert cli_main(["pretrain", "--config", str(cfg)]) == 3

    def test_numeric_abort_exit_4(self, tmp_path, monkeypatch):
        from currmask import cli
        from currmask.learner import NumericsError

        cfg = tmp_path / "run.yaml"
        cfg.write_text("method: mixed\n")
        monkeypatch.setattr(
            cli, "run_pretraining",
            lambda *a, **k: (_ for _ in ()).throw(NumericsError("boom", {"step": 3})),
        )
        assert cli_main(["pretrain", "--config", str(cfg)]) == 4

    def test_eval_requires_checkpoint_flag(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("method: mixed\n")
        assert cli_main(["eval", "--config", str(cfg)]) == 2

    def test_report_smoke(self, tmp_path, capsys):
        csv = tmp_path / "eval.csv"
        csv.write_text(
            "# config_hash=abc\nrun_id,method,task,metric,mean,stderr,n,seed_base\n"
            "r1,mixed,skill_prompt,reward,1.5,0.1,3,0\n"
            "r2,mixed,skill_prompt,reward,2.5,0.1,3,1\n"
        )
        assert cli_main(["report", "--eval-csv", str(csv)]) == 0
        out = capsys.readouterr().out
        assert "mixed" in out and "2.0" in out
