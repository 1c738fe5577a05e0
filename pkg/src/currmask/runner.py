"""Experiment orchestration: config handling, the pretraining loop, baselines,
metrics emission, checkpoint/resume, and the evaluation driver.

A run is fully determined by (config, seed): the base seed fans out to one
stream per component via sha256 derivation, and every emitted byte except
wallclock columns is reproducible.  Metrics go to `metrics.csv` (column
contract: step, wallclock, arm_index, ratio, block, raw_reward,
scaled_reward, loss_before, loss_after, then one probability column per pool
scheme, then train_loss and seed) with a JSON-lines mirror.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import scheduler as sched
from .data import (
    DatasetError,
    NormStats,
    generate_dataset,
    make_env,
    normalize_window,
    read_dataset,
    sample_window,
    write_dataset,
)
from .evaluation import ReplayOracle, goal_planning_eval, skill_prompting_eval
from .learner import MaskedPredictionLearner, NetConfig, NumericsError
from .masking import MaskingPool, block_mask, random_autoregressive_mask

METHODS = ("currmask", "mixed", "mixed_prog", "mixed_inv", "maskdp", "mtm")


class ConfigError(Exception):
    """Bad or inconsistent run configuration (exit code 2)."""


class ArtifactError(Exception):
    """Missing or mismatched run artifact such as a checkpoint (exit code 3)."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass
class DataConfig:
    train: str = "data/train"
    val: str = "data/val"


@dataclass
class PoolConfig:
    ratios: list[float] = field(default_factory=lambda: [0.15, 0.35, 0.55, 0.75, 0.95])
    blocks: list[int] = field(default_factory=lambda: list(range(1, 21)))
    full_blocks: bool = False


@dataclass
class ModelConfig:
    hidden: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 1
    heads: int = 2
    context_tokens: int = 32
    mlp_ratio: int = 2
    loss_on: str = "all"


@dataclass
class TrainConfig:
    steps: int = 20000
    batch_size: int = 32
    learning_rate: float = 1e-4
    checkpoint_every: int = 1000


@dataclass
class SchedulerConfig:
    epsilon: float = 0.2
    gamma: float = 0.1
    interval: int = 100
    samples: int = 10
    scheme_subsample: int | None = None
    history_window: int | None = None


@dataclass
class EvalSuiteConfig:
    suites: list[str] = field(default_factory=lambda: ["skill_prompt", "goal_plan"])
    episodes: int = 100  # per seed; aggregate over seeds via repeated eval runs
    prompt_len: int = 8
    rollout: int = 120
    goal_steps: list[int] = field(default_factory=lambda: [20, 40, 60, 80])
    goal_budget: int = 100
    future_pad: int = 4


@dataclass
class RunConfig:
    method: str = "currmask"
    out_dir: str = "runs/run"
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    eval: EvalSuiteConfig = field(default_factory=EvalSuiteConfig)


_SECTIONS = {
    "data": DataConfig,
    "pool": PoolConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "scheduler": SchedulerConfig,
    "eval": EvalSuiteConfig,
}


def _build_section(cls, values: dict, path: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value under '{path}': {exc}") from exc


def config_from_dict(tree: dict) -> RunConfig:
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    top_known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(tree) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in tree.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a mapping")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    config = RunConfig(**kwargs)
    parse_method(config.method)  # validates
    if config.scheduler.interval < 1 or config.scheduler.samples < 1:
        raise ConfigError("scheduler interval and samples must be >= 1")
    if config.train.steps < 1 or config.train.batch_size < 1:
        raise ConfigError("train steps and batch size must be >= 1")
    if max(config.pool.blocks) > config.model.context_tokens:
        raise ConfigError(
            f"largest pool block {max(config.pool.blocks)} exceeds the "
            f"{config.model.context_tokens}-token context"
        )
    return config


def load_config(path: Path) -> RunConfig:
    try:
        tree = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file does not parse: {exc}") from exc
    return config_from_dict(tree or {})


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(config), sort_keys=True)


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_method(method: str) -> tuple[str, int | None]:
    """'fixed(7)' -> ('fixed', 7); plain names pass through."""
    if method in METHODS:
        return method, None
    if method.startswith("fixed(") and method.endswith(")"):
        try:
            return "fixed", int(method[len("fixed("):-1])
        except ValueError as exc:
            raise ConfigError(f"bad fixed-block method spec {method!r}") from exc
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS} or fixed(<b>)")


def derive_seed(base: int, name: str) -> int:
    digest = hashlib.sha256(f"{base}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def configure_threads() -> int:
    import torch

    env = os.environ.get("CURRMASK_THREADS")
    n = int(env) if env else min(4, os.cpu_count() or 1)
    torch.set_num_threads(max(1, n))
    return n


# --------------------------------------------------------------------------
# metrics files
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


class MetricsWriter:
    """Append-only CSV plus JSON-lines mirror, config hash in both headers."""

    def __init__(self, out_dir: Path, pool: MaskingPool, cfg_hash: str, append: bool = False):
        self.csv_path = out_dir / "metrics.csv"
        self.jsonl_path = out_dir / "metrics.jsonl"
        self.prob_names = [f"p_{s.ratio:g}_{s.block}" for s in pool.schemes]
        if not append:
            header = (
                "step,wallclock,arm_index,ratio,block,raw_reward,scaled_reward,"
                "loss_before,loss_after," + ",".join(self.prob_names) + ",train_loss,seed"
            )
            self.csv_path.write_text(f"# config_hash={cfg_hash}\n{header}\n", encoding="utf-8")
            schemes = [{"ratio": s.ratio, "block": s.block} for s in pool.schemes]
            self.jsonl_path.write_text(
                json.dumps({"type": "header", "config_hash": cfg_hash, "schemes": schemes})
                + "\n",
                encoding="utf-8",
            )

    def append(self, record: sched.MetricsRecord) -> None:
        fields = [
            str(record.step),
            _fmt(record.wallclock),
            str(record.arm_index),
            _fmt(record.ratio),
            str(record.block),
            _fmt(record.raw_reward),
            _fmt(record.scaled_reward),
            _fmt(record.loss_before),
            _fmt(record.loss_after),
        ]
        fields += [_fmt(p) for p in record.probs]
        fields += [_fmt(record.train_loss), str(record.seed)]
        with open(self.csv_path, "a", encoding="utf-8") as fh:
            fh.write(",".join(fields) + "\n")

        def _json_safe(x: float):
            return float(x) if math.isfinite(x) else None

        obj = {
            "type": "record",
            "step": record.step,
            "wallclock": record.wallclock,
            "arm_index": record.arm_index,
            "ratio": record.ratio,
            "block": record.block,
            "raw_reward": _json_safe(record.raw_reward),
            "scaled_reward": _json_safe(record.scaled_reward),
            "loss_before": _json_safe(record.loss_before),
            "loss_after": _json_safe(record.loss_after),
            "probs": [float(p) for p in record.probs],
            "train_loss": _json_safe(record.train_loss),
            "seed": record.seed,
        }
        with open(self.jsonl_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")

    def truncate_after(self, step: int) -> None:
        """Drop rows past a resume point so reruns stay byte-comparable."""
        lines = self.csv_path.read_text(encoding="utf-8").splitlines(keepends=True)
        kept = [
            ln
            for ln in lines
            if ln.startswith("#") or ln.startswith("step,") or int(ln.split(",", 1)[0]) <= step
        ]
        self.csv_path.write_text("".join(kept), encoding="utf-8")
        jl = self.jsonl_path.read_text(encoding="utf-8").splitlines(keepends=True)
        kept_jl = []
        for ln in jl:
            obj = json.loads(ln)
            if obj.get("type") == "header" or obj.get("step", 0) <= step:
                kept_jl.append(ln)
        self.jsonl_path.write_text("".join(kept_jl), encoding="utf-8")


# --------------------------------------------------------------------------
# pretraining
# --------------------------------------------------------------------------


def _sample_batch(trajectories, window_timesteps: int, batch_size: int, rng, stats: NormStats):
    states, actions = [], []
    for _ in range(batch_size):
        traj = trajectories[int(rng.integers(len(trajectories)))]
        win = normalize_window(sample_window(traj, window_timesteps, rng), stats)
        states.append(win.states)
        actions.append(win.actions)
    return np.stack(states), np.stack(actions)


def _draw_masks(family: str, scheme, n_tokens: int, batch_size: int, rng, full_blocks: bool):
    if family == "autoregressive":
        return np.stack(
            [random_autoregressive_mask(n_tokens, scheme.ratio, rng) for _ in range(batch_size)]
        )
    return np.stack(
        [
            block_mask(n_tokens, scheme.ratio, scheme.block, rng, full_blocks=full_blocks)
            for _ in range(batch_size)
        ]
    )


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _rng_from_state(state: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


@dataclass
class RunArtifacts:
    out_dir: Path
    metrics_csv: Path
    metrics_jsonl: Path
    checkpoint: Path
    completed_steps: int


def run_pretraining(
    config: RunConfig, stop_after: int | None = None, resume: bool = False
) -> RunArtifacts:
    """Execute the pretraining loop per the run config.

    `stop_after` halts the run early (with a checkpoint) so interruption and
    resume can be exercised; `resume` continues from `checkpoint.ckpt` in the
    output directory, refusing a config-hash mismatch.
    """
    configure_threads()
    kind, fixed_block = parse_method(config.method)
    cfg_hash = config_hash(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        train_trajs, train_manifest = read_dataset(Path(config.data.train))
        val_trajs, _ = read_dataset(Path(config.data.val))
    except OSError as exc:
        raise DatasetError(f"cannot read dataset: {exc}") from exc
    stats = NormStats.from_dict(train_manifest["norm_stats"])
    pool = MaskingPool(tuple(config.pool.ratios), tuple(config.pool.blocks))
    n_tokens = config.model.context_tokens
    window_timesteps = n_tokens // 2
    interval = config.scheduler.interval
    total_steps = config.train.steps

    scheme_subsample = None
    if config.scheduler.scheme_subsample:
        sub_rng = np.random.default_rng(derive_seed(config.seed, "scheme_subsample"))
        scheme_subsample = sorted(
            sub_rng.choice(len(pool), size=config.scheduler.scheme_subsample, replace=False).tolist()
        )

    checkpoint_path = out_dir / "checkpoint.ckpt"
    eval_seed = derive_seed(config.seed, "target_eval")

    def target_loss(learner) -> float:
        return sched.compute_target_loss(
            learner,
            pool,
            validation=val_trajs,
            n_samples=config.scheduler.samples,
            rng=np.random.default_rng(eval_seed),
            window_timesteps=window_timesteps,
            stats=stats,
            scheme_indices=scheme_subsample,
            full_blocks=config.pool.full_blocks,
        )

    if resume:
        if not checkpoint_path.exists():
            raise ArtifactError(f"no checkpoint to resume in {out_dir}")
        learner = MaskedPredictionLearner.load_checkpoint(checkpoint_path)
        run_state = learner.checkpoint_manifest(checkpoint_path)["extra"]
        if run_state["config_hash"] != cfg_hash:
            raise ArtifactError("checkpoint was written by a different configuration")
        start_step = run_state["step"]
        sampler_rng = _rng_from_state(run_state["rng"]["sampler"])
        mask_rng = _rng_from_state(run_state["rng"]["mask"])
        scheme_rng = _rng_from_state(run_state["rng"]["scheme"])
        state = None
        if kind == "currmask":
            state = sched.SchedulerState(
                weights=np.asarray(run_state["scheduler"]["weights"], dtype=np.float64),
                epsilon=config.scheduler.epsilon,
                gamma=config.scheduler.gamma,
                current_arm=run_state["scheduler"]["current_arm"],
                reward_history=[tuple(x) for x in run_state["scheduler"]["history"]],
                history_window=config.scheduler.history_window,
            )
        current_scheme = pool[run_state["current_scheme"]]
        loss_before = run_state["loss_before"]
        loss_sum, loss_count = run_state["train_loss_sum"], run_state["train_loss_count"]
        writer = MetricsWriter(out_dir, pool, cfg_hash, append=True)
        writer.truncate_after(start_step)
    else:
        net_config = NetConfig(
            state_dim=train_manifest["state_dim"],
            action_dim=train_manifest["action_dim"],
            hidden=config.model.hidden,
            encoder_layers=config.model.encoder_layers,
            decoder_layers=config.model.decoder_layers,
            heads=config.model.heads,
            context_tokens=config.model.context_tokens,
            mlp_ratio=config.model.mlp_ratio,
            loss_on=config.model.loss_on,
            seed=derive_seed(config.seed, "net_init") % (2**31),
        )
        learner = MaskedPredictionLearner(net_config, learning_rate=config.train.learning_rate)
        sampler_rng = np.random.default_rng(derive_seed(config.seed, "sampler"))
        mask_rng = np.random.default_rng(derive_seed(config.seed, "mask"))
        scheme_rng = np.random.default_rng(derive_seed(config.seed, "scheme"))
        start_step = 0
        loss_sum, loss_count = 0.0, 0
        state = None
        loss_before = float("nan")
        if kind == "currmask":
            state = sched.init_scheduler(
                len(pool),
                scheme_rng,
                epsilon=config.scheduler.epsilon,
                gamma=config.scheduler.gamma,
                history_window=config.scheduler.history_window,
            )
            loss_before = target_loss(learner)
            current_scheme = pool[state.current_arm]
        else:
            current_scheme = sched.baseline_next_scheme(
                kind, 0, total_steps, pool, scheme_rng, fixed_block=fixed_block
            )
        writer = MetricsWriter(out_dir, pool, cfg_hash, append=False)

    family = "autoregressive" if kind == "mtm" else "block"

    def save_state(step: int) -> None:
        run_state = {
            "config_hash": cfg_hash,
            "step": step,
            "rng": {
                "sampler": _rng_state(sampler_rng),
                "mask": _rng_state(mask_rng),
                "scheme": _rng_state(scheme_rng),
            },
            "current_scheme": pool.index_of(current_scheme),
            "loss_before": loss_before,
            "train_loss_sum": loss_sum,
            "train_loss_count": loss_count,
        }
        if state is not None:
            run_state["scheduler"] = {
                "weights": state.weights.tolist(),
                "current_arm": state.current_arm,
                "history": [list(x) for x in state.reward_history],
            }
        learner.save_checkpoint(checkpoint_path, extra_manifest=run_state)

    last_step = start_step
    for step in range(start_step + 1, total_steps + 1):
        batch_states, batch_actions = _sample_batch(
            train_trajs, window_timesteps, config.train.batch_size, sampler_rng, stats
        )
        masks = _draw_masks(
            family, current_scheme, n_tokens, config.train.batch_size, mask_rng,
            config.pool.full_blocks,
        )
        try:
            loss = learner.train_step(batch_states, batch_actions, masks)
        except NumericsError as exc:
            with open(out_dir / "numeric_abort.json", "w", encoding="utf-8") as fh:
                json.dump({"step": step, **exc.diagnostics}, fh, indent=2)
            raise
        loss_sum += loss
        loss_count += 1

        if step % interval == 0:
            train_loss = loss_sum / max(1, loss_count)
            loss_sum, loss_count = 0.0, 0
            if kind == "currmask":
                loss_after = target_loss(learner)
                snapshot = sched.ProgressSnapshot(
                    step=step, loss_before=loss_before, loss_after=loss_after
                )
                state, record = sched.curriculum_step(
                    state, snapshot, pool, scheme_rng, seed=config.seed, train_loss=train_loss
                )
                loss_before = loss_after
                current_scheme = pool[state.current_arm]
            else:
                arm = pool.index_of(current_scheme)
                record = sched.MetricsRecord(
                    step=step,
                    wallclock=time.time(),
                    arm_index=arm,
                    ratio=current_scheme.ratio,
                    block=current_scheme.block,
                    raw_reward=float("nan"),
                    scaled_reward=float("nan"),
                    loss_before=float("nan"),
                    loss_after=float("nan"),
                    probs=sched.baseline_scheme_probs(
                        kind, step, total_steps, pool, fixed_block=fixed_block
                    ),
                    seed=config.seed,
                    train_loss=train_loss,
                )
                if step < total_steps:
                    current_scheme = sched.baseline_next_scheme(
                        kind, step, total_steps, pool, scheme_rng, fixed_block=fixed_block
                    )
            writer.append(record)

        last_step = step
        at_checkpoint = (
            step % config.train.checkpoint_every == 0
            or step == total_steps
            or (stop_after is not None and step >= stop_after)
        )
        if at_checkpoint:
            save_state(step)
        if stop_after is not None and step >= stop_after:
            break

    with open(out_dir / "run.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "config": dataclasses.asdict(config),
                "config_hash": cfg_hash,
                "completed_steps": last_step,
                "checkpoint": checkpoint_path.name,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return RunArtifacts(
        out_dir=out_dir,
        metrics_csv=writer.csv_path,
        metrics_jsonl=writer.jsonl_path,
        checkpoint=checkpoint_path,
        completed_steps=last_step,
    )


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _append_eval_rows(path: Path, cfg_hash: str, rows: list[dict]) -> None:
    header = "run_id,method,task,metric,mean,stderr,n,seed_base"
    if not path.exists():
        path.write_text(f"# config_hash={cfg_hash}\n{header}\n", encoding="utf-8")
    with open(path, "a", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                f"{row['run_id']},{row['method']},{row['task']},{row['metric']},"
                f"{_fmt(row['mean'])},{_fmt(row['stderr'])},{row['n']},{row['seed_base']}\n"
            )


def run_eval(
    config: RunConfig,
    checkpoint: Path | None = None,
    replay_oracle: bool = False,
    eval_csv: Path | None = None,
) -> list[dict]:
    """Run the configured zero-shot suites; append rows to eval.csv."""
    configure_threads()
    cfg_hash = config_hash(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eval_csv = eval_csv or out_dir / "eval.csv"

    try:
        _, train_manifest = read_dataset(Path(config.data.train))
        val_trajs, val_manifest = read_dataset(Path(config.data.val))
    except OSError as exc:
        raise DatasetError(f"cannot read dataset: {exc}") from exc
    stats = NormStats.from_dict(train_manifest["norm_stats"])
    env = make_env(val_manifest["env_id"])

    if replay_oracle:
        model = ReplayOracle()
    else:
        if checkpoint is None or not Path(checkpoint).exists():
            raise ArtifactError(f"checkpoint not found: {checkpoint}")
        model = MaskedPredictionLearner.load_checkpoint(Path(checkpoint))
        saved = model.config
        declared = config.model
        if (
            saved.hidden != declared.hidden
            or saved.encoder_layers != declared.encoder_layers
            or saved.decoder_layers != declared.decoder_layers
            or saved.context_tokens != declared.context_tokens
        ):
            raise ArtifactError("checkpoint architecture does not match config.model")

    run_id = f"{config.method}-{config.seed}-{cfg_hash[:8]}"
    method = "replay_oracle" if replay_oracle else config.method
    rows: list[dict] = []

    def emit(task: str, metric: str, mean: float, stderr: float, n: int) -> None:
        rows.append(
            {
                "run_id": run_id,
                "method": method,
                "task": task,
                "metric": metric,
                "mean": mean,
                "stderr": stderr,
                "n": n,
                "seed_base": config.seed,
            }
        )

    for suite in config.eval.suites:
        if suite == "skill_prompt":
            summary, _ = skill_prompting_eval(
                model,
                env,
                val_trajs,
                stats,
                prompt_len=config.eval.prompt_len,
                rollout=config.eval.rollout,
                n_episodes=config.eval.episodes,
                seed=derive_seed(config.seed, "eval_skill"),
                future_pad=config.eval.future_pad,
            )
            emit("skill_prompt", "reward", summary.mean, summary.stderr, summary.n)
            for name, (mean, stderr) in summary.extras.items():
                emit("skill_prompt", name, mean, stderr, summary.n)
        elif suite == "goal_plan":
            summary, _ = goal_planning_eval(
                model,
                env,
                val_trajs,
                stats,
                goal_steps=tuple(config.eval.goal_steps),
                rollout_budget=config.eval.goal_budget,
                n_episodes=config.eval.episodes,
                seed=derive_seed(config.seed, "eval_goal"),
                future_pad=config.eval.future_pad,
            )
            emit("goal_plan", "distance", summary.mean, summary.stderr, summary.n)
            for name, (mean, stderr) in summary.extras.items():
                emit("goal_plan", name, mean, stderr, summary.n)
        else:
            raise ConfigError(f"unknown eval suite {suite!r}")

    _append_eval_rows(eval_csv, cfg_hash, rows)
    return rows


# --------------------------------------------------------------------------
# data generation and reporting
# --------------------------------------------------------------------------


def gen_data(
    env_id: str, episodes: int, episode_len: int, seed: int, out: Path, force: bool = False
) -> Path:
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not force:
        raise ArtifactError(f"{out} is not empty; pass force to overwrite")
    env = make_env(env_id)
    trajectories, manifest = generate_dataset(env, episodes, episode_len, seed)
    write_dataset(out, trajectories, manifest)
    return out


def read_eval_csv(path: Path) -> list[dict]:
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header: list[str] | None = None
    for ln in lines:
        if ln.startswith("#") or not ln.strip():
            continue
        if header is None:
            header = ln.split(",")
            continue
        values = ln.split(",")
        row = dict(zip(header, values))
        row["mean"] = float(row["mean"])
        row["stderr"] = float(row["stderr"])
        rows.append(row)
    return rows


def report(eval_csv: Path) -> str:
    """Tabulate eval.csv into per-method summary lines."""
    rows = read_eval_csv(eval_csv)
    if not rows:
        return "(no evaluation rows)"
    groups: dict[tuple[str, str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["method"], row["task"], row["metric"]), []).append(row)
    lines = [f"{'method':<14} {'task':<14} {'metric':<14} {'mean':>12} {'stderr':>10} {'runs':>5}"]
    for (method, task, metric), grp in sorted(groups.items()):
        means = np.array([g["mean"] for g in grp])
        if means.size > 1:
            stderr = float(means.std(ddof=1) / np.sqrt(means.size))
        else:
            stderr = grp[0]["stderr"]
        lines.append(
            f"{method:<14} {task:<14} {metric:<14} {means.mean():>12.4f} {stderr:>10.4f} {means.size:>5}"
        )
    return "\n".join(lines)
