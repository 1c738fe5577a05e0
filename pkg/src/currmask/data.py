"""Trajectory data model, synthetic environments, and the on-disk dataset format.

Two desk-scale environments generate all pretraining data: `point_mass_2d`
(goal reaching with dense or sparse reward) and `chain_walker_1d` (velocity
reward, ratchet-drive locomotion).  Episodes are produced by a mixture of
random, PD, and noisy-PD policies to emulate replay buffers of varying
quality.  All state propagation is rounded to float32 at each step boundary
so stored trajectories replay bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAJ_MAGIC = b"CMTRAJ01" + b"\x00" * 8  # 16-byte header magic
DATASET_VERSION = 1
STD_FLOOR = 1e-6
POLICY_TIERS = ("random", "pd_noisy", "pd")  # equal thirds by episode index


class DatasetError(Exception):
    """Base class for dataset container problems."""


class CorruptHeaderError(DatasetError):
    """Episode file magic or header fields do not parse."""


class TruncatedPayloadError(DatasetError):
    """Episode file ends before the declared payload."""


class VersionMismatchError(DatasetError):
    """Manifest declares an unsupported container version."""


@dataclass
class Trajectory:
    """One episode: aligned (state, action) rows in environment units."""

    states: np.ndarray  # (T, Ds) float32
    actions: np.ndarray  # (T, Da) float32, entries in [-1, 1]
    env_id: str = ""
    seed: int = 0

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.float32)
        self.actions = np.asarray(self.actions, dtype=np.float32)
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise ValueError("states and actions must be 2-D")
        if self.states.shape[0] != self.actions.shape[0]:
            raise ValueError(
                f"row mismatch: {self.states.shape[0]} states vs {self.actions.shape[0]} actions"
            )
        if self.states.shape[0] < 1:
            raise ValueError("trajectory needs at least one timestep")
        if not np.isfinite(self.states).all() or not np.isfinite(self.actions).all():
            raise ValueError("trajectory contains non-finite entries")
        if np.abs(self.actions).max(initial=0.0) > 1.0:
            raise ValueError("actions must lie in [-1, 1]")

    @property
    def length(self) -> int:
        return int(self.states.shape[0])


@dataclass
class Window:
    """W consecutive timesteps viewed as 2W interleaved tokens (s, a, s, a, ...)."""

    states: np.ndarray  # (W, Ds)
    actions: np.ndarray  # (W, Da)
    start_index: int = 0

    @property
    def timesteps(self) -> int:
        return int(self.states.shape[0])

    @property
    def token_count(self) -> int:
        return 2 * self.timesteps


@dataclass
class NormStats:
    """Per-dimension z-score statistics, computed over the training split only."""

    state_mean: np.ndarray
    state_std: np.ndarray
    action_mean: np.ndarray
    action_std: np.ndarray

    def to_dict(self) -> dict:
        return {
            "state_mean": self.state_mean.tolist(),
            "state_std": self.state_std.tolist(),
            "action_mean": self.action_mean.tolist(),
            "action_std": self.action_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            state_mean=np.asarray(d["state_mean"], dtype=np.float64),
            state_std=np.asarray(d["state_std"], dtype=np.float64),
            action_mean=np.asarray(d["action_mean"], dtype=np.float64),
            action_std=np.asarray(d["action_std"], dtype=np.float64),
        )


@dataclass(frozen=True)
class EnvModel:
    """Deterministic dynamics plus a reward spec; stepping is a pure function."""

    env_id: str
    state_dim: int
    action_dim: int
    dt: float = 0.1
    damping: float = 0.0
    pos_max: float = 1.0
    vel_max: float = 1.0
    reward_kind: str = "dense"  # dense = -distance, sparse = threshold indicator
    goal: tuple[float, ...] = (0.6, 0.6)
    sparse_radius: float = 0.1
    segments: int = 3  # chain_walker only
    torque_gain: float = 2.0
    drive_gain: float = 1.0
    angle_max: float = 1.2

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def make_env(env_id: str) -> EnvModel:
    if env_id == "point_mass_2d":
        return EnvModel(env_id="point_mass_2d", state_dim=4, action_dim=2, reward_kind="dense")
    if env_id == "point_mass_2d_sparse":
        return EnvModel(
            env_id="point_mass_2d_sparse", state_dim=4, action_dim=2, reward_kind="sparse"
        )
    if env_id == "chain_walker_1d":
        k = 3
        return EnvModel(
            env_id="chain_walker_1d",
            state_dim=2 + 2 * k,
            action_dim=k,
            damping=0.5,
            pos_max=50.0,
            vel_max=1.0,
            reward_kind="velocity",
            segments=k,
        )
    raise ValueError(f"unknown environment {env_id!r}")


def env_step(env: EnvModel, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, float]:
    """Advance one step of semi-implicit Euler dynamics; returns (next_state, reward)."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape != (env.state_dim,) or action.shape != (env.action_dim,):
        raise ValueError(
            f"expected state ({env.state_dim},) and action ({env.action_dim},), "
            f"got {state.shape} and {action.shape}"
        )
    if not np.isfinite(state).all() or not np.isfinite(action).all():
        raise ValueError("state and action must be finite")
    if np.abs(action).max() > 1.0:
        raise ValueError("action entries must lie in [-1, 1]")

    if env.env_id.startswith("point_mass_2d"):
        pos, vel = state[:2], state[2:]
        vel = np.clip(vel * (1.0 - env.damping * env.dt) + action * env.dt, -env.vel_max, env.vel_max)
        pos = np.clip(pos + vel * env.dt, -env.pos_max, env.pos_max)
        next_state = np.concatenate([pos, vel])
        dist = float(np.linalg.norm(pos - np.asarray(env.goal)))
        reward = 1.0 if dist < env.sparse_radius else 0.0
        if env.reward_kind == "dense":
            reward = -dist
        return next_state, reward

    if env.env_id == "chain_walker_1d":
        k = env.segments
        x, v = state[0], state[1]
        theta, omega = state[2 : 2 + k], state[2 + k :]
        omega = np.clip(
            omega * (1.0 - env.damping * env.dt) + action * env.dt * env.torque_gain,
            -env.vel_max * 4,
            env.vel_max * 4,
        )
        theta = np.clip(theta + omega * env.dt, -env.angle_max, env.angle_max)
        # one-way ratchet drive: backward strokes cost nothing, forward strokes push
        drive = max(0.0, float(np.mean(action * np.cos(theta))))
        v = float(
            np.clip(v * (1.0 - env.damping * env.dt) + env.drive_gain * drive * env.dt,
                    -env.vel_max, env.vel_max)
        )
        x = float(np.clip(x + v * env.dt, -env.pos_max, env.pos_max))
        next_state = np.concatenate([[x, v], theta, omega])
        return next_state, v

    raise ValueError(f"unknown environment {env.env_id!r}")


def initial_state(env: EnvModel, rng: np.random.Generator) -> np.ndarray:
    if env.env_id.startswith("point_mass_2d"):
        pos = rng.uniform(-0.9 * env.pos_max, 0.9 * env.pos_max, size=2)
        vel = rng.uniform(-0.2, 0.2, size=2)
        return np.concatenate([pos, vel])
    if env.env_id == "chain_walker_1d":
        theta = rng.uniform(-0.3, 0.3, size=env.segments)
        omega = np.zeros(env.segments)
        return np.concatenate([[0.0, 0.0], theta, omega])
    raise ValueError(f"unknown environment {env.env_id!r}")


def _pd_action(env: EnvModel, state: np.ndarray, step: int) -> np.ndarray:
    if env.env_id.startswith("point_mass_2d"):
        pos, vel = state[:2], state[2:]
        return np.clip(4.0 * (np.asarray(env.goal) - pos) - 2.0 * vel, -1.0, 1.0)
    # chain walker: square-wave paddling gait; near-synchronized segments so the
    # forward half-stroke dominates the one-way drive
    k = env.segments
    phase = 2.0 * np.pi * (step % 20) / 20.0 + np.arange(k) * (np.pi / 6.0)
    return np.where(np.sin(phase) > 0.0, 1.0, -1.0).astype(np.float64)


def policy_action(
    tier: str, env: EnvModel, state: np.ndarray, step: int, rng: np.random.Generator
) -> np.ndarray:
    if tier == "random":
        return rng.uniform(-1.0, 1.0, size=env.action_dim)
    if tier == "pd":
        return _pd_action(env, state, step)
    if tier == "pd_noisy":
        noisy = _pd_action(env, state, step) + rng.normal(0.0, 0.3, size=env.action_dim)
        return np.clip(noisy, -1.0, 1.0)
    raise ValueError(f"unknown policy tier {tier!r}")


def rollout_episode(
    env: EnvModel, tier: str, episode_len: int, rng: np.random.Generator, env_seed_tag: int = 0
) -> Trajectory:
    """Simulate one fixed-length episode; states propagate through float32."""
    states = np.empty((episode_len, env.state_dim), dtype=np.float32)
    actions = np.empty((episode_len, env.action_dim), dtype=np.float32)
    state = initial_state(env, rng).astype(np.float32)
    for t in range(episode_len):
        action = policy_action(tier, env, state.astype(np.float64), t, rng).astype(np.float32)
        states[t] = state
        actions[t] = action
        next_state, _ = env_step(env, state, action)
        state = next_state.astype(np.float32)
    return Trajectory(states=states, actions=actions, env_id=env.env_id, seed=env_seed_tag)


def episode_rewards(env: EnvModel, traj: Trajectory) -> np.ndarray:
    """Recompute per-step rewards by replaying the stored actions."""
    rewards = np.empty(traj.length, dtype=np.float64)
    state = traj.states[0]
    for t in range(traj.length):
        next_state, rewards[t] = env_step(env, state, traj.actions[t])
        state = next_state.astype(np.float32)
    return rewards


def generate_dataset(
    env: EnvModel, n_episodes: int, episode_len: int, seed: int
) -> tuple[list[Trajectory], dict]:
    """Mixture dataset: episode i uses policy tier POLICY_TIERS[i % 3].

    Each episode owns rng stream default_rng(seed + i), so generation is
    deterministic and safely parallelizable across episodes.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if episode_len < 2:
        raise ValueError("episode_len must be >= 2")
    trajectories = []
    mixture: dict[str, int] = {tier: 0 for tier in POLICY_TIERS}
    for i in range(n_episodes):
        tier = POLICY_TIERS[i % len(POLICY_TIERS)]
        mixture[tier] += 1
        rng = np.random.default_rng(seed + i)
        trajectories.append(rollout_episode(env, tier, episode_len, rng, env_seed_tag=seed + i))
    manifest = {
        "version": DATASET_VERSION,
        "env_id": env.env_id,
        "state_dim": env.state_dim,
        "action_dim": env.action_dim,
        "n_episodes": n_episodes,
        "episode_len": episode_len,
        "seed": seed,
        "policy_mixture": mixture,
        "norm_stats": compute_norm_stats(trajectories).to_dict(),
    }
    return trajectories, manifest


def compute_norm_stats(trajectories: list[Trajectory]) -> NormStats:
    states = np.concatenate([t.states for t in trajectories]).astype(np.float64)
    actions = np.concatenate([t.actions for t in trajectories]).astype(np.float64)
    return NormStats(
        state_mean=states.mean(axis=0),
        state_std=np.maximum(states.std(axis=0), STD_FLOOR),
        action_mean=actions.mean(axis=0),
        action_std=np.maximum(actions.std(axis=0), STD_FLOOR),
    )


def sample_window(traj: Trajectory, timesteps: int, rng: np.random.Generator) -> Window:
    """Uniform-start window of `timesteps` consecutive rows."""
    if timesteps > traj.length:
        raise ValueError(f"window of {timesteps} timesteps exceeds trajectory length {traj.length}")
    start = int(rng.integers(traj.length - timesteps + 1))
    return Window(
        states=traj.states[start : start + timesteps].copy(),
        actions=traj.actions[start : start + timesteps].copy(),
        start_index=start,
    )


def normalize_window(window: Window, stats: NormStats) -> Window:
    if window.states.shape[1] != stats.state_mean.size:
        raise ValueError("state dimension does not match normalization stats")
    if window.actions.shape[1] != stats.action_mean.size:
        raise ValueError("action dimension does not match normalization stats")
    return Window(
        states=((window.states - stats.state_mean) / stats.state_std).astype(np.float32),
        actions=((window.actions - stats.action_mean) / stats.action_std).astype(np.float32),
        start_index=window.start_index,
    )


def denormalize_window(window: Window, stats: NormStats) -> Window:
    return Window(
        states=(window.states * stats.state_std + stats.state_mean).astype(np.float32),
        actions=(window.actions * stats.action_std + stats.action_mean).astype(np.float32),
        start_index=window.start_index,
    )


def write_trajectory(path: Path, traj: Trajectory) -> None:
    t, ds = traj.states.shape
    da = traj.actions.shape[1]
    with open(path, "wb") as fh:
        fh.write(TRAJ_MAGIC)
        fh.write(struct.pack("<III", t, ds, da))
        fh.write(np.ascontiguousarray(traj.states, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(traj.actions, dtype="<f4").tobytes())


def read_trajectory(path: Path, env_id: str = "", seed: int = 0) -> Trajectory:
    raw = Path(path).read_bytes()
    if len(raw) < len(TRAJ_MAGIC) + 12:
        raise CorruptHeaderError(f"{path}: file shorter than header")
    if raw[: len(TRAJ_MAGIC)] != TRAJ_MAGIC:
        raise CorruptHeaderError(f"{path}: bad magic")
    t, ds, da = struct.unpack_from("<III", raw, len(TRAJ_MAGIC))
    offset = len(TRAJ_MAGIC) + 12
    expected = offset + 4 * t * (ds + da)
    if len(raw) != expected:
        raise TruncatedPayloadError(f"{path}: expected {expected} bytes, found {len(raw)}")
    states = np.frombuffer(raw, dtype="<f4", count=t * ds, offset=offset).reshape(t, ds)
    actions = np.frombuffer(raw, dtype="<f4", count=t * da, offset=offset + 4 * t * ds).reshape(t, da)
    return Trajectory(states=states.copy(), actions=actions.copy(), env_id=env_id, seed=seed)


def write_dataset(path: Path, trajectories: list[Trajectory], manifest: dict) -> None:
    """Dataset container: manifest.json plus one ep_<idx>.traj file per episode."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for i, traj in enumerate(trajectories):
        write_trajectory(root / f"ep_{i:05d}.traj", traj)


def read_dataset(path: Path) -> tuple[list[Trajectory], dict]:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{root}: no manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("version") != DATASET_VERSION:
        raise VersionMismatchError(
            f"{root}: container version {manifest.get('version')!r}, expected {DATASET_VERSION}"
        )
    trajectories = []
    for i in range(manifest["n_episodes"]):
        trajectories.append(
            read_trajectory(
                root / f"ep_{i:05d}.traj",
                env_id=manifest["env_id"],
                seed=manifest["seed"] + i,
            )
        )
    return trajectories, manifest
