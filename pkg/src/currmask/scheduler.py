"""Curriculum scheduling over masking schemes.

The automated curriculum treats each masking scheme as a bandit arm.  Every
evaluation interval it rewards the arm it just trained on by the decrease in
the multi-scheme validation loss, rescales that reward into [-1, 1] against
the 20th/80th percentiles of the reward history, and runs an EXP3
exponential-weights update.  Uniform and staged hand-made curricula are
provided as baselines.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .masking import MaskScheme, MaskingPool, block_mask

COLD_START_HISTORY = 5  # percentiles of fewer points are noise; clamp raw instead
_WEIGHT_CEILING = 1e100  # renormalization threshold; probabilities are scale-free

BASELINE_KINDS = ("mixed", "mixed_prog", "mixed_inv", "maskdp", "mtm", "fixed")


@dataclass
class SchedulerState:
    """Exponential weights plus the reward bookkeeping that drives them."""

    weights: np.ndarray
    epsilon: float
    gamma: float
    current_arm: int
    reward_history: list[tuple[int, float]] = field(default_factory=list)
    history_window: int | None = None

    @property
    def arm_count(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class ProgressSnapshot:
    """Validation target loss before/after one training interval."""

    step: int
    loss_before: float
    loss_after: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.loss_before) and math.isfinite(self.loss_after)):
            raise ValueError("target losses must be finite")


@dataclass
class MetricsRecord:
    """One evaluation-interval row of the run trace."""

    step: int
    wallclock: float
    arm_index: int
    ratio: float
    block: int
    raw_reward: float
    scaled_reward: float
    loss_before: float
    loss_after: float
    probs: np.ndarray
    seed: int = 0
    train_loss: float = float("nan")


def draw_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Single categorical draw; shared by the curriculum and every baseline so
    identical configurations consume identical rng streams."""
    return int(rng.choice(probs.size, p=probs))


def init_scheduler(
    arm_count: int,
    rng: np.random.Generator,
    epsilon: float = 0.2,
    gamma: float = 0.1,
    history_window: int | None = None,
) -> SchedulerState:
    if arm_count < 1:
        raise ValueError("need at least one arm")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    state = SchedulerState(
        weights=np.ones(arm_count, dtype=np.float64),
        epsilon=epsilon,
        gamma=gamma,
        current_arm=0,
        history_window=history_window,
    )
    state.current_arm = draw_index(rng, sampling_distribution(state))
    return state


def sampling_distribution(state: SchedulerState) -> np.ndarray:
    """pi_i = (1 - eps) * w_i / sum(w) + eps / K."""
    w = state.weights
    return (1.0 - state.epsilon) * (w / w.sum()) + state.epsilon / w.size


def update_weights(state: SchedulerState, arm: int, reward: float) -> SchedulerState:
    """Importance-weighted exponential update; touches only the pulled arm."""
    if not -1.0 <= reward <= 1.0:
        raise ValueError(f"scaled reward {reward} outside [-1, 1]")
    if not 0 <= arm < state.arm_count:
        raise ValueError(f"arm {arm} out of range")
    probs = sampling_distribution(state)
    weights = state.weights.copy()
    weights[arm] *= math.exp(state.gamma * reward / (probs[arm] * state.arm_count))
    return replace(state, weights=weights)


def nearest_rank_percentile(values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(pct / 100.0 * ordered.size))
    return float(ordered[rank - 1])


def scale_reward(history: np.ndarray, raw: float, history_window: int | None = None) -> float:
    """Map a raw loss decrease into [-1, 1] against the history's 20/80 percentiles.

    `history` must already contain `raw`.  With fewer than COLD_START_HISTORY
    entries the raw value is clamped directly; a flat percentile band yields 0.
    """
    values = np.asarray(history, dtype=np.float64)
    if values.size == 0:
        raise ValueError("reward history must include the current value")
    if history_window is not None:
        values = values[-history_window:]
    if values.size < COLD_START_HISTORY:
        return float(np.clip(raw, -1.0, 1.0))
    lo = nearest_rank_percentile(values, 20.0)
    hi = nearest_rank_percentile(values, 80.0)
    if hi == lo:
        return 0.0
    return float(np.clip(2.0 * (raw - lo) / (hi - lo) - 1.0, -1.0, 1.0))


def curriculum_step(
    state: SchedulerState,
    snapshot: ProgressSnapshot,
    pool: MaskingPool,
    rng: np.random.Generator,
    seed: int = 0,
    train_loss: float = float("nan"),
) -> tuple[SchedulerState, MetricsRecord]:
    """One evaluation-interval update: reward the trained arm, redraw the next."""
    trained_arm = state.current_arm
    raw = snapshot.loss_before - snapshot.loss_after
    history = list(state.reward_history) + [(snapshot.step, raw)]
    scaled = scale_reward(
        np.array([r for _, r in history]), raw, history_window=state.history_window
    )
    new_state = update_weights(state, trained_arm, scaled)
    if new_state.weights.max() > _WEIGHT_CEILING:
        new_state.weights /= new_state.weights.max()
    probs = sampling_distribution(new_state)
    next_arm = draw_index(rng, probs)
    new_state = replace(new_state, current_arm=next_arm, reward_history=history)
    scheme = pool[trained_arm]
    record = MetricsRecord(
        step=snapshot.step,
        wallclock=time.time(),
        arm_index=trained_arm,
        ratio=scheme.ratio,
        block=scheme.block,
        raw_reward=raw,
        scaled_reward=scaled,
        loss_before=snapshot.loss_before,
        loss_after=snapshot.loss_after,
        probs=probs,
        seed=seed,
        train_loss=train_loss,
    )
    return new_state, record


def compute_target_loss(
    learner,
    pool: MaskingPool,
    validation=None,
    n_samples: int = 10,
    rng: np.random.Generator | None = None,
    window_timesteps: int | None = None,
    stats=None,
    scheme_indices: list[int] | None = None,
    full_blocks: bool = False,
) -> float:
    """Mean masked-prediction validation loss over every scheme in the pool.

    Learners with closed-form per-scheme losses (SyntheticLearner) are read
    directly.  Otherwise `n_samples` windows are drawn from the validation
    trajectories and each scheme contributes its mean loss over those windows.
    Reseeding `rng` identically across calls yields common random numbers, so
    before/after differences measure the parameter update alone.
    """
    indices = list(range(len(pool))) if scheme_indices is None else list(scheme_indices)
    if hasattr(learner, "per_scheme_losses"):
        losses = np.asarray(learner.per_scheme_losses(), dtype=np.float64)
        return float(losses[indices].mean())

    from .data import normalize_window, sample_window  # circular-import guard

    if not validation:
        raise ValueError("validation set is empty")
    if rng is None or window_timesteps is None:
        raise ValueError("network learners need rng and window_timesteps")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")

    windows = []
    for _ in range(n_samples):
        traj = validation[int(rng.integers(len(validation)))]
        win = sample_window(traj, window_timesteps, rng)
        if stats is not None:
            win = normalize_window(win, stats)
        windows.append(win)
    states = np.stack([w.states for w in windows])
    actions = np.stack([w.actions for w in windows])
    n_tokens = 2 * window_timesteps

    masks_by_scheme = [
        np.stack(
            [
                block_mask(n_tokens, pool[k].ratio, pool[k].block, rng, full_blocks=full_blocks)
                for _ in range(n_samples)
            ]
        )
        for k in indices
    ]

    if hasattr(learner, "eval_losses"):
        # one batched pass over all (scheme, window) pairs, fixed chunk order
        big_states = np.tile(states, (len(indices), 1, 1))
        big_actions = np.tile(actions, (len(indices), 1, 1))
        big_masks = np.concatenate(masks_by_scheme)
        total = big_masks.shape[0]
        per_window = np.empty(total, dtype=np.float64)
        chunk = 256
        for ofs in range(0, total, chunk):
            end = min(ofs + chunk, total)
            per_window[ofs:end] = learner.eval_losses(
                big_states[ofs:end], big_actions[ofs:end], big_masks[ofs:end]
            )
        per_scheme = per_window.reshape(len(indices), n_samples).mean(axis=1)
    else:
        per_scheme = np.empty(len(indices), dtype=np.float64)
        for pos, k in enumerate(indices):
            per_scheme[pos] = learner.eval_loss(states, actions, masks_by_scheme[pos], scheme=k)
    return float(per_scheme.mean())


def _uniform_over(pool: MaskingPool, allowed_blocks: tuple[int, ...]) -> np.ndarray:
    probs = np.array(
        [1.0 if s.block in allowed_blocks else 0.0 for s in pool.schemes], dtype=np.float64
    )
    total = probs.sum()
    if total == 0.0:
        raise ValueError(f"pool has no scheme with block size in {allowed_blocks}")
    return probs / total


def _stage_blocks(pool: MaskingPool, step: int, total_steps: int, inverted: bool) -> tuple[int, ...]:
    # four stages at exact quarters of the run; prefixes of the block pool
    stage = min(3, (4 * step) // max(1, total_steps))
    quarter = stage + 1 if not inverted else 4 - stage
    n = math.ceil(len(pool.blocks) * quarter / 4)
    return pool.blocks[:n]


def baseline_scheme_probs(
    kind: str,
    step: int,
    total_steps: int,
    pool: MaskingPool,
    fixed_block: int | None = None,
) -> np.ndarray:
    """Pool-indexed sampling probabilities of a baseline at a given step."""
    if kind == "mixed":
        return np.full(len(pool), 1.0 / len(pool))
    if kind == "mixed_prog":
        return _uniform_over(pool, _stage_blocks(pool, step, total_steps, inverted=False))
    if kind == "mixed_inv":
        return _uniform_over(pool, _stage_blocks(pool, step, total_steps, inverted=True))
    if kind in ("maskdp", "mtm"):
        return _uniform_over(pool, (1,))
    if kind == "fixed":
        if fixed_block is None or fixed_block not in pool.blocks:
            raise ValueError(f"fixed baseline needs a block size from the pool, got {fixed_block}")
        return _uniform_over(pool, (fixed_block,))
    raise ValueError(f"unknown baseline kind {kind!r}")


def baseline_next_scheme(
    kind: str,
    step: int,
    total_steps: int,
    pool: MaskingPool,
    rng: np.random.Generator,
    fixed_block: int | None = None,
) -> MaskScheme:
    """Draw the next masking scheme for a non-curriculum baseline."""
    if step >= total_steps:
        raise ValueError(f"step {step} outside run of {total_steps} steps")
    probs = baseline_scheme_probs(kind, step, total_steps, pool, fixed_block=fixed_block)
    return pool[draw_index(rng, probs)]
