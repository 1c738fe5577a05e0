"""Zero-shot evaluation harnesses: skill prompting and goal-conditioned planning.

Both evals share one closed-loop rollout engine.  A policy object maps the
current environment state (plus its own rollout memory) to the next action;
network policies do this by completing a masked token window, and the
`ReplayOracle` policy replays recorded actions so the harness itself can be
validated independently of any trained model.

Rollouts longer than the model context use a sliding token window: the most
recent timesteps stay visible, the original prompt's final state-action pair
is pinned at the front once it slides out, and for goal rollouts the next
future goal state is pinned at the window tail whenever it lies beyond the
window span.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EnvModel, NormStats, Trajectory, env_step

DEFAULT_REWARD_CHECKPOINTS = (30, 60, 90, 120)


@dataclass
class PromptEpisodeResult:
    cumulative_reward: float
    rewards: np.ndarray
    rollout_length: int
    traj_index: int
    prompt_start: int


@dataclass
class GoalPlanResult:
    goal_steps: tuple[int, ...]
    distances: np.ndarray  # closest-approach L2 per goal
    traj_index: int
    start: int


@dataclass
class EvalSummary:
    task: str
    mean: float
    stderr: float
    n: int
    extras: dict = field(default_factory=dict)


class ReplayOracle:
    """Marker policy source: replay the source trajectory's own actions."""


def rollout_closed_loop(
    env: EnvModel, start_state: np.ndarray, action_fn, horizon: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run `horizon` steps; states propagate through float32 like stored data.

    Returns (states, actions, rewards): states[t] is the state reached after
    actions[t].  Replaying the returned actions from start_state reproduces
    the state stream bit-for-bit.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    states = np.empty((horizon, env.state_dim), dtype=np.float32)
    actions = np.empty((horizon, env.action_dim), dtype=np.float32)
    rewards = np.empty(horizon, dtype=np.float64)
    state = np.asarray(start_state, dtype=np.float32)
    for t in range(horizon):
        action = np.clip(np.asarray(action_fn(t, state), dtype=np.float64), -1.0, 1.0)
        action = action.astype(np.float32)
        next_state, reward = env_step(env, state, action)
        state = next_state.astype(np.float32)
        states[t] = state
        actions[t] = action
        rewards[t] = reward
    return states, actions, rewards


class _WindowCompletionPolicy:
    """Shared machinery: keep rollout history, build one-window model inputs."""

    def __init__(self, learner, stats: NormStats, future_pad: int = 4) -> None:
        self.learner = learner
        self.stats = stats
        self.capacity = learner.window_timesteps
        self.future_pad = min(future_pad, max(0, self.capacity - 3))
        self.history: list[tuple[np.ndarray, np.ndarray]] = []

    def _norm_state(self, s: np.ndarray) -> np.ndarray:
        return ((np.asarray(s, dtype=np.float64) - self.stats.state_mean) / self.stats.state_std).astype(np.float32)

    def _norm_action(self, a: np.ndarray) -> np.ndarray:
        return ((np.asarray(a, dtype=np.float64) - self.stats.action_mean) / self.stats.action_std).astype(np.float32)

    def _denorm_action(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=np.float64) * self.stats.action_std + self.stats.action_mean

    def _predict_action_at(self, states, actions, mask, slot: int) -> np.ndarray:
        _, out_actions = self.learner.predict_tokens(states, actions, mask)
        return np.clip(self._denorm_action(out_actions[slot]), -1.0, 1.0)


class PromptContinuationPolicy(_WindowCompletionPolicy):
    """Skill prompting: act from a visible prompt prefix, then keep completing."""

    def __init__(self, learner, stats, prompt_states, prompt_actions, future_pad: int = 4) -> None:
        super().__init__(learner, stats, future_pad)
        prompt_states = np.asarray(prompt_states, dtype=np.float32)
        prompt_actions = np.asarray(prompt_actions, dtype=np.float32)
        if prompt_states.shape[0] < 1:
            raise ValueError("prompt needs at least one timestep")
        if 2 * prompt_states.shape[0] >= 2 * self.capacity:
            raise ValueError("prompt does not fit the model context")
        # pairs before the final prompt timestep enter history; the final pair
        # is executed as the first rollout action and pinned once it slides out
        for s, a in zip(prompt_states[:-1], prompt_actions[:-1]):
            self.history.append((self._norm_state(s), self._norm_action(a)))
        self.first_action = prompt_actions[-1]
        self.pin_index = prompt_states.shape[0] - 1
        self.pinned: tuple[np.ndarray, np.ndarray] = (
            self._norm_state(prompt_states[-1]),
            self._norm_action(prompt_actions[-1]),
        )

    def __call__(self, t: int, state: np.ndarray) -> np.ndarray:
        if t == 0:
            action = np.asarray(self.first_action, dtype=np.float64)
        else:
            action = self._completion_action(state)
        self.history.append((self._norm_state(state), self._norm_action(action)))
        return action

    def _completion_action(self, state: np.ndarray) -> np.ndarray:
        cap, ds = self.capacity, self.stats.state_mean.size
        da = self.stats.action_mean.size
        states = np.zeros((cap, ds), dtype=np.float32)
        actions = np.zeros((cap, da), dtype=np.float32)
        mask = np.zeros(2 * cap, dtype=np.int8)

        if len(self.history) + 1 <= cap:
            shown = list(self.history)
        else:
            recent = self.history[-(cap - 2 - self.future_pad):]
            slide_start = len(self.history) - len(recent)
            shown = ([self.pinned] if slide_start > self.pin_index else []) + recent
        for i, (s, a) in enumerate(shown):
            states[i], actions[i] = s, a
            mask[2 * i] = mask[2 * i + 1] = 1
        cur = len(shown)
        states[cur] = self._norm_state(state)
        mask[2 * cur] = 1  # current action and all future slots stay hidden
        return self._predict_action_at(states, actions, mask, cur)


class GoalReachingPolicy(_WindowCompletionPolicy):
    """Goal-conditioned planning: complete windows that expose future goal states."""

    def __init__(self, learner, stats, goal_steps, goal_states, future_pad: int = 4) -> None:
        super().__init__(learner, stats, future_pad)
        # listing order must not matter; the tail-pin fallback targets the
        # chronologically next goal
        self.goals = sorted(
            ((int(ts), self._norm_state(s)) for ts, s in zip(goal_steps, goal_states)),
            key=lambda g: g[0],
        )

    def __call__(self, t: int, state: np.ndarray) -> np.ndarray:
        action = self._completion_action(t, state)
        self.history.append((self._norm_state(state), self._norm_action(action)))
        return action

    def _completion_action(self, t: int, state: np.ndarray) -> np.ndarray:
        cap, ds = self.capacity, self.stats.state_mean.size
        da = self.stats.action_mean.size
        states = np.zeros((cap, ds), dtype=np.float32)
        actions = np.zeros((cap, da), dtype=np.float32)
        mask = np.zeros(2 * cap, dtype=np.int8)

        h = min(len(self.history), max(1, cap - 2 - self.future_pad))
        t0 = t - h
        for i, (s, a) in enumerate(self.history[len(self.history) - h:]):
            states[i], actions[i] = s, a
            mask[2 * i] = mask[2 * i + 1] = 1
        states[h] = self._norm_state(state)
        mask[2 * h] = 1

        placed_future_goal = False
        for g_ts, g_state in self.goals:
            rel = g_ts - t0
            if g_ts > t and h < rel < cap:
                states[rel] = g_state
                mask[2 * rel] = 1
                placed_future_goal = True
        if not placed_future_goal:
            upcoming = [g for g in self.goals if g[0] > t]
            target = upcoming[0] if upcoming else self.goals[-1]
            states[cap - 1] = target[1]
            mask[2 * (cap - 1)] = 1
        return self._predict_action_at(states, actions, mask, h)


def _stderr(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def skill_prompting_eval(
    model,
    env: EnvModel,
    validation: list[Trajectory],
    stats: NormStats,
    prompt_len: int = 8,
    rollout: int = 120,
    n_episodes: int = 20,
    seed: int = 0,
    future_pad: int = 4,
    reward_checkpoints: tuple[int, ...] = DEFAULT_REWARD_CHECKPOINTS,
) -> tuple[EvalSummary, list[PromptEpisodeResult]]:
    """Continue a prompt for `rollout` env steps; score by cumulative reward.

    Prompt starts are drawn uniformly from [0.1 * T, 0.85 * T].  The first
    executed action is the prompt's own final action (the environment is set
    to the prompt's final state); all later actions come from the model.
    """
    if not validation:
        raise ValueError("validation set is empty")
    rng = np.random.default_rng(seed)
    replay = isinstance(model, ReplayOracle)
    episodes: list[PromptEpisodeResult] = []
    for _ in range(n_episodes):
        idx = int(rng.integers(len(validation)))
        traj = validation[idx]
        t_len = traj.length
        lo = int(np.floor(0.1 * t_len))
        hi = int(np.floor(0.85 * t_len))
        if replay:
            hi = min(hi, t_len - prompt_len - rollout + 1)
        hi = min(hi, t_len - prompt_len)
        if hi < lo:
            raise ValueError(
                f"trajectory of length {t_len} too short for prompt {prompt_len} "
                f"and rollout {rollout}"
            )
        p_start = int(lo + rng.integers(hi - lo + 1))
        p_end = p_start + prompt_len - 1

        if replay:
            recorded = traj.actions
            policy = lambda t, state, _o=p_end, _a=recorded: _a[_o + t]
        else:
            policy = PromptContinuationPolicy(
                model,
                stats,
                traj.states[p_start : p_end + 1],
                traj.actions[p_start : p_end + 1],
                future_pad=future_pad,
            )
        _, _, rewards = rollout_closed_loop(env, traj.states[p_end], policy, rollout)
        episodes.append(
            PromptEpisodeResult(
                cumulative_reward=float(rewards.sum()),
                rewards=rewards,
                rollout_length=rollout,
                traj_index=idx,
                prompt_start=p_start,
            )
        )
    totals = np.array([e.cumulative_reward for e in episodes])
    extras = {}
    for cp in reward_checkpoints:
        if cp <= rollout:
            at_cp = np.array([float(e.rewards[:cp].sum()) for e in episodes])
            extras[f"reward@{cp}"] = (float(at_cp.mean()), _stderr(at_cp))
    summary = EvalSummary(
        task="skill_prompt",
        mean=float(totals.mean()) if totals.size else 0.0,
        stderr=_stderr(totals),
        n=n_episodes,
        extras=extras,
    )
    return summary, episodes


def goal_planning_eval(
    model,
    env: EnvModel,
    validation: list[Trajectory],
    stats: NormStats,
    goal_steps: tuple[int, ...] = (20, 40, 60, 80),
    rollout_budget: int = 100,
    n_episodes: int = 20,
    seed: int = 0,
    future_pad: int = 4,
) -> tuple[EvalSummary, list[GoalPlanResult]]:
    """Reach states recorded `goal_steps` ahead; score closest-approach L2."""
    if not validation:
        raise ValueError("validation set is empty")
    if max(goal_steps) > rollout_budget:
        raise ValueError("every goal step must lie within the rollout budget")
    rng = np.random.default_rng(seed)
    replay = isinstance(model, ReplayOracle)
    results: list[GoalPlanResult] = []
    for _ in range(n_episodes):
        idx = int(rng.integers(len(validation)))
        traj = validation[idx]
        max_start = traj.length - rollout_budget - 1
        if max_start < 0:
            raise ValueError(
                f"trajectory of length {traj.length} shorter than rollout budget "
                f"{rollout_budget} plus start margin"
            )
        start = int(rng.integers(max_start + 1))
        goal_states = [traj.states[start + g] for g in goal_steps]

        if replay:
            recorded = traj.actions
            policy = lambda t, state, _o=start, _a=recorded: _a[_o + t]
        else:
            policy = GoalReachingPolicy(model, stats, goal_steps, goal_states, future_pad=future_pad)
        states, _, _ = rollout_closed_loop(env, traj.states[start], policy, rollout_budget)
        visited = np.concatenate([traj.states[start][None, :], states])
        distances = np.array(
            [
                float(np.linalg.norm(visited - g[None, :], axis=1).min())
                for g in (np.asarray(g, dtype=np.float64) for g in goal_states)
            ]
        )
        results.append(
            GoalPlanResult(goal_steps=tuple(goal_steps), distances=distances, traj_index=idx, start=start)
        )
    per_episode = np.array([r.distances.mean() for r in results])
    extras = {}
    all_d = np.stack([r.distances for r in results])
    for j, g in enumerate(goal_steps):
        extras[f"distance@{g}"] = (float(all_d[:, j].mean()), _stderr(all_d[:, j]))
    summary = EvalSummary(
        task="goal_plan",
        mean=float(per_episode.mean()) if per_episode.size else 0.0,
        stderr=_stderr(per_episode),
        n=n_episodes,
        extras=extras,
    )
    return summary, results
