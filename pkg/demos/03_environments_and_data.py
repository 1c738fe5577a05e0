#!/usr/bin/env python3
# The two built-in environments and the dataset pipeline: policy tiers of
# varying quality, deterministic generation, and the binary container format.

import tempfile
from pathlib import Path

import numpy as np

from currmask.data import (
    env_step,
    episode_rewards,
    generate_dataset,
    make_env,
    read_dataset,
    rollout_episode,
    sample_window,
    write_dataset,
)

for env_id in ("point_mass_2d", "chain_walker_1d"):
    env = make_env(env_id)
    print(f"{env_id}: Ds={env.state_dim} Da={env.action_dim} reward={env.reward_kind}")
    for tier in ("random", "pd_noisy", "pd"):
        rewards = [
            episode_rewards(env, rollout_episode(env, tier, 150, np.random.default_rng(s))).mean()
            for s in range(5)
        ]
        print(f"  {tier:<9} mean step reward {np.mean(rewards):+.4f}")
    print()

env = make_env("point_mass_2d")
state = np.array([0.0, 0.0, 0.0, 0.0])
print("hand-checkable step: push right from rest")
nxt, reward = env_step(env, state, np.array([1.0, 0.0]))
print(f"  next state {nxt}  reward {reward:.4f}\n")

root = Path(tempfile.mkdtemp())
trajs, manifest = generate_dataset(env, n_episodes=9, episode_len=100, seed=7)
write_dataset(root / "demo", trajs, manifest)
loaded, loaded_manifest = read_dataset(root / "demo")
print(f"wrote {len(trajs)} episodes to {root/'demo'}")
print(f"  mixture: {loaded_manifest['policy_mixture']}")
print(f"  round trip exact: {all(np.array_equal(a.states, b.states) for a, b in zip(trajs, loaded))}")

win = sample_window(loaded[0], 8, np.random.default_rng(1))
print(f"\nsampled window: {win.timesteps} timesteps = {win.token_count} tokens, "
      f"start {win.start_index}")
