#!/usr/bin/env python3
# The bandit curriculum on a synthetic learner with a closed-form loss.
# Arm 0 transfers to every task; the curriculum should discover and exploit
# it while a uniform sampler spreads its training budget evenly.

import numpy as np

from currmask import scheduler as S
from currmask.learner import SyntheticLearner
from currmask.masking import MaskingPool

K = 10
INTERVALS = 600

transfer = np.zeros((K, K))
transfer[:, 0] = 0.004  # training arm 0 helps all tasks
for i in range(1, K):
    transfer[i, i] = 0.002  # other arms only help themselves


def fresh_learner():
    return SyntheticLearner(base=np.ones(K), floor=np.full(K, 0.05), transfer=transfer)


pool = MaskingPool(ratios=(0.5,), blocks=tuple(range(1, K + 1)))
rng = np.random.default_rng(7)

learner = fresh_learner()
state = S.init_scheduler(K, rng, epsilon=0.2, gamma=0.1)
loss_before = S.compute_target_loss(learner, pool)
print(f"initial target loss: {loss_before:.4f}\n")
print(f"{'interval':>8} {'target':>8} {'arm0 prob':>10}  pull counts")

for step in range(1, INTERVALS + 1):
    learner.train(state.current_arm)
    loss_after = S.compute_target_loss(learner, pool)
    snap = S.ProgressSnapshot(step=step, loss_before=loss_before, loss_after=loss_after)
    state, record = S.curriculum_step(state, snap, pool, rng)
    loss_before = loss_after
    if step % 100 == 0:
        probs = S.sampling_distribution(state)
        print(f"{step:>8} {loss_after:>8.4f} {probs[0]:>10.3f}  {learner.counts.tolist()}")

uniform = fresh_learner()
rng_u = np.random.default_rng(7)
for step in range(INTERVALS):
    scheme = S.baseline_next_scheme("mixed", step, INTERVALS, pool, rng_u)
    uniform.train(pool.index_of(scheme))

print(f"\nafter {INTERVALS} intervals:")
print(f"  curriculum target loss: {S.compute_target_loss(learner, pool):.4f}")
print(f"  uniform    target loss: {S.compute_target_loss(uniform, pool):.4f}")
