#!/usr/bin/env python3
# Tour of the mask generators: how (ratio, block) shapes what the model sees.
# Each row prints a 32-token window; '#' = hidden token, '.' = visible.

import numpy as np

from currmask.masking import (
    MaskingPool,
    block_mask,
    goal_mask,
    prompt_mask,
    random_autoregressive_mask,
    random_mask,
)

L = 32
rng = np.random.default_rng(0)


def show(label, mask):
    art = "".join("." if m else "#" for m in mask)
    print(f"{label:<28} {art}   ({int((mask == 0).sum())} hidden)")


print("token order: s a s a s a ...  (even = state, odd = action)\n")

show("random p=0.35", random_mask(L, 0.35, rng))
show("random p=0.95", random_mask(L, 0.95, rng))
print()

for block in (2, 5, 10):
    show(f"block p=0.55 b={block}", block_mask(L, 0.55, block, rng))
print()

show("autoregressive p=0.35", random_autoregressive_mask(L, 0.35, rng))
show("autoregressive p=0.35", random_autoregressive_mask(L, 0.35, rng))
print()

show("prompt 8 timesteps", prompt_mask(L, 8))
show("goal at ts 6 and 12", goal_mask(L, (12, 24)))
print()

pool = MaskingPool()
print(f"default pool: {len(pool)} schemes = {len(pool.ratios)} ratios x {len(pool.blocks)} blocks")
print("scheme 0:", pool[0], " scheme 99:", pool[99])
