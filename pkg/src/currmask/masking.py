"""Mask generators for interleaved state-action token windows.

A mask is a length-L int8 vector over the flat token sequence
(s_0, a_0, s_1, a_1, ...): 1 = visible, 0 = hidden.  Generators guarantee
exactly floor(ratio * L) zeros (block and token-wise variants), which keeps
per-batch shapes rectangular.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_RATIOS: tuple[float, ...] = (0.15, 0.35, 0.55, 0.75, 0.95)
DEFAULT_BLOCKS: tuple[int, ...] = tuple(range(1, 21))


class DegenerateMaskWarning(UserWarning):
    """Requested ratio masks zero tokens; an all-visible mask was returned."""


@dataclass(frozen=True)
class MaskScheme:
    """One corruption recipe: hide `ratio` of the tokens in blocks of `block`."""

    ratio: float
    block: int

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"mask ratio must be in (0, 1], got {self.ratio}")
        if self.block < 1:
            raise ValueError(f"block size must be >= 1, got {self.block}")


class MaskingPool:
    """Cartesian product of mask ratios and block sizes.

    Scheme order is ratio-major: index k = ratio_index * len(blocks) + block_index.
    This order is the contract for scheduler arm indices and metrics columns.
    """

    def __init__(
        self,
        ratios: tuple[float, ...] = DEFAULT_RATIOS,
        blocks: tuple[int, ...] = DEFAULT_BLOCKS,
    ) -> None:
        if not ratios or not blocks:
            raise ValueError("pool needs at least one ratio and one block size")
        self.ratios = tuple(float(r) for r in ratios)
        self.blocks = tuple(int(b) for b in blocks)
        self.schemes = [MaskScheme(r, b) for r in self.ratios for b in self.blocks]

    def __len__(self) -> int:
        return len(self.schemes)

    def __getitem__(self, k: int) -> MaskScheme:
        return self.schemes[k]

    def index_of(self, scheme: MaskScheme) -> int:
        return self.schemes.index(scheme)


def _check_args(length: int, ratio: float) -> int:
    if length < 2:
        raise ValueError(f"token count must be >= 2, got {length}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"mask ratio must be in (0, 1], got {ratio}")
    n_masked = int(np.floor(ratio * length))
    if n_masked == 0:
        warnings.warn(
            f"ratio {ratio} on {length} tokens masks nothing; returning all-visible mask",
            DegenerateMaskWarning,
            stacklevel=3,
        )
    return n_masked


def random_mask(length: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Hide a uniformly random subset of exactly floor(ratio * length) tokens."""
    n_masked = _check_args(length, ratio)
    mask = np.ones(length, dtype=np.int8)
    if n_masked == 0:
        return mask
    hidden = rng.choice(length, size=n_masked, replace=False)
    mask[hidden] = 0
    return mask


def block_mask(
    length: int,
    ratio: float,
    block: int,
    rng: np.random.Generator,
    full_blocks: bool = False,
) -> np.ndarray:
    """Hide exactly floor(ratio * length) tokens grouped into contiguous blocks.

    The sequence is tiled into floor((length - 1) / block) blocks after a random
    start offset in [0, block).  Blocks are visited in shuffled order and each
    contributes its token offsets j in [1, block) -- one position per block stays
    visible as an anchor.  With `full_blocks` the whole block (j in [0, block))
    is hidden instead.  The last floor(ratio * length) expanded positions are
    hidden; any shortfall is drawn from the tail of the ascending complement.
    """
    if block < 1:
        raise ValueError(f"block size must be >= 1, got {block}")
    if block > length:
        raise ValueError(f"block size {block} exceeds token count {length}")
    if block == 1:
        return random_mask(length, ratio, rng)

    n_masked = _check_args(length, ratio)
    mask = np.ones(length, dtype=np.int8)
    if n_masked == 0:
        return mask

    n_blocks = (length - 1) // block
    start = int(rng.integers(block))
    offsets = np.arange(0 if full_blocks else 1, block)
    if n_blocks > 0:
        order = rng.permutation(n_blocks)
        expanded = (order[:, None] * block + offsets[None, :] + start).ravel()
        expanded = expanded[expanded < length]  # tiling can overrun the window
    else:
        expanded = np.empty(0, dtype=np.int64)

    mask[expanded[-n_masked:]] = 0
    if expanded.size < n_masked:
        complement = np.setdiff1d(np.arange(length), expanded, assume_unique=False)
        mask[complement[expanded.size - n_masked:]] = 0
    return mask


def random_autoregressive_mask(
    length: int, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Token-wise random mask, then hide every position past the last hidden one."""
    mask = random_mask(length, ratio, rng)
    hidden = np.flatnonzero(mask == 0)
    if hidden.size:
        mask[hidden[-1]:] = 0
    return mask


def prompt_mask(length: int, prompt_timesteps: int) -> np.ndarray:
    """Visible prefix of `prompt_timesteps` (state, action) pairs; hidden tail."""
    if prompt_timesteps < 0:
        raise ValueError("prompt length must be >= 0")
    if 2 * prompt_timesteps >= length:
        raise ValueError(
            f"prompt of {prompt_timesteps} timesteps leaves nothing to predict "
            f"in {length} tokens"
        )
    mask = np.zeros(length, dtype=np.int8)
    mask[: 2 * prompt_timesteps] = 1
    return mask


def goal_mask(length: int, goal_token_indices: tuple[int, ...]) -> np.ndarray:
    """Visible start state (token 0) and listed goal state tokens; all else hidden.

    Goal indices must be even (state positions), strictly increasing, and < length.
    """
    prev = -1
    for idx in goal_token_indices:
        if idx % 2 != 0:
            raise ValueError(f"goal token index {idx} is an action position")
        if idx >= length:
            raise ValueError(f"goal token index {idx} out of range for {length} tokens")
        if idx <= prev:
            raise ValueError("goal token indices must be strictly increasing")
        prev = idx
    mask = np.zeros(length, dtype=np.int8)
    mask[0] = 1
    for idx in goal_token_indices:
        mask[idx] = 1
    return mask


def pack_mask(mask: np.ndarray) -> bytes:
    """Serialize to a u32 length prefix plus little-endian bit-packed payload."""
    m = np.asarray(mask, dtype=np.uint8)
    return struct.pack("<I", m.size) + np.packbits(m, bitorder="little").tobytes()


def unpack_mask(data: bytes) -> np.ndarray:
    (length,) = struct.unpack_from("<I", data)
    payload = np.frombuffer(data[4:], dtype=np.uint8)
    bits = np.unpackbits(payload, bitorder="little")
    if bits.size < length:
        raise ValueError("packed mask payload shorter than declared length")
    return bits[:length].astype(np.int8)
