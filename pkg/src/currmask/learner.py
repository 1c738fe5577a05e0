"""Masked-prediction learners.

Two implementations behind one duck-typed surface:

* `MaskedPredictionLearner` -- a small bidirectional encoder-decoder
  transformer.  The encoder attends over visible tokens only (hidden tokens
  are gathered out before encoding), the decoder sees the full token grid
  with a learnable embedding substituted at hidden positions, and the loss is
  mean squared error over the entire input by default.
* `SyntheticLearner` -- a closed-form learning-progress model
  loss_k(n) = a_k * exp(-(T @ n)_k) + c_k used for fast, exact scheduler
  tests.

Both expose train/eval entry points plus bit-exact snapshot/restore.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

CHECKPOINT_MAGIC = b"CMCKPT01"


class NumericsError(RuntimeError):
    """Training produced a non-finite loss; carries a diagnostics dict."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class NetConfig:
    state_dim: int
    action_dim: int
    hidden: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 1
    heads: int = 2
    context_tokens: int = 32
    mlp_ratio: int = 2
    loss_on: str = "all"  # "all" per the entire-input objective, or "masked"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.context_tokens % 2 != 0:
            raise ValueError("context_tokens must be even (whole timesteps)")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden width must divide evenly across heads")
        if self.loss_on not in ("all", "masked"):
            raise ValueError(f"loss_on must be 'all' or 'masked', got {self.loss_on!r}")


class _Attention(nn.Module):
    """Fused-qkv bidirectional attention; attn_mask True = may attend."""

    def __init__(self, hidden: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.proj = nn.Linear(hidden, hidden)

    def forward(
        self,
        x: torch.Tensor,
        attn_mask: torch.Tensor | None = None,
        return_weights: bool = False,
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        b, l, h = x.shape
        qkv = self.qkv(x).reshape(b, l, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)
        weights = None
        if return_weights:
            scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
            if attn_mask is not None:
                scores = scores.masked_fill(~attn_mask, float("-inf"))
            weights = scores.softmax(dim=-1)
            out = weights @ v
        else:
            out = F.scaled_dot_product_attention(q, k, v, attn_mask=attn_mask)
        out = out.transpose(1, 2).reshape(b, l, h)
        return self.proj(out), weights


class _Block(nn.Module):
    """Pre-norm transformer block."""

    def __init__(self, hidden: int, heads: int, mlp_ratio: int) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(hidden)
        self.attn = _Attention(hidden, heads)
        self.norm2 = nn.LayerNorm(hidden)
        self.mlp = nn.Sequential(
            nn.Linear(hidden, mlp_ratio * hidden),
            nn.GELU(),
            nn.Linear(mlp_ratio * hidden, hidden),
        )

    def forward(
        self,
        x: torch.Tensor,
        attn_mask: torch.Tensor | None = None,
        return_weights: bool = False,
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        attn_out, weights = self.attn(self.norm1(x), attn_mask, return_weights)
        x = x + attn_out
        x = x + self.mlp(self.norm2(x))
        return x, weights


class MaskedPredictionNet(nn.Module):
    """Encoder over visible tokens only, decoder over the full interleaved grid."""

    def __init__(self, config: NetConfig) -> None:
        super().__init__()
        self.config = config
        h = config.hidden
        self.state_proj = nn.Linear(config.state_dim, h)
        self.action_proj = nn.Linear(config.action_dim, h)
        self.mask_embedding = nn.Parameter(torch.zeros(h))
        self.position_embedding = nn.Parameter(torch.zeros(config.context_tokens, h))
        self.modality_embedding = nn.Parameter(torch.zeros(2, h))  # 0 = state, 1 = action
        self.encoder = nn.ModuleList(
            _Block(h, config.heads, config.mlp_ratio) for _ in range(config.encoder_layers)
        )
        self.decoder = nn.ModuleList(
            _Block(h, config.heads, config.mlp_ratio) for _ in range(config.decoder_layers)
        )
        self.state_head = nn.Linear(h, config.state_dim)
        self.action_head = nn.Linear(h, config.action_dim)
        nn.init.normal_(self.mask_embedding, std=0.02)
        nn.init.normal_(self.position_embedding, std=0.02)
        nn.init.normal_(self.modality_embedding, std=0.02)

    def forward(
        self,
        states: torch.Tensor,
        actions: torch.Tensor,
        mask: torch.Tensor,
        return_attention: bool = False,
    ) -> tuple[torch.Tensor, torch.Tensor, list[torch.Tensor]]:
        """Reconstruct the window.

        states: (B, W, Ds); actions: (B, W, Da); mask: (B, 2W) with 1 = visible.
        Returns (state_pred (B, W, Ds), action_pred (B, W, Da), decoder attention).
        """
        b, w, _ = states.shape
        n_tokens = 2 * w
        if n_tokens > self.config.context_tokens:
            raise ValueError(
                f"{n_tokens} tokens exceed context capacity {self.config.context_tokens}"
            )
        if mask.shape != (b, n_tokens):
            raise ValueError(f"mask shape {tuple(mask.shape)} != {(b, n_tokens)}")

        h = self.config.hidden
        x = torch.empty(b, n_tokens, h, dtype=states.dtype, device=states.device)
        x[:, 0::2] = self.state_proj(states)
        x[:, 1::2] = self.action_proj(actions)
        pos = self.position_embedding[:n_tokens].to(x.dtype)
        modality = self.modality_embedding.to(x.dtype)[
            torch.arange(n_tokens, device=states.device) % 2
        ]
        x = x + pos + modality

        visible = mask.to(torch.bool)
        counts = visible.sum(dim=1)
        max_visible = int(counts.max().item())

        if max_visible == 0:
            scattered = x  # no encoder output is ever selected below
        else:
            # visible tokens first (stable keeps positional order), then hidden
            order = torch.argsort((~visible).to(torch.uint8), dim=1, stable=True)
            gather_idx = order[:, :max_visible]
            enc = torch.gather(x, 1, gather_idx.unsqueeze(-1).expand(-1, -1, h))
            attn_mask = None
            if int(counts.min().item()) != max_visible:
                allow = (
                    torch.arange(max_visible, device=x.device)[None, :] < counts[:, None]
                )
                # windows with nothing visible would have an all-False row (NaN
                # softmax); let them attend to their padding, outputs are unused
                allow[counts == 0] = True
                attn_mask = allow[:, None, None, :]
            for block in self.encoder:
                enc, _ = block(enc, attn_mask=attn_mask)
            scattered = torch.zeros_like(x)
            scattered.scatter_(1, gather_idx.unsqueeze(-1).expand(-1, -1, h), enc)

        dec = torch.where(visible.unsqueeze(-1), scattered, self.mask_embedding.to(x.dtype))
        dec = dec + pos + modality
        attention: list[torch.Tensor] = []
        for block in self.decoder:
            dec, weights = block(dec, return_weights=return_attention)
            if return_attention:
                attention.append(weights)

        state_pred = self.state_head(dec[:, 0::2])
        action_pred = self.action_head(dec[:, 1::2])
        return state_pred, action_pred, attention


def masked_prediction_loss(
    state_pred: torch.Tensor,
    action_pred: torch.Tensor,
    states: torch.Tensor,
    actions: torch.Tensor,
    mask: torch.Tensor,
    loss_on: str = "all",
) -> torch.Tensor:
    """Mean squared error per scalar token dimension.

    With loss_on="all" every position counts (reconstruction of the entire
    input); with "masked" only hidden positions contribute.
    """
    per_window = per_window_loss(state_pred, action_pred, states, actions, mask, loss_on)
    return per_window.mean()


def per_window_loss(
    state_pred: torch.Tensor,
    action_pred: torch.Tensor,
    states: torch.Tensor,
    actions: torch.Tensor,
    mask: torch.Tensor,
    loss_on: str = "all",
) -> torch.Tensor:
    """Per-window mean squared error, shape (B,)."""
    se_state = (state_pred - states) ** 2
    se_action = (action_pred - actions) ** 2
    if loss_on == "all":
        total = se_state.sum(dim=(1, 2)) + se_action.sum(dim=(1, 2))
        count = states[0].numel() + actions[0].numel()
        return total / count
    state_hidden = (mask[:, 0::2] == 0).unsqueeze(-1)
    action_hidden = (mask[:, 1::2] == 0).unsqueeze(-1)
    total = (se_state * state_hidden).sum(dim=(1, 2)) + (se_action * action_hidden).sum(dim=(1, 2))
    count = (
        state_hidden.sum(dim=(1, 2)) * states.shape[-1]
        + action_hidden.sum(dim=(1, 2)) * actions.shape[-1]
    )
    return total / torch.clamp(count, min=1)


class MaskedPredictionLearner:
    """Network learner with Adam training, snapshots, and checkpoint files."""

    def __init__(
        self,
        config: NetConfig,
        learning_rate: float = 1e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        dtype: torch.dtype = torch.float32,
    ) -> None:
        self.config = config
        self.learning_rate = learning_rate
        torch.manual_seed(config.seed)
        self.net = MaskedPredictionNet(config).to(dtype)
        self.optimizer = torch.optim.Adam(self.net.parameters(), lr=learning_rate, betas=betas)
        self.step_count = 0
        self._dtype = dtype

    @property
    def window_timesteps(self) -> int:
        return self.config.context_tokens // 2

    def _tensors(
        self, states: np.ndarray, actions: np.ndarray, mask: np.ndarray
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        s = torch.as_tensor(np.asarray(states), dtype=self._dtype)
        a = torch.as_tensor(np.asarray(actions), dtype=self._dtype)
        m = torch.as_tensor(np.ascontiguousarray(mask))
        if s.ndim == 2:
            s, a, m = s.unsqueeze(0), a.unsqueeze(0), m.unsqueeze(0)
        return s, a, m

    def loss_tensor(self, states, actions, mask, net=None) -> torch.Tensor:
        s, a, m = self._tensors(states, actions, mask)
        forward = net if net is not None else self.net
        state_pred, action_pred, _ = forward(s, a, m)
        return masked_prediction_loss(
            state_pred, action_pred, s, a, m, loss_on=self.config.loss_on
        )

    def train_step(self, states, actions, mask, lr: float | None = None) -> float:
        """One Adam step on the batch; returns the pre-step loss."""
        self.net.train()
        if lr is not None:
            for group in self.optimizer.param_groups:
                group["lr"] = lr
        loss = self.loss_tensor(states, actions, mask)
        value = float(loss.item())
        if not np.isfinite(value):
            raise NumericsError(
                f"non-finite training loss {value} at step {self.step_count}",
                diagnostics=self.diagnostics(loss=value),
            )
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.step_count += 1
        return value

    def eval_loss(self, states, actions, mask, scheme: int | None = None) -> float:
        self.net.eval()
        with torch.no_grad():
            return float(self.loss_tensor(states, actions, mask).item())

    def eval_losses(self, states, actions, mask) -> np.ndarray:
        """Per-window losses, shape (B,); used for chunked pool evaluation."""
        self.net.eval()
        s, a, m = self._tensors(states, actions, mask)
        with torch.no_grad():
            state_pred, action_pred, _ = self.net(s, a, m)
            per = per_window_loss(state_pred, action_pred, s, a, m, loss_on=self.config.loss_on)
        return per.numpy().astype(np.float64)

    def predict_tokens(self, states, actions, mask) -> tuple[np.ndarray, np.ndarray]:
        """Complete a window: visible tokens copy through untouched, hidden
        tokens are replaced by head outputs.  Operates in normalized space."""
        self.net.eval()
        s, a, m = self._tensors(states, actions, mask)
        with torch.no_grad():
            state_pred, action_pred, _ = self.net(s, a, m)
        state_visible = (m[:, 0::2] != 0).unsqueeze(-1)
        action_visible = (m[:, 1::2] != 0).unsqueeze(-1)
        out_states = torch.where(state_visible, s, state_pred)
        out_actions = torch.where(action_visible, a, action_pred)
        single = np.asarray(states).ndim == 2
        out_s = out_states.numpy().astype(np.float32)
        out_a = out_actions.numpy().astype(np.float32)
        return (out_s[0], out_a[0]) if single else (out_s, out_a)

    def attention_maps(self, states, actions, mask) -> list[np.ndarray]:
        """Raw decoder attention tensors for offline inspection."""
        self.net.eval()
        s, a, m = self._tensors(states, actions, mask)
        with torch.no_grad():
            _, _, attention = self.net(s, a, m, return_attention=True)
        return [w.numpy() for w in attention]

    def diagnostics(self, **extra) -> dict:
        with torch.no_grad():
            norms = {
                name: float(p.detach().norm().item()) for name, p in self.net.named_parameters()
            }
        return {"step": self.step_count, "param_norms": norms, **extra}

    # -- parameter snapshots ------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "params": {k: v.detach().clone() for k, v in self.net.state_dict().items()},
            "step_count": self.step_count,
        }

    def restore(self, snap: dict) -> None:
        self.net.load_state_dict({k: v.clone() for k, v in snap["params"].items()})
        self.step_count = snap["step_count"]

    def parameter_vector(self) -> np.ndarray:
        """All parameters flattened in declaration order, float32."""
        chunks = [p.detach().to(torch.float32).reshape(-1).numpy() for p in self.net.parameters()]
        return np.concatenate(chunks)

    def _load_parameter_vector(self, flat: np.ndarray) -> None:
        flat = np.array(flat, dtype=np.float32, copy=True)
        offset = 0
        with torch.no_grad():
            for p in self.net.parameters():
                n = p.numel()
                chunk = torch.as_tensor(flat[offset : offset + n], dtype=torch.float32)
                p.copy_(chunk.reshape(p.shape).to(p.dtype))
                offset += n
        if offset != flat.size:
            raise ValueError(f"parameter blob has {flat.size} floats, model needs {offset}")

    # -- checkpoint file ----------------------------------------------------

    def save_checkpoint(self, path: Path, extra_manifest: dict | None = None) -> None:
        """Manifest JSON + little-endian float32 parameter blob, then optimizer
        moment blobs so training can resume bit-exactly."""
        manifest = {
            "config": asdict(self.config),
            "step_count": self.step_count,
            "learning_rate": self.learning_rate,
            "param_count": int(sum(p.numel() for p in self.net.parameters())),
            "adam": self._adam_manifest(),
        }
        if extra_manifest:
            manifest["extra"] = extra_manifest
        blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(self.parameter_vector().astype("<f4").tobytes())
            for moments in self._adam_blobs():
                fh.write(moments.astype("<f4").tobytes())

    def _adam_manifest(self) -> dict:
        steps = []
        for p in self.net.parameters():
            state = self.optimizer.state.get(p, {})
            steps.append(float(state["step"]) if "step" in state else None)
        return {"steps": steps}

    def _adam_blobs(self) -> list[np.ndarray]:
        avg, sq = [], []
        for p in self.net.parameters():
            state = self.optimizer.state.get(p)
            if state:
                avg.append(state["exp_avg"].detach().to(torch.float32).reshape(-1).numpy())
                sq.append(state["exp_avg_sq"].detach().to(torch.float32).reshape(-1).numpy())
            else:
                avg.append(np.zeros(p.numel(), dtype=np.float32))
                sq.append(np.zeros(p.numel(), dtype=np.float32))
        return [np.concatenate(avg), np.concatenate(sq)]

    @classmethod
    def load_checkpoint(cls, path: Path) -> "MaskedPredictionLearner":
        raw = Path(path).read_bytes()
        if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (manifest_len,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
        start = len(CHECKPOINT_MAGIC) + 4
        manifest = json.loads(raw[start : start + manifest_len].decode("utf-8"))
        learner = cls(
            NetConfig(**manifest["config"]), learning_rate=manifest["learning_rate"]
        )
        n = manifest["param_count"]
        offset = start + manifest_len
        flat = np.frombuffer(raw, dtype="<f4", count=n, offset=offset)
        learner._load_parameter_vector(flat)
        learner.step_count = manifest["step_count"]

        adam_steps = manifest["adam"]["steps"]
        if any(s is not None for s in adam_steps):
            avg = np.frombuffer(raw, dtype="<f4", count=n, offset=offset + 4 * n).copy()
            sq = np.frombuffer(raw, dtype="<f4", count=n, offset=offset + 8 * n).copy()
            pos = 0
            for i, p in enumerate(learner.net.parameters()):
                size = p.numel()
                if adam_steps[i] is not None:
                    learner.optimizer.state[p] = {
                        "step": torch.tensor(adam_steps[i]),
                        "exp_avg": torch.as_tensor(avg[pos : pos + size]).reshape(p.shape).to(p.dtype),
                        "exp_avg_sq": torch.as_tensor(sq[pos : pos + size]).reshape(p.shape).to(p.dtype),
                    }
                pos += size
        return learner

    def checkpoint_manifest(self, path: Path) -> dict:
        raw = Path(path).read_bytes()
        (manifest_len,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
        start = len(CHECKPOINT_MAGIC) + 4
        return json.loads(raw[start : start + manifest_len].decode("utf-8"))


class SyntheticLearner:
    """Deterministic learning-progress model with cross-scheme transfer.

    loss_k = base_k * exp(-(transfer @ counts)_k) + floor_k, so every loss is
    non-increasing in every training count and the scheduler can be tested
    against exact arithmetic.
    """

    def __init__(self, base: np.ndarray, floor: np.ndarray, transfer: np.ndarray) -> None:
        self.base = np.asarray(base, dtype=np.float64)
        self.floor = np.asarray(floor, dtype=np.float64)
        self.transfer = np.asarray(transfer, dtype=np.float64)
        k = self.base.size
        if self.floor.shape != (k,) or self.transfer.shape != (k, k):
            raise ValueError("base (K,), floor (K,), transfer (K, K) required")
        if (self.base < 0).any() or (self.floor < 0).any() or (self.transfer < 0).any():
            raise ValueError("base, floor, and transfer entries must be >= 0")
        self.counts = np.zeros(k, dtype=np.int64)

    @property
    def arm_count(self) -> int:
        return int(self.base.size)

    def per_scheme_losses(self) -> np.ndarray:
        return self.base * np.exp(-self.transfer @ self.counts) + self.floor

    def loss(self, scheme: int) -> float:
        return float(self.per_scheme_losses()[scheme])

    def train(self, scheme: int) -> None:
        self.counts[scheme] += 1

    def train_step(self, states=None, actions=None, mask=None, scheme: int = 0) -> float:
        value = self.loss(scheme)
        self.train(scheme)
        return value

    def eval_loss(self, states=None, actions=None, mask=None, scheme: int = 0) -> float:
        return self.loss(scheme)

    def snapshot(self) -> dict:
        return {"counts": self.counts.copy()}

    def restore(self, snap: dict) -> None:
        self.counts = snap["counts"].copy()
