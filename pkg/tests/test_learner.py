"""Learner numerics: loss definition, gradients, overfitting, snapshots,
checkpoints, the copy-through contract, and the synthetic progress model."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from currmask.learner import (
    MaskedPredictionLearner,
    NetConfig,
    NumericsError,
    SyntheticLearner,
    masked_prediction_loss,
)
from currmask.masking import block_mask


def tiny_config(**overrides) -> NetConfig:
    base = dict(
        state_dim=4,
        action_dim=2,
        hidden=32,
        encoder_layers=1,
        decoder_layers=1,
        heads=2,
        context_tokens=16,
        seed=3,
    )
    base.update(overrides)
    return NetConfig(**base)


def random_batch(rng, batch=4, timesteps=8, ds=4, da=2, ratio=0.5):
    states = rng.normal(size=(batch, timesteps, ds)).astype(np.float32)
    actions = rng.normal(size=(batch, timesteps, da)).astype(np.float32)
    masks = np.stack([block_mask(2 * timesteps, ratio, 2, rng) for _ in range(batch)])
    return states, actions, masks


class TestLossDefinition:
    def test_perfect_reconstruction_zero_loss(self, rng):
        s = torch.as_tensor(rng.normal(size=(2, 4, 3)).astype(np.float32))
        a = torch.as_tensor(rng.normal(size=(2, 4, 2)).astype(np.float32))
        mask = torch.ones(2, 8, dtype=torch.int8)
        assert masked_prediction_loss(s, a, s, a, mask).item() == 0.0

    def test_zero_prediction_gives_mean_square_magnitude(self, rng):
        s = torch.as_tensor(rng.normal(size=(3, 5, 4)).astype(np.float64))
        a = torch.as_tensor(rng.normal(size=(3, 5, 2)).astype(np.float64))
        mask = torch.ones(3, 10, dtype=torch.int8)
        loss = masked_prediction_loss(torch.zeros_like(s), torch.zeros_like(a), s, a, mask)
        expected = float((s.square().sum() + a.square().sum()) / (s.numel() + a.numel()))
        assert loss.item() == pytest.approx(expected)

    def test_batch_order_invariance(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        perm = np.array([2, 0, 3, 1])
        assert learner.eval_loss(s, a, m) == pytest.approx(
            learner.eval_loss(s[perm], a[perm], m[perm]), abs=1e-6
        )

    def test_masked_only_variant_differs(self, rng):
        all_loss = MaskedPredictionLearner(tiny_config())
        masked_only = MaskedPredictionLearner(tiny_config(loss_on="masked"))
        s, a, m = random_batch(rng)
        assert all_loss.eval_loss(s, a, m) != pytest.approx(
            masked_only.eval_loss(s, a, m)
        )

    def test_shape_mismatch_rejected(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        with pytest.raises(ValueError):
            learner.eval_loss(s, a, m[:, :10])


class TestTrainStep:
    def test_overfit_fixed_batch(self, rng):
        learner = MaskedPredictionLearner(tiny_config(), learning_rate=3e-3)
        s, a, m = random_batch(rng, batch=8)
        initial = learner.eval_loss(s, a, m)
        for _ in range(500):
            learner.train_step(s, a, m)
        final = learner.eval_loss(s, a, m)
        assert final < 0.1 * initial

    def test_zero_learning_rate_freezes_parameters(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        before = learner.parameter_vector().copy()
        s, a, m = random_batch(rng)
        learner.train_step(s, a, m, lr=0.0)
        assert np.array_equal(learner.parameter_vector(), before)

    def test_returns_pre_step_loss(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        before = learner.eval_loss(s, a, m)
        reported = learner.train_step(s, a, m, lr=1e-3)
        assert reported == pytest.approx(before, abs=1e-6)

    def test_non_finite_batch_aborts_with_diagnostics(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        s[0, 0, 0] = np.inf
        with pytest.raises(NumericsError) as err:
            learner.train_step(s, a, m)
        assert "param_norms" in err.value.diagnostics

    def test_gradients_match_finite_differences(self, rng):
        learner = MaskedPredictionLearner(tiny_config(seed=11), dtype=torch.float64)
        s = rng.normal(size=(3, 8, 4))
        a = rng.normal(size=(3, 8, 2))
        m = np.stack([block_mask(16, 0.55, 2, rng) for _ in range(3)])

        loss = learner.loss_tensor(s, a, m)
        learner.net.zero_grad()
        loss.backward()
        params = list(learner.net.parameters())
        grads = [p.grad.detach().clone() for p in params]

        flat_index = []
        for pi, p in enumerate(params):
            for j in range(p.numel()):
                flat_index.append((pi, j))
        picks = rng.choice(len(flat_index), size=20, replace=False)
        h = 1e-4
        for pick in picks:
            pi, j = flat_index[int(pick)]
            with torch.no_grad():
                flat = params[pi].reshape(-1)
                orig = float(flat[j])
                flat[j] = orig + h
                up = float(learner.loss_tensor(s, a, m))
                flat[j] = orig - h
                down = float(learner.loss_tensor(s, a, m))
                flat[j] = orig
            fd = (up - down) / (2 * h)
            ag = float(grads[pi].reshape(-1)[j])
            denom = max(abs(fd), abs(ag), 1e-8)
            assert abs(fd - ag) / denom < 1e-3, f"param {pi} idx {j}: fd={fd} autograd={ag}"


class TestPredictTokens:
    def test_all_visible_copies_through(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, _ = random_batch(rng, batch=1)
        mask = np.ones(16, dtype=np.int8)
        out_s, out_a = learner.predict_tokens(s[0], a[0], mask)
        assert np.array_equal(out_s, s[0])
        assert np.array_equal(out_a, a[0])

    def test_visible_positions_never_altered(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng, batch=1, ratio=0.75)
        out_s, out_a = learner.predict_tokens(s[0], a[0], m[0])
        state_visible = m[0][0::2] == 1
        action_visible = m[0][1::2] == 1
        assert np.array_equal(out_s[state_visible], s[0][state_visible])
        assert np.array_equal(out_a[action_visible], a[0][action_visible])

    def test_deterministic(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng, batch=1)
        first = learner.predict_tokens(s[0], a[0], m[0])
        second = learner.predict_tokens(s[0], a[0], m[0])
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])

    def test_encoder_blind_to_hidden_values(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng, batch=1, ratio=0.55)
        out = learner.predict_tokens(s[0], a[0], m[0])
        s2, a2 = s[0].copy(), a[0].copy()
        hidden_states = m[0][0::2] == 0
        hidden_actions = m[0][1::2] == 0
        s2[hidden_states] += rng.normal(scale=100.0, size=(hidden_states.sum(), 4))
        a2[hidden_actions] += rng.normal(scale=100.0, size=(hidden_actions.sum(), 2))
        out2 = learner.predict_tokens(s2.astype(np.float32), a2.astype(np.float32), m[0])
        assert np.array_equal(out[0][hidden_states], out2[0][hidden_states])
        assert np.array_equal(out[1][hidden_actions], out2[1][hidden_actions])

    def test_fully_hidden_window_finite(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, _ = random_batch(rng, batch=1)
        mask = np.zeros(16, dtype=np.int8)
        out_s, out_a = learner.predict_tokens(s[0], a[0], mask)
        assert np.isfinite(out_s).all() and np.isfinite(out_a).all()

    def test_overfit_reconstruction_error_small(self, rng):
        learner = MaskedPredictionLearner(tiny_config(), learning_rate=3e-3)
        s, a, _ = random_batch(rng, batch=1)
        mask = block_mask(16, 0.35, 2, rng)[None, :]
        for _ in range(600):
            learner.train_step(s, a, np.repeat(mask, 1, axis=0))
        out_s, out_a = learner.predict_tokens(s[0], a[0], mask[0])
        hidden_states = mask[0][0::2] == 0
        hidden_actions = mask[0][1::2] == 0
        err = 0.0
        n = 0
        if hidden_states.any():
            err += float(((out_s[hidden_states] - s[0][hidden_states]) ** 2).sum())
            n += int(hidden_states.sum()) * 4
        if hidden_actions.any():
            err += float(((out_a[hidden_actions] - a[0][hidden_actions]) ** 2).sum())
            n += int(hidden_actions.sum()) * 2
        assert err / n < 0.05


class TestSnapshots:
    def test_snapshot_restore_bit_exact(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        learner.train_step(s, a, m, lr=1e-3)
        snap = learner.snapshot()
        reference = learner.parameter_vector().copy()
        for _ in range(3):
            learner.train_step(s, a, m, lr=1e-2)
        assert not np.array_equal(learner.parameter_vector(), reference)
        learner.restore(snap)
        assert np.array_equal(learner.parameter_vector(), reference)

    def test_eval_loss_is_side_effect_free(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng)
        before = learner.parameter_vector().copy()
        learner.eval_loss(s, a, m)
        learner.eval_losses(s, a, m)
        assert np.array_equal(learner.parameter_vector(), before)

    def test_checkpoint_round_trip(self, tmp_path, rng):
        learner = MaskedPredictionLearner(tiny_config(), learning_rate=2e-3)
        s, a, m = random_batch(rng)
        for _ in range(4):
            learner.train_step(s, a, m)
        path = tmp_path / "model.ckpt"
        learner.save_checkpoint(path, extra_manifest={"note": 1})
        loaded = MaskedPredictionLearner.load_checkpoint(path)
        assert np.array_equal(loaded.parameter_vector(), learner.parameter_vector())
        assert loaded.step_count == learner.step_count
        # optimizer moments restored: the next step matches exactly
        loaded_next = loaded.train_step(s, a, m)
        orig_next = learner.train_step(s, a, m)
        assert loaded_next == pytest.approx(orig_next, abs=0.0)
        assert np.array_equal(loaded.parameter_vector(), learner.parameter_vector())

    def test_checkpoint_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
        with pytest.raises(ValueError):
            MaskedPredictionLearner.load_checkpoint(path)


class TestAttentionDump:
    def test_decoder_attention_shapes_and_rows(self, rng):
        learner = MaskedPredictionLearner(tiny_config())
        s, a, m = random_batch(rng, batch=2)
        maps = learner.attention_maps(s, a, m)
        assert len(maps) == learner.config.decoder_layers
        for weights in maps:
            assert weights.shape == (2, learner.config.heads, 16, 16)
            assert np.allclose(weights.sum(axis=-1), 1.0, atol=1e-5)


class TestSyntheticLearner:
    def test_zero_transfer_constant_loss(self):
        learner = SyntheticLearner(base=np.array([1.0]), floor=np.array([0.5]),
                                   transfer=np.zeros((1, 1)))
        for _ in range(10):
            learner.train(0)
        assert learner.loss(0) == pytest.approx(1.5)

    def test_identity_transfer_exponential_decay(self):
        learner = SyntheticLearner(base=np.array([1.0]), floor=np.array([0.0]),
                                   transfer=np.eye(1))
        for n in range(5):
            assert learner.loss(0) == pytest.approx(np.exp(-n))
            learner.train(0)

    def test_cross_transfer_helps_other_arm(self):
        transfer = np.array([[0.1, 0.2], [0.0, 0.1]])
        learner = SyntheticLearner(base=np.ones(2), floor=np.zeros(2), transfer=transfer)
        before = learner.loss(0)
        learner.train(1)
        assert learner.loss(0) < before

    def test_losses_non_increasing_under_any_training(self, rng):
        k = 6
        learner = SyntheticLearner(
            base=rng.uniform(0.5, 2, size=k),
            floor=rng.uniform(0, 0.3, size=k),
            transfer=rng.uniform(0, 0.2, size=(k, k)),
        )
        previous = learner.per_scheme_losses()
        for _ in range(200):
            learner.train(int(rng.integers(k)))
            current = learner.per_scheme_losses()
            assert (current <= previous + 1e-12).all()
            previous = current

    def test_snapshot_restore(self):
        learner = SyntheticLearner(base=np.ones(2), floor=np.zeros(2), transfer=np.eye(2))
        snap = learner.snapshot()
        learner.train(0)
        learner.restore(snap)
        assert learner.counts.tolist() == [0, 0]

    def test_invalid_shapes_rejected(self):
        with pytest.raises(ValueError):
            SyntheticLearner(base=np.ones(2), floor=np.zeros(3), transfer=np.eye(2))
        with pytest.raises(ValueError):
            SyntheticLearner(base=np.ones(2), floor=np.zeros(2), transfer=-np.eye(2))
