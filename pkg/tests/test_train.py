import numpy as np
import pytest

from midzone.corpus import write_embeddings, write_triplets
from midzone.errors import ConfigMismatch, FormatError, ShapeMismatch, TruncatedFile
from midzone.losses import LossConfig
from midzone.negatives import MidZoneConfig
from midzone.train import (
    Checkpoint,
    TrainConfig,
    adamw_step,
    config_from_dict,
    config_hash,
    config_to_dict,
    cosine_lr,
    init_optimizer,
    load_checkpoint,
    save_checkpoint,
    train,
)

from helpers import make_corpus, make_triplet


def tiny_problem(rng, n=12, dim=5, n_queries=6, subset_size=0):
    corpus = make_corpus(rng, n=n, dim=dim)
    trips = [
        make_triplet(rng, corpus, with_attrs=("color",), subset_size=subset_size)
        for _ in range(n_queries)
    ]
    return corpus, trips


def params_equal(a, b):
    return set(a) == set(b) and all(np.array_equal(a[k], b[k]) for k in a)


class TestCosineLR:
    def test_endpoints_and_midpoint(self):
        assert cosine_lr(0, 100, 0.5) == pytest.approx(0.5)
        assert cosine_lr(100, 100, 0.5) == pytest.approx(0.0, abs=1e-16)
        assert cosine_lr(50, 100, 0.5) == pytest.approx(0.25)

    def test_monotone_decreasing(self):
        vals = [cosine_lr(s, 60, 1.0) for s in range(61)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_bounds_checked(self):
        with pytest.raises(FormatError):
            cosine_lr(-1, 10, 1.0)
        with pytest.raises(FormatError):
            cosine_lr(11, 10, 1.0)
        with pytest.raises(FormatError):
            cosine_lr(0, 0, 1.0)


class TestAdamW:
    def test_first_step_hand_value(self):
        # scalar parameter 1.0, gradient 1.0, lr 0.1, no decay:
        # m_hat = v_hat = 1 after bias correction, so the update is
        # 0.1 / (1 + 1e-8) and theta lands at 0.900000001 (9 ulp shy of 0.9).
        params = {"x": np.array([1.0])}
        state = init_optimizer(params, lr_base=0.1, weight_decay=0.0)
        adamw_step(state, {"x": np.array([1.0])}, params, lr_t=0.1)
        want = 1.0 - 0.1 / (1.0 + 1e-8)
        assert params["x"][0] == pytest.approx(want, abs=1e-12)
        assert abs(params["x"][0] - 0.900000001) < 1e-9
        assert state.t == 1

    def test_decay_only_when_gradient_zero(self):
        params = {"x": np.array([2.0, -3.0])}
        state = init_optimizer(params, lr_base=0.1, weight_decay=0.5)
        adamw_step(state, {"x": np.zeros(2)}, params, lr_t=0.1)
        # zero gradient leaves the moment estimate at zero; only the
        # decoupled decay theta * (1 - lr*wd) applies
        assert np.allclose(params["x"], np.array([2.0, -3.0]) * (1 - 0.1 * 0.5), atol=1e-15)

    def test_two_steps_match_reference_recurrence(self, rng):
        shape = (3, 2)
        params = {"w": rng.normal(size=shape)}
        theta = params["w"].copy()
        g1, g2 = rng.normal(size=shape), rng.normal(size=shape)
        state = init_optimizer(params, lr_base=0.05, weight_decay=0.01)
        adamw_step(state, {"w": g1}, params, lr_t=0.05)
        adamw_step(state, {"w": g2}, params, lr_t=0.03)
        # reference: explicit loop over the textbook recurrence
        m = np.zeros(shape)
        v = np.zeros(shape)
        for t, (g, lr) in enumerate([(g1, 0.05), (g2, 0.03)], start=1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9 ** t)
            v_hat = v / (1 - 0.999 ** t)
            theta = theta - lr * (m_hat / (np.sqrt(v_hat) + 1e-8) + 0.01 * theta)
        assert np.allclose(params["w"], theta, atol=1e-14)

    def test_missing_gradient_rejected(self):
        params = {"x": np.ones(2), "y": np.ones(2)}
        state = init_optimizer(params, lr_base=0.1)
        with pytest.raises(ShapeMismatch):
            adamw_step(state, {"x": np.ones(2)}, params, lr_t=0.1)

    def test_shape_mismatch_rejected(self):
        params = {"x": np.ones(2)}
        state = init_optimizer(params, lr_base=0.1)
        with pytest.raises(ShapeMismatch):
            adamw_step(state, {"x": np.ones(3)}, params, lr_t=0.1)


class TestTrainConfig:
    def test_dict_roundtrip(self):
        cfg = TrainConfig(
            total_epochs=20, batch_size=7, seed=3, warmup_epochs=5,
            loss=LossConfig(tau=0.1, lambda_rank=0.5),
            midzone=MidZoneConfig(mode="absolute", alpha=-0.5, beta=0.5),
            lr_base=0.01, freeze_sample=True,
        )
        doc = config_to_dict(cfg)
        back = config_from_dict(doc)
        assert back == cfg
        assert config_hash(back) == config_hash(cfg)

    def test_hash_changes_with_any_field(self):
        base = TrainConfig(total_epochs=20)
        assert config_hash(TrainConfig(total_epochs=25)) != config_hash(base)
        assert config_hash(TrainConfig(total_epochs=20, seed=1)) != config_hash(base)
        assert (
            config_hash(TrainConfig(total_epochs=20, loss=LossConfig(tau=0.08)))
            != config_hash(base)
        )

    def test_hash_insensitive_to_numeric_spelling(self):
        # an int-typed JSON value for a float field must not change the hash
        d1 = config_to_dict(TrainConfig(total_epochs=10, lr_base=1.0))
        d2 = dict(d1)
        d2["lr_base"] = 1  # json round-trips may drop the decimal point
        assert config_hash(config_from_dict(d1)) == config_hash(config_from_dict(d2))

    def test_unknown_keys_rejected(self):
        doc = config_to_dict(TrainConfig(total_epochs=10))
        doc["learning_rate"] = 0.1
        with pytest.raises(FormatError, match="learning_rate"):
            config_from_dict(doc)

    def test_requires_total_epochs(self):
        with pytest.raises(FormatError):
            config_from_dict({"batch_size": 4})

    def test_bad_types_rejected(self):
        doc = config_to_dict(TrainConfig(total_epochs=10))
        doc["batch_size"] = "many"
        with pytest.raises(FormatError):
            config_from_dict(doc)
        doc = config_to_dict(TrainConfig(total_epochs=10))
        doc["total_epochs"] = True  # bool is not an epoch count
        with pytest.raises(FormatError):
            config_from_dict(doc)

    def test_validation(self):
        with pytest.raises(FormatError):
            TrainConfig(total_epochs=10, batch_size=0)
        with pytest.raises(FormatError):
            TrainConfig(total_epochs=10, lr_base=0.0)
        with pytest.raises(FormatError):
            TrainConfig(total_epochs=10, kl_candidates="all")
        with pytest.raises(FormatError):
            TrainConfig(total_epochs=3, num_intervals=5)


class TestTrainLoop:
    def test_deterministic_repeat(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=6, batch_size=4, seed=5, warmup_epochs=1)
        r1 = train(cfg, trips, corpus)
        r2 = train(cfg, trips, corpus)
        assert params_equal(r1.checkpoint.params, r2.checkpoint.params)
        assert r1.train_log == r2.train_log
        assert r1.refresh_log == r2.refresh_log

    def test_seed_changes_trajectory(self, rng):
        corpus, trips = tiny_problem(rng)
        r1 = train(TrainConfig(total_epochs=6, batch_size=4, seed=5, warmup_epochs=1),
                   trips, corpus)
        r2 = train(TrainConfig(total_epochs=6, batch_size=4, seed=6, warmup_epochs=1),
                   trips, corpus)
        assert not params_equal(r1.checkpoint.params, r2.checkpoint.params)

    def test_log_shapes_and_refresh_count(self, rng):
        corpus, trips = tiny_problem(rng, n_queries=5)
        cfg = TrainConfig(total_epochs=11, batch_size=2, seed=0, warmup_epochs=1,
                          num_intervals=5)
        result = train(cfg, trips, corpus)
        steps_per_epoch = (5 + 1) // 2  # ceil(5 / 2)
        assert len(result.train_log) == 11 * steps_per_epoch
        assert result.checkpoint.global_step == 11 * steps_per_epoch
        # warm-up contributes one leading row, then one per interval refresh
        assert len(result.refresh_log) == 1 + 5
        assert result.refresh_log[0].epoch == 0
        assert result.refresh_log[0].mean_set_size == corpus.count - 1
        assert [r.epoch for r in result.refresh_log[1:]] == cfg.schedule.refresh_epochs()

    def test_no_warmup_has_no_leading_row(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=5, batch_size=4, seed=0, warmup_epochs=0,
                          num_intervals=5)
        result = train(cfg, trips, corpus)
        assert len(result.refresh_log) == 5
        assert [r.epoch for r in result.refresh_log] == [0, 1, 2, 3, 4]

    def test_warmup_equals_total_never_refreshes(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=4, batch_size=4, seed=0, warmup_epochs=4)
        result = train(cfg, trips, corpus)
        assert [r.epoch for r in result.refresh_log] == [0]
        assert result.checkpoint.phase == "warmup"
        assert result.checkpoint.set_members is None

    def test_losses_finite_and_lr_follows_schedule(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=5, batch_size=3, seed=1)
        result = train(cfg, trips, corpus)
        total_steps = result.checkpoint.global_step
        for i, row in enumerate(result.train_log):
            assert np.isfinite(row.l_total)
            assert row.l_kl >= 0.0 and row.l_main >= 0.0
            assert row.lr == pytest.approx(cosine_lr(i, total_steps, cfg.lr_base))

    def test_freeze_sample_repeats_one_negative(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=5, batch_size=6, seed=2, freeze_sample=True)
        result = train(cfg, trips, corpus)
        assert result.checkpoint.frozen_samples is not None
        assert result.checkpoint.frozen_samples.shape == (len(trips),)

    def test_stop_after_partial_run(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=8, batch_size=4, seed=3, warmup_epochs=1)
        partial = train(cfg, trips, corpus, stop_after_epoch=3)
        assert partial.checkpoint.epoch == 3
        assert partial.checkpoint.global_step == 3 * 2  # ceil(6/4) = 2 per epoch

    def test_resume_matches_uninterrupted(self, rng):
        corpus, trips = tiny_problem(rng, n_queries=7, subset_size=0)
        cfg = TrainConfig(total_epochs=9, batch_size=3, seed=4, warmup_epochs=2)
        full = train(cfg, trips, corpus)
        for cut in (1, 4, 7):
            part = train(cfg, trips, corpus, stop_after_epoch=cut)
            resumed = train(cfg, trips, corpus, resume=part.checkpoint)
            assert params_equal(resumed.checkpoint.params, full.checkpoint.params)
            assert resumed.train_log == full.train_log
            assert resumed.refresh_log == full.refresh_log
            assert resumed.checkpoint.rng_state == full.checkpoint.rng_state

    def test_resume_rejects_other_config(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg1 = TrainConfig(total_epochs=6, batch_size=4, seed=1, warmup_epochs=1)
        part = train(cfg1, trips, corpus, stop_after_epoch=2)
        cfg2 = TrainConfig(total_epochs=6, batch_size=4, seed=2, warmup_epochs=1)
        with pytest.raises(ConfigMismatch):
            train(cfg2, trips, corpus, resume=part.checkpoint)

    def test_resume_rejects_other_corpus(self, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=6, batch_size=4, seed=1, warmup_epochs=1)
        part = train(cfg, trips, corpus, stop_after_epoch=2)
        other = make_corpus(np.random.default_rng(99), n=corpus.count, dim=corpus.dim)
        with pytest.raises(ConfigMismatch):
            train(cfg, trips, other, resume=part.checkpoint)

    def test_threads_do_not_change_result(self, rng):
        corpus, trips = tiny_problem(rng, n_queries=8)
        cfg = TrainConfig(total_epochs=5, batch_size=8, seed=6)
        r1 = train(cfg, trips, corpus, threads=1)
        r4 = train(cfg, trips, corpus, threads=4)
        assert params_equal(r1.checkpoint.params, r4.checkpoint.params)
        assert r1.train_log == r4.train_log

    def test_batch_kl_mode_differs_from_corpus(self, rng):
        corpus, trips = tiny_problem(rng, n=20, n_queries=6)
        base = dict(total_epochs=5, batch_size=6, seed=7)
        r_corpus = train(TrainConfig(**base, kl_candidates="corpus"), trips, corpus)
        r_batch = train(TrainConfig(**base, kl_candidates="batch"), trips, corpus)
        assert r_corpus.train_log[0].l_kl != r_batch.train_log[0].l_kl

    def test_empty_triplets_rejected(self, rng):
        corpus, _ = tiny_problem(rng)
        with pytest.raises(FormatError):
            train(TrainConfig(total_epochs=5), [], corpus)


class TestCheckpointIO:
    def _trained(self, rng, **kw):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=6, batch_size=4, seed=8, warmup_epochs=1, **kw)
        result = train(cfg, trips, corpus)
        return corpus, trips, cfg, result.checkpoint

    def test_roundtrip_preserves_everything(self, tmp_path, rng):
        corpus, trips, cfg, ckpt = self._trained(rng)
        p = tmp_path / "c.dqe"
        save_checkpoint(p, ckpt)
        back = load_checkpoint(p)
        assert back.config == cfg
        assert back.epoch == ckpt.epoch
        assert back.global_step == ckpt.global_step
        assert back.opt_t == ckpt.opt_t
        assert back.phase == ckpt.phase
        assert params_equal(back.params, ckpt.params)
        assert params_equal(back.opt_m, ckpt.opt_m)
        assert params_equal(back.opt_v, ckpt.opt_v)
        assert back.rng_state == ckpt.rng_state
        assert back.train_log == ckpt.train_log
        assert back.refresh_log == ckpt.refresh_log
        assert back.corpus_fingerprint == ckpt.corpus_fingerprint
        assert len(back.set_members) == len(ckpt.set_members)
        for a, b in zip(back.set_members, ckpt.set_members):
            assert np.array_equal(a, b)
        assert np.array_equal(back.set_fallbacks, ckpt.set_fallbacks)
        assert np.array_equal(back.frozen_bounds, ckpt.frozen_bounds)

    def test_rewrite_is_byte_identical(self, tmp_path, rng):
        _, _, _, ckpt = self._trained(rng)
        p1, p2 = tmp_path / "a.dqe", tmp_path / "b.dqe"
        save_checkpoint(p1, ckpt)
        save_checkpoint(p2, load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_resume_from_disk(self, tmp_path, rng):
        corpus, trips = tiny_problem(rng)
        cfg = TrainConfig(total_epochs=7, batch_size=4, seed=9, warmup_epochs=1)
        full = train(cfg, trips, corpus)
        part = train(cfg, trips, corpus, stop_after_epoch=3)
        p = tmp_path / "part.dqe"
        save_checkpoint(p, part.checkpoint)
        resumed = train(cfg, trips, corpus, resume=load_checkpoint(p))
        assert params_equal(resumed.checkpoint.params, full.checkpoint.params)
        assert resumed.train_log == full.train_log

    def test_magic_and_truncation(self, tmp_path, rng):
        _, _, _, ckpt = self._trained(rng)
        p = tmp_path / "c.dqe"
        save_checkpoint(p, ckpt)
        blob = p.read_bytes()
        bad = tmp_path / "bad.dqe"
        bad.write_bytes(b"XXXX" + blob[4:])
        from midzone.errors import BadMagic

        with pytest.raises(BadMagic):
            load_checkpoint(bad)
        for cut in (8, 40, len(blob) // 2, len(blob) - 1):
            bad.write_bytes(blob[:cut])
            with pytest.raises((TruncatedFile, FormatError)):
                load_checkpoint(bad)
        bad.write_bytes(blob + b"\x00")
        with pytest.raises(TruncatedFile):
            load_checkpoint(bad)

    def test_config_hash_guard(self, tmp_path, rng):
        _, _, _, ckpt = self._trained(rng)
        p = tmp_path / "c.dqe"
        save_checkpoint(p, ckpt)
        blob = bytearray(p.read_bytes())
        blob[9] ^= 0xFF  # inside the stored config-hash digest
        p.write_bytes(bytes(blob))
        with pytest.raises(ConfigMismatch):
            load_checkpoint(p)
