import copy
import json

import pytest
import torch

from satdehaze.data import write_synthetic_dataset
from satdehaze.discriminator import DiscriminatorSpec
from satdehaze.errors import EmptyDatasetError, NonFiniteLossError, ShapeMismatchError
from satdehaze.generator import GeneratorSpec
from satdehaze.losses import gan_loss_for_generator
from satdehaze.trainer import (
    TrainConfig,
    init_train_state,
    load_train_state,
    save_train_state,
    train,
    train_step,
)

GEN8 = GeneratorSpec(base_channels=8, num_inception_blocks=1)
DISC8 = DiscriminatorSpec(base_channels=8)


def small_config(**kwargs):
    defaults = dict(seed=5, epochs=50, resize="bicubic-48", checkpoint_every=50)
    defaults.update(kwargs)
    return TrainConfig(**defaults)


def random_batch(seed, n=1, size=48):
    gen = torch.Generator().manual_seed(seed)
    hazy = (torch.rand(n, 3, size, size, generator=gen) * 2 - 1).float()
    clear = (torch.rand(n, 3, size, size, generator=gen) * 2 - 1).float()
    return hazy, clear


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("smallset")
    return write_synthetic_dataset(root, n=4, severities=["moderate"], seed=5, size=48)


class TestTrainConfig:
    def test_defaults_match_protocol(self):
        cfg = TrainConfig()
        assert (cfg.lr, cfg.beta1, cfg.beta2, cfg.epochs) == (2e-4, 0.5, 0.999, 100)
        assert cfg.lambda_l1 == 100.0 and cfg.batch_size == 1

    @pytest.mark.parametrize("kwargs", [
        dict(epochs=0),
        dict(lr=0.0),
        dict(beta1=0.9, beta2=0.5),
        dict(beta1=-0.1),
        dict(batch_size=0),
        dict(resize="nearest-256"),
        dict(resize="bicubic-30"),
        dict(resize="bicubic-50"),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)

    def test_resize_plan(self):
        assert TrainConfig(resize="random-crop-256").resize_plan() == ("random-crop", 256)
        assert TrainConfig(resize="bicubic-64").resize_plan() == ("bicubic", 64)


class TestTrainStep:
    def test_report_identities_and_determinism(self):
        reports = []
        for _run in range(2):
            state = init_train_state(GEN8, DISC8, small_config())
            run_reports = []
            for step_seed in range(6):
                hazy, clear = random_batch(100 + step_seed)
                run_reports.append(train_step(state, hazy, clear))
            reports.append(run_reports)
        for r in reports[0]:
            assert abs(r.l_gen - (r.l_gan + 100.0 * r.l_l1)) <= 1e-6
            assert abs(r.l_d - (r.l_real + r.l_fake)) <= 1e-6
        assert reports[0] == reports[1]  # bit-for-bit loss trace

    def test_step_counter(self):
        state = init_train_state(GEN8, DISC8, small_config())
        hazy, clear = random_batch(1)
        assert train_step(state, hazy, clear).step == 1
        assert train_step(state, hazy, clear).step == 2

    def test_generator_step_descends_gan_loss(self):
        # lambda = 0 isolates the adversarial term; after the combined step,
        # the updated generator must beat the pre-step generator against the
        # same (updated) discriminator
        cfg = small_config(lr=1e-2, lambda_l1=0.0)
        state = init_train_state(GEN8, DISC8, cfg)
        hazy, clear = random_batch(7)
        gen_before = copy.deepcopy(state.generator)
        train_step(state, hazy, clear)
        state.discriminator.train()
        with torch.no_grad():
            old_fake = gen_before.train()(hazy)
            new_fake = state.generator.train()(hazy)
            loss_old = float(gan_loss_for_generator(state.discriminator(hazy, old_fake)))
            loss_new = float(gan_loss_for_generator(state.discriminator(hazy, new_fake)))
        assert loss_new < loss_old

    def test_updates_both_networks(self):
        state = init_train_state(GEN8, DISC8, small_config())
        g0 = copy.deepcopy(state.generator.state_dict())
        d0 = copy.deepcopy(state.discriminator.state_dict())
        hazy, clear = random_batch(3)
        train_step(state, hazy, clear)
        assert any(
            not torch.equal(g0[k], v) for k, v in state.generator.state_dict().items()
        )
        assert any(
            not torch.equal(d0[k], v) for k, v in state.discriminator.state_dict().items()
        )

    def test_shape_mismatch(self):
        state = init_train_state(GEN8, DISC8, small_config())
        with pytest.raises(ShapeMismatchError):
            train_step(state, torch.zeros(1, 3, 48, 48), torch.zeros(1, 3, 48, 44))

    def test_non_finite_loss_aborts(self):
        state = init_train_state(GEN8, DISC8, small_config())
        hazy, clear = random_batch(2)
        hazy[0, 0, 0, 0] = float("nan")
        with pytest.raises(NonFiniteLossError):
            train_step(state, hazy, clear)

    def test_parameters_stay_finite_over_many_steps(self):
        state = init_train_state(GEN8, DISC8, small_config())
        for step_seed in range(60):
            hazy, clear = random_batch(200 + step_seed)
            train_step(state, hazy, clear)
        for net in (state.generator, state.discriminator):
            assert all(torch.isfinite(p).all() for p in net.parameters())


class TestTrainLoop:
    def test_epoch_accounting_and_logs(self, small_dataset, tmp_path):
        cfg = small_config(epochs=2)
        state = train(cfg, small_dataset, tmp_path / "run", GEN8, DISC8)
        assert state.epoch == 2 and state.step == 8
        lines = (tmp_path / "run" / "losses.jsonl").read_text().splitlines()
        assert len(lines) == 8
        steps = [json.loads(l)["step"] for l in lines]
        assert steps == list(range(1, 9))
        assert (tmp_path / "run" / "summary.json").exists()
        assert (tmp_path / "run" / "generator_final.sdnt").exists()
        assert (tmp_path / "run" / "state_final.sdnt").exists()

    def test_empty_dataset_rejected(self, small_dataset, tmp_path):
        empty = small_dataset.__class__(name="none", split_tag="train", pairs=())
        with pytest.raises(EmptyDatasetError):
            train(small_config(), empty, tmp_path / "run", GEN8, DISC8)

    def test_resume_equals_uninterrupted(self, small_dataset, tmp_path):
        cfg = small_config(epochs=50)
        full = train(cfg, small_dataset, tmp_path / "full", GEN8, DISC8, max_steps=20)
        half = train(cfg, small_dataset, tmp_path / "half", GEN8, DISC8, max_steps=10)
        resumed = train(cfg, small_dataset, tmp_path / "resumed",
                        resume_from=tmp_path / "half" / "state_final.sdnt", max_steps=20)
        for k, v in full.generator.state_dict().items():
            assert torch.equal(v, resumed.generator.state_dict()[k]), k
        for k, v in full.discriminator.state_dict().items():
            assert torch.equal(v, resumed.discriminator.state_dict()[k]), k
        full_trace = (tmp_path / "full" / "losses.jsonl").read_text().splitlines()
        tail = (tmp_path / "resumed" / "losses.jsonl").read_text().splitlines()
        head = (tmp_path / "half" / "losses.jsonl").read_text().splitlines()
        assert head + tail == full_trace

    def test_state_archive_round_trip(self, small_dataset, tmp_path):
        cfg = small_config()
        state = train(cfg, small_dataset, tmp_path / "run", GEN8, DISC8, max_steps=3)
        save_train_state(tmp_path / "s.sdnt", state)
        restored = load_train_state(tmp_path / "s.sdnt")
        assert restored.step == state.step
        assert restored.epoch_pos == state.epoch_pos
        assert restored.epoch_order == state.epoch_order
        assert restored.gen_opt.step == state.gen_opt.step
        x = torch.randn(1, 3, 48, 48).clamp(-1, 1)
        with torch.no_grad():
            assert torch.equal(
                state.generator.eval()(x), restored.generator.eval()(x)
            )
        for name in state.gen_opt.m:
            assert torch.equal(state.gen_opt.m[name], restored.gen_opt.m[name])
            assert torch.equal(state.gen_opt.v[name], restored.gen_opt.v[name])

    def test_random_crop_mode(self, tmp_path):
        ds = write_synthetic_dataset(tmp_path / "big", n=2, seed=3, size=64)
        cfg = small_config(resize="random-crop-48", epochs=1)
        state = train(cfg, ds, tmp_path / "run", GEN8, DISC8)
        assert state.step == 2
