import json
import math

import numpy as np
import pytest

from pagesum.corpus import corpus_texts
from pagesum.exceptions import ConfigError, InputError, NonFiniteLossError
from pagesum.model import ModelConfig, init_params
from pagesum.numerics import lr_at
from pagesum.paging import PagingConfig
from pagesum.synthetic import overfit_pairs
from pagesum.text import Vocabulary
from pagesum.training import TrainConfig, evaluate_loss, load_train_config, make_examples, train

CFG = ModelConfig.tiny()
PAGING = PagingConfig(page_size=32, num_pages=2, max_total_tokens=64)


@pytest.fixture(scope="module")
def data():
    records = overfit_pairs(n_docs=6, seed=3)
    vocab = Vocabulary.build(corpus_texts(records), min_freq=1)
    return make_examples(records, vocab, PAGING, CFG)


def test_untrained_loss_is_near_log_vocab(data):
    loss = evaluate_loss(data, init_params(CFG, seed=0), CFG, epsilon=0.1)
    assert abs(loss - math.log(64)) <= 0.1 * math.log(64)


def test_evaluate_is_repeatable(data):
    params = init_params(CFG, seed=0)
    assert evaluate_loss(data, params, CFG) == evaluate_loss(data, params, CFG)


def test_same_seed_gives_identical_checkpoints(data, tmp_path):
    blobs = []
    for run in ("a", "b"):
        cfg = TrainConfig(epochs=2, base_lr=0.05, warmup=5, seed=7, checkpoint_dir=str(tmp_path / run))
        report = train(data, init_params(CFG, seed=7), CFG, cfg, valid=data[:2])
        blobs.append([open(p, "rb").read() for p in report.checkpoints])
        assert len(report.checkpoints) == 2
        assert json.loads((tmp_path / run / "report.json").read_text())["best_epoch"] == report.best_epoch
    assert blobs[0] == blobs[1]


def test_learning_rate_trace_follows_schedule(data):
    cfg = TrainConfig(epochs=1, warmup=4, base_lr=0.01, batch_size=2)
    report = train(data, init_params(CFG), CFG, cfg)
    assert report.step_lr == [lr_at(s, 4, 0.01) for s in range(1, 4)]


def test_gradient_norms_are_recorded_and_clipped(data):
    cfg = TrainConfig(epochs=1, warmup=2, base_lr=0.01, clip_norm=1e-3, max_steps=3)
    report = train(data, init_params(CFG), CFG, cfg)
    assert len(report.step_grad_norm) == 3
    assert all(n > 1e-3 for n in report.step_grad_norm)


def test_best_params_track_lowest_validation_loss(data):
    cfg = TrainConfig(epochs=3, base_lr=0.05, warmup=5)
    params = init_params(CFG)
    report = train(data, params, CFG, cfg, valid=data)
    assert report.best_valid_loss == min(report.epoch_valid_loss)


def test_smoothed_training_loss_decreases():
    records = overfit_pairs(n_docs=10, seed=0)
    vocab = Vocabulary.build(corpus_texts(records), min_freq=1)
    examples = make_examples(records, vocab, PAGING, CFG)
    cfg = TrainConfig(epochs=1000, base_lr=0.05, warmup=200, label_smoothing=0.0, max_steps=600)
    losses = np.array(train(examples, init_params(CFG), CFG, cfg).step_loss)
    windows = losses.reshape(-1, 50).mean(axis=1)
    assert np.all(np.diff(windows) <= 0), windows


def test_non_finite_loss_names_the_batch(data):
    params = init_params(CFG)
    params["vocab_proj.w"].data[:] = np.nan
    with pytest.raises(NonFiniteLossError) as err:
        train(data, params, CFG, TrainConfig(epochs=1))
    assert err.value.batch_id


def test_config_errors(data, tmp_path):
    with pytest.raises(ConfigError):
        TrainConfig(label_smoothing=1.0)
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"epochs": 1, "lr": 3})
    with pytest.raises(ConfigError):
        make_examples([], Vocabulary(), PagingConfig(page_size=128, max_total_tokens=256), CFG)
    with pytest.raises(InputError):
        train([], init_params(CFG), CFG, TrainConfig())


def test_load_train_config_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"epochs": 4, "seed": 1, "model": {"d_model": 8}, "paging": {"page_size": 16}}))
    cfg, model, paging = load_train_config(path, {"epochs": 2, "seed": None})
    assert (cfg.epochs, cfg.seed) == (2, 1)
    assert model == {"d_model": 8} and paging == {"page_size": 16}
