import numpy as np
import pytest
from sklearn.base import clone

from pagesum import PageSplitter, PageSumSummarizer
from pagesum.corpus import Record
from pagesum.estimator import as_records
from pagesum.exceptions import InputError
from pagesum.synthetic import overfit_pairs
from sklearn.exceptions import NotFittedError

RECORDS = overfit_pairs(n_docs=4, seed=2)
FAST = dict(page_size=32, num_pages=2, max_total_tokens=64, min_freq=1, epochs=30, base_lr=0.05, warmup=50)


def test_params_round_trip_through_clone():
    est = PageSumSummarizer(page_size=128, beam_size=3)
    params = est.get_params()
    assert params["page_size"] == 128 and params["beam_size"] == 3
    twin = clone(est)
    assert twin.get_params() == params
    assert twin.set_params(seed=5).seed == 5


def test_as_records_accepts_several_shapes():
    recs = as_records(["plain text.", {"text": "x.", "summary": "y"}, RECORDS[0]], ["a", "b", "c"])
    assert [r.summary for r in recs] == ["a", "b", "c"]
    assert recs[1].text == "x."


@pytest.mark.parametrize("bad", ["single string", [], [3.5]])
def test_as_records_rejects(bad):
    with pytest.raises(InputError):
        as_records(bad)


def test_summary_count_must_match():
    with pytest.raises(InputError):
        as_records(["a.", "b."], ["only one"])


def test_splitter_fit_transform():
    pages = PageSplitter(page_size=8, num_pages=3, max_total_tokens=64, min_freq=1).fit_transform(RECORDS)
    assert len(pages) == len(RECORDS)
    assert all(len(pd.pages) <= 3 and max(pd.lengths) <= 8 for pd in pages)


def test_unfitted_use_raises():
    with pytest.raises(NotFittedError):
        PageSumSummarizer().predict(RECORDS)
    with pytest.raises(NotFittedError):
        PageSplitter().transform(RECORDS)


@pytest.fixture(scope="module")
def fitted():
    return PageSumSummarizer(**FAST).fit(RECORDS)


def test_fit_predict_score(fitted):
    preds = fitted.predict(RECORDS)
    assert len(preds) == len(RECORDS) and all(isinstance(p, str) for p in preds)
    assert fitted.loss(RECORDS) < fitted.report_.epoch_valid_loss[0] + 1e-9
    score = fitted.score(RECORDS, [r.summary for r in RECORDS])
    assert 0.0 <= score <= 1.0


def test_fit_accepts_separate_summaries():
    texts = [r.text for r in RECORDS]
    est = PageSumSummarizer(**{**FAST, "epochs": 1}).fit(texts, [r.summary for r in RECORDS])
    assert est.config_.vocab_size == len(est.vocab_)


def test_save_load_round_trip(fitted, tmp_path):
    path = tmp_path / "model.pgsm"
    fitted.save(path)
    loaded = PageSumSummarizer.load(path, **FAST)
    assert loaded.predict(RECORDS) == fitted.predict(RECORDS)
    for name, p in fitted.params_.items():
        assert np.array_equal(loaded.params_[name].data, p.data)


def test_beam_strategy_is_usable(fitted):
    fitted.set_params(strategy="beam", beam_size=2)
    try:
        assert len(fitted.predict([Record("z", "", text="w1 w2. w3 w4.")])) == 1
    finally:
        fitted.set_params(strategy="greedy")
