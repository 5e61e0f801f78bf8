import json

import pytest

from pagesum.cli import main
from pagesum.corpus import write_jsonl
from pagesum.synthetic import overfit_pairs


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_jsonl(overfit_pairs(6, seed=0), root / "train.jsonl")
    write_jsonl(overfit_pairs(3, seed=1), root / "valid.jsonl")
    cfg = {
        "epochs": 2,
        "base_lr": 0.05,
        "warmup": 20,
        "model": {"n_encoder_layers": 1, "n_decoder_layers": 1},
        "paging": {"page_size": 16, "num_pages": 2, "max_total_tokens": 32},
    }
    (root / "cfg.json").write_text(json.dumps(cfg))
    return root


@pytest.fixture(scope="module")
def trained(corpus):
    code = main(
        ["train", "--config", str(corpus / "cfg.json"), "--corpus", str(corpus / "train.jsonl"),
         "--valid", str(corpus / "valid.jsonl"), "--checkpoint-dir", str(corpus / "ck"), "--min-freq", "1",
         "--out", str(corpus / "train.csv")]
    )
    assert code == 0
    return corpus / "ck"


def test_train_writes_artifacts(trained, corpus):
    assert {"best.pgsm", "epoch_001.pgsm", "epoch_002.pgsm", "vocab.json", "paging.json", "report.json"} <= {
        p.name for p in trained.iterdir()
    }
    assert (corpus / "train.csv").read_text().splitlines()[0] == "epoch,valid_loss,checkpoint"


def test_summarize_then_eval(trained, corpus, capsys):
    code, out, _ = run(["summarize", "--checkpoint", trained / "best.pgsm", "--corpus", corpus / "valid.jsonl",
                        "--strategy", "beam", "--beam-size", "2"], capsys)
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["id"] for r in rows] == ["doc0", "doc1", "doc2"]
    (corpus / "hyp.jsonl").write_text(out)
    code, out, _ = run(["eval-rouge", "--hyp", corpus / "hyp.jsonl", "--ref", corpus / "valid.jsonl"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "metric,precision,recall,f1"
    assert [line.split(",")[0] for line in lines[1:]] == ["rouge1", "rouge2", "rougeL", "rougeLsum"]
    assert all(0.0 <= float(v) <= 100.0 for line in lines[1:] for v in line.split(",")[1:])


def test_eval_rouge_plain_lines(tmp_path, capsys):
    (tmp_path / "h.txt").write_text("the cat sat\n")
    (tmp_path / "r.txt").write_text("the cat sat\n")
    code, out, _ = run(["eval-rouge", "--hyp", tmp_path / "h.txt", "--ref", tmp_path / "r.txt"], capsys)
    assert code == 0 and "rouge1,100.0000,100.0000,100.0000" in out


def test_importance(trained, corpus, capsys):
    code, out, _ = run(["analyze", "importance", "--checkpoint", trained / "best.pgsm",
                        "--corpus", corpus / "valid.jsonl", "--doc-id", "doc1"], capsys)
    assert code == 0 and out.startswith("step,page_0,page_1")


def test_fusion_and_histogram(corpus, capsys):
    code, out, _ = run(["analyze", "fusion", "--corpus", corpus / "train.jsonl", "--t1", 20, "--t2", 10], capsys)
    assert code == 0 and out.startswith("doc_id,summary_idx")
    code, out, _ = run(["analyze", "fusion", "--corpus", corpus / "train.jsonl", "--histogram"], capsys)
    assert code == 0 and len(out.splitlines()) == 11


def test_locality_and_coherence(corpus, capsys):
    code, out, _ = run(["analyze", "locality", "--corpus", corpus / "train.jsonl"], capsys)
    assert code == 0 and out.startswith("distance,mean_sim,count")
    code, out, err = run(["analyze", "coherence", "--corpus", corpus / "train.jsonl"], capsys)
    assert code == 0 and out.splitlines()[0] == "id,coherence"


def test_bench_memory(capsys):
    code, out, _ = run(["bench", "memory", "--lengths", "1024,2048,4096", "--page-size", 1024,
                        "--mode", "paged,full"], capsys)
    assert code == 0
    assert "4096,paged,4194304,4194304" in out and "4096,full,16777216,16777216" in out


def test_check_grads_pass_and_fail(capsys):
    code, out, _ = run(["check", "grads", "--coords", 2], capsys)
    assert code == 0 and out.splitlines()[-1].startswith("ALL,")
    code, _, err = run(["check", "grads", "--coords", 2, "--tolerance", 1e-15], capsys)
    assert code == 3 and err.startswith("error: gradient check failed")


def test_output_is_deterministic(corpus, capsys, monkeypatch):
    argv = ["bench", "memory", "--lengths", "100,300", "--page-size", 64]
    first = run(argv, capsys)[1]
    monkeypatch.setenv("PAGESUM_SEED", "0")
    assert run(argv, capsys)[1] == first
    argv = ["analyze", "fusion", "--corpus", corpus / "train.jsonl"]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_out_flag_writes_file(tmp_path, capsys):
    target = tmp_path / "mem.csv"
    code, out, _ = run(["bench", "memory", "--lengths", "10", "--page-size", 8, "--out", target], capsys)
    assert code == 0 and out == "" and target.read_text().startswith("l_D,mode")


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["bench", "memory", "--lengths", "1,x"],
        ["bench", "memory", "--lengths", "8", "--mode", "sparse"],
        ["summarize", "--corpus", "x.jsonl"],
        ["train", "--corpus", "x.jsonl", "--bogus"],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    err = capsys.readouterr().err
    assert "usage:" in err and err.strip().splitlines()[-1].startswith("error:")


def test_runtime_input_errors_exit_one(tmp_path, capsys):
    code, _, err = run(["analyze", "locality", "--corpus", tmp_path / "missing.jsonl"], capsys)
    assert code == 1 and err.startswith("error:") and len(err.strip().splitlines()) == 1
    (tmp_path / "bad.jsonl").write_text("{not json\n")
    code, _, err = run(["analyze", "fusion", "--corpus", tmp_path / "bad.jsonl"], capsys)
    assert code == 1 and ":1:" in err
    (tmp_path / "ck.pgsm").write_bytes(b"PGSM")
    code, _, err = run(["summarize", "--checkpoint", tmp_path / "ck.pgsm", "--corpus", tmp_path / "bad.jsonl"], capsys)
    assert code == 1


def test_bad_seed_env(monkeypatch, capsys):
    monkeypatch.setenv("PAGESUM_SEED", "abc")
    code, _, err = run(["check", "grads", "--coords", 1], capsys)
    assert code == 1 and "PAGESUM_SEED" in err


def test_help_exits_zero(capsys):
    for argv in (["--help"], ["analyze", "--help"], ["check", "grads", "--help"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
    capsys.readouterr()


def test_numeric_failures_exit_two(monkeypatch, capsys):
    from pagesum import cli
    from pagesum.exceptions import NonFiniteLossError

    def explode(**kwargs):
        raise NonFiniteLossError("non-finite loss nan on batch ['d3']", batch_id=["d3"])

    monkeypatch.setattr(cli, "model_gradcheck", explode)
    code, _, err = run(["check", "grads"], capsys)
    assert code == 2 and err == "error: non-finite loss nan on batch ['d3']\n"
