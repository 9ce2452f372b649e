import json

import pytest

from nqtforge.cli import main
from nqtforge.config import ConfigError, PipelineConfig
from nqtforge.pipeline import FILES

SMALL = """\
synthetic_n = 40
synthetic_test = 8
d_model = 16
heads = 2
n_layers = 1
epochs = 2
batch_size = 16
"""


def write_config(tmp_path, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL + "run_dir = out\n" + extra)
    return path


def run(cfg, *args):
    return main([args[0], "--config", str(cfg), *args[1:]])


def test_unknown_command_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fly", "--config", str(write_config(tmp_path))])
    assert exc.value.code == 2


@pytest.mark.parametrize("text, needle", [
    ("epochs = many\n", "epochs expects int"),
    ("colour = blue\n", "unknown key"),
    ("separator = semicolon\n", "separator"),
    ("encoder = RNN\n", "encoder"),
    ("justtext\n", "key = value"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    assert main(["ingest", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "[config]" in err and needle in err


def test_missing_config_file(tmp_path, capsys):
    assert main(["ingest", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_config_round_trip():
    cfg = PipelineConfig(epochs=3, correction=False, separator="comma")
    assert PipelineConfig.loads(cfg.dumps()) == cfg
    with pytest.raises(ConfigError):
        PipelineConfig.loads("epochs = 1\nepochs = 2\n")


def test_stage_failure_names_the_stage(tmp_path, capsys):
    assert run(write_config(tmp_path), "train") == 1
    assert "[train]" in capsys.readouterr().err
    assert run(write_config(tmp_path), "translate") == 1
    assert "[translate]" in capsys.readouterr().err


def test_ingest_is_idempotent(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run(cfg, "ingest") == 0
    first = {k: (tmp_path / "out" / FILES[k]).read_bytes() for k in ("dataset", "store", "linker", "lexicon")}
    capsys.readouterr()
    assert run(cfg, "ingest") == 0
    second = {k: (tmp_path / "out" / FILES[k]).read_bytes() for k in first}
    assert first == second
    summary = json.loads(capsys.readouterr().out)
    assert summary["train"] == 32 and summary["test"] == 8


def test_e2e_with_gold_nqts(tmp_path, capsys):
    cfg = write_config(tmp_path, "inject_gold = true\n")
    assert run(cfg, "ingest") == 0
    assert run(cfg, "e2e", "--audit") == 0
    out = json.loads((tmp_path / "out" / FILES["eval"]).read_text())
    final = out["final"]
    assert final["exact_match"] == 1.0 and final["bleu1"] == 1.0
    assert (final["macro_p"], final["macro_r"], final["macro_f1"]) == (1.0, 1.0, 1.0)
    assert out["answer_failures"] == {}
    assert (tmp_path / "out" / FILES["audit"]).exists()


def test_train_translate_evaluate_with_and_without_correction(tmp_path, capsys):
    cfg = write_config(tmp_path)
    for stage in ("ingest", "train", "translate"):
        assert run(cfg, stage) == 0
    run_dir = tmp_path / "out"
    loss = (run_dir / FILES["loss"]).read_text().splitlines()
    assert loss[0] == "epoch,loss,val_exact_match" and len(loss) == 3
    assert run(cfg, "correct", "--no-correction") == 0
    assert run(cfg, "evaluate") == 0
    off = json.loads((run_dir / FILES["eval"]).read_text())
    assert off["delta"] == {"bleu1": 0.0, "exact_match": 0.0}
    assert run(cfg, "correct") == 0
    assert run(cfg, "evaluate") == 0
    on = json.loads((run_dir / FILES["eval"]).read_text())
    assert set(on) == {"raw", "corrected", "delta"}
    assert on["raw"] == off["raw"]


def test_separator_mismatch_is_reported(tmp_path, capsys):
    cfg = write_config(tmp_path)
    for stage in ("ingest", "train"):
        assert run(cfg, stage) == 0
    assert run(cfg, "translate", "--separator", "comma") == 1
    assert "separator" in capsys.readouterr().err


def test_endpoint_flag_uses_http(tmp_path, capsys):
    from nqtforge.sparql import FixtureEndpoint, TripleStore

    cfg = write_config(tmp_path, "inject_gold = true\n")
    assert run(cfg, "ingest") == 0
    store = TripleStore.load(tmp_path / "out" / FILES["store"])
    with FixtureEndpoint(store) as ep:
        assert run(cfg, "e2e", "--endpoint", ep.url) == 0
        assert ep.requests
    out = json.loads((tmp_path / "out" / FILES["eval"]).read_text())
    assert out["final"]["macro_f1"] == 1.0


def test_ingest_drops_unanswerable_records(tmp_path, capsys):
    from nqtforge.sparql import TripleStore

    cfg = write_config(tmp_path)
    assert run(cfg, "ingest") == 0
    store = TripleStore.load(tmp_path / "out" / FILES["store"])
    kept = list(store.triples)[: len(store.triples) // 2]
    small = TripleStore()
    for t in kept:
        small.add(*t)
    small.save(tmp_path / "small.nt")
    cfg = write_config(tmp_path, "store = small.nt\n")
    capsys.readouterr()
    assert run(cfg, "ingest") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["excluded"] > 0
    assert summary["records"] + summary["excluded"] == 40
