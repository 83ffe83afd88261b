import json

import pytest

from vocabtrim import cli, pipeline
from vocabtrim.errors import InvariantViolation
from vocabtrim.vocab import read_counter, read_selection


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_calibrate_trim_generate(tiny_corpus, capsys):
    cfg = tiny_corpus / "exp.json"
    counter, sel = tiny_corpus / "c.txt", tiny_corpus / "s.txt"
    assert run("calibrate", "--config", cfg, "--source", "target", "-o", counter) == 0
    assert read_counter(counter).V == 12
    assert run("trim", "--config", cfg, "--counter", counter, "--criterion", "topk:6", "-o", sel) == 0
    assert read_selection(sel, read_counter(counter))[0].K == 6
    capsys.readouterr()
    assert run("generate", "--config", cfg, "--prompt", "the king", "--selection", sel, "--counter", counter) == 0
    out = capsys.readouterr().out
    assert "BE=" in out and "MBSU=" in out


def test_bench_writes_report_and_figure(tiny_corpus, capsys):
    assert run("bench", "--config", tiny_corpus / "exp.json", "--sources", "raw,target") == 0
    assert (tiny_corpus / "out" / "report.csv").is_file()
    assert (tiny_corpus / "out" / "report.png").stat().st_size > 0
    assert "source ordering" in capsys.readouterr().out


def test_sweep_plot_data(tiny_corpus):
    pd = tiny_corpus / "k.csv"
    assert run("sweep", "--config", tiny_corpus / "exp.json", "--fractions", "0.5,1.0",
               "--plot-data", pd, "--no-figures") == 0
    assert pd.read_text().splitlines() == (tiny_corpus / "out" / "plot_data.csv").read_text().splitlines()
    assert len(pd.read_text().splitlines()) == 3
    assert not (tiny_corpus / "out" / "sweep.png").exists()


def test_flags_override_config(tiny_corpus):
    out = tiny_corpus / "elsewhere"
    assert run("sweep", "--config", tiny_corpus / "exp.json", "--fractions", "1.0", "--out", out,
               "--seed", 3, "--depth", 1, "--no-figures") == 0
    assert (out / "sweep.csv").read_text().splitlines()[1].split(",")[-2] == "3"


def test_exit_code_config_error(tiny_corpus, capsys):
    assert run("bench", "--config", tiny_corpus / "missing.json") == 2
    raw = json.loads((tiny_corpus / "exp.json").read_text())
    del raw["seed"]
    (tiny_corpus / "noseed.json").write_text(json.dumps(raw))
    assert run("bench", "--config", tiny_corpus / "noseed.json") == 2
    assert run("bench", "--config", tiny_corpus / "exp.json", "--depth", 0) == 2
    assert "config error" in capsys.readouterr().err


def test_exit_code_data_error(tiny_corpus):
    cfg = tiny_corpus / "exp.json"
    bad = tiny_corpus / "bad_counter.txt"
    bad.write_text("garbage\n")
    assert run("trim", "--config", cfg, "--counter", bad, "-o", tiny_corpus / "s.txt") == 3
    (tiny_corpus / "eval.txt").write_text("\n")
    assert run("bench", "--config", cfg) == 3


def test_exit_code_stale_selection(tiny_corpus):
    cfg = tiny_corpus / "exp.json"
    c1, c2, sel = tiny_corpus / "c1.txt", tiny_corpus / "c2.txt", tiny_corpus / "s.txt"
    run("calibrate", "--config", cfg, "--source", "raw", "-o", c1)
    run("calibrate", "--config", cfg, "--source", "target", "-o", c2)
    run("trim", "--config", cfg, "--counter", c1, "-o", sel)
    assert run("generate", "--config", cfg, "--prompt", "the", "--selection", sel, "--counter", c2) == 3


def test_exit_code_invariant_violation(tiny_corpus, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantViolation("speculative output differs from greedy target decode")

    monkeypatch.setattr(pipeline, "decode_prompts", broken)
    assert run("bench", "--config", tiny_corpus / "exp.json") == 4


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
