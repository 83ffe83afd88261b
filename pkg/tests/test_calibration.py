import numpy as np
import pytest

from conftest import FixedModel, random_linear, random_ngram
from vocabtrim.calibration import (
    DraftGenerated,
    Raw,
    TargetGenerated,
    produce_calibration_streams,
    read_documents,
    read_prompts,
)
from vocabtrim.errors import EmptyPromptSet
from vocabtrim.lm import greedy_token
from vocabtrim.vocab import EOS, UNK, Vocabulary, count_token_frequencies, tokenize

VOCAB = Vocabulary.from_tokens(["a", "b", "c", UNK, EOS])


def test_raw_tokenizes_file(tmp_path):
    (tmp_path / "r.txt").write_text("a b a", encoding="utf-8")
    streams = list(produce_calibration_streams(Raw([tmp_path / "r.txt"]), None, None, VOCAB))
    assert streams == [[0, 1, 0, 4]]


def test_raw_splits_paragraphs(tmp_path):
    (tmp_path / "r.txt").write_text("a b\n\n\nc\r\n\r\nb\n", encoding="utf-8")
    assert read_documents(tmp_path / "r.txt") == ["a b", "\nc", "b\n"]
    streams = list(produce_calibration_streams(Raw([tmp_path / "r.txt"]), None, None, VOCAB))
    assert streams == [[0, 1, 4], [2, 4], [1, 4]]


def test_eos_model_yields_only_eos(tmp_path):
    (tmp_path / "p.txt").write_text("a b\nc\n", encoding="utf-8")
    always_eos = FixedModel([0, 0, 0, 0, 9.0])
    src = TargetGenerated([tmp_path / "p.txt"], max_new=10)
    assert list(produce_calibration_streams(src, always_eos, None, VOCAB)) == [[4], [4]]


def test_count_prompts_flag(tmp_path):
    (tmp_path / "p.txt").write_text("a b\n", encoding="utf-8")
    always_eos = FixedModel([0, 0, 0, 0, 9.0])
    src = TargetGenerated([tmp_path / "p.txt"], max_new=10)
    assert list(produce_calibration_streams(src, always_eos, None, VOCAB, count_prompts=True)) == [[0, 1, 4]]


def test_empty_prompt_set(tmp_path):
    (tmp_path / "p.txt").write_text("\n  \n", encoding="utf-8")
    with pytest.raises(EmptyPromptSet):
        read_prompts([tmp_path / "p.txt"])
    with pytest.raises(EmptyPromptSet):
        list(produce_calibration_streams(DraftGenerated([tmp_path / "p.txt"]), None, None, VOCAB))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        list(produce_calibration_streams(Raw([tmp_path / "nope.txt"]), None, None, VOCAB))


def test_max_new_validated():
    with pytest.raises(ValueError):
        TargetGenerated(["x"], max_new=0)
    with pytest.raises(ValueError):
        DraftGenerated(["x"], max_new=0)


def step_oracle(model, prompt, max_new, eos):
    ctx, out = list(prompt), []
    for _ in range(max_new):
        t = int(np.argmax(model.next_logits(ctx)))
        out.append(t)
        ctx.append(t)
        if t == eos:
            break
    return out


@pytest.mark.parametrize("use_draft", [False, True])
def test_generated_streams_match_step_oracle(tmp_path, use_draft):
    rng = np.random.default_rng(5)
    words = ["a", "b", "c", "d"]
    prompts = [" ".join(rng.choice(words, size=int(rng.integers(1, 5)))) for _ in range(20)]
    (tmp_path / "p.txt").write_text("\n".join(prompts) + "\n", encoding="utf-8")
    target, draft = random_ngram(rng, 5, order=2), random_linear(rng, 5)
    cls = DraftGenerated if use_draft else TargetGenerated
    streams = list(produce_calibration_streams(cls([tmp_path / "p.txt"], max_new=7), target, draft, VOCAB))
    model = draft if use_draft else target
    expect = [step_oracle(model, tokenize(p, VOCAB, add_eos=False), 7, VOCAB.eos_id) for p in prompts]
    assert streams == expect


def test_generation_is_reproducible(tmp_path):
    (tmp_path / "p.txt").write_text("a\nb c\n", encoding="utf-8")
    target = random_ngram(np.random.default_rng(1), 5)
    src = TargetGenerated([tmp_path / "p.txt"], max_new=12)
    a = count_token_frequencies(produce_calibration_streams(src, target, None, VOCAB, seed=1), 5)
    b = count_token_frequencies(produce_calibration_streams(src, target, None, VOCAB, seed=1), 5)
    assert a == b and a.digest() == b.digest()


def test_greedy_token_is_argmax():
    assert greedy_token(FixedModel([0.1, 0.7, 0.7]), [0]) == 1
