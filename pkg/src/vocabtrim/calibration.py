"""Calibration corpora: raw text, target generations, draft generations."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

from .decode import greedy_decode
from .errors import EmptyPromptSet
from .vocab import Vocabulary, tokenize

DEFAULT_MAX_NEW = 128


@dataclass(frozen=True)
class Raw:
    paths: tuple

    name = "raw"


@dataclass(frozen=True)
class TargetGenerated:
    prompt_paths: tuple
    max_new: int = DEFAULT_MAX_NEW

    name = "target"

    def __post_init__(self):
        if self.max_new < 1:
            raise ValueError("max_new must be >= 1")


@dataclass(frozen=True)
class DraftGenerated:
    prompt_paths: tuple
    max_new: int = DEFAULT_MAX_NEW

    name = "draft"

    def __post_init__(self):
        if self.max_new < 1:
            raise ValueError("max_new must be >= 1")


CalibrationSource = Union[Raw, TargetGenerated, DraftGenerated]


def read_documents(path) -> list[str]:
    """Blank-line separated paragraphs of a UTF-8 text file."""
    text = Path(path).read_text(encoding="utf-8")
    return [p for p in text.replace("\r\n", "\n").split("\n\n") if p.strip()]


def read_prompts(paths: Sequence) -> list[str]:
    prompts = []
    for p in paths:
        prompts.extend(line for line in Path(p).read_text(encoding="utf-8").splitlines() if line.strip())
    if not prompts:
        raise EmptyPromptSet(f"no prompts found in {', '.join(map(str, paths))}")
    return prompts


def produce_calibration_streams(source: CalibrationSource, target, draft, vocab: Vocabulary,
                                seed: int = 0, count_prompts: bool = False) -> Iterator[list]:
    """Yield token-id streams to be counted.

    Generated sources decode greedily, so ``seed`` does not change the
    output; it is accepted so every producer has the same signature.
    Only completion tokens are emitted unless ``count_prompts`` is set.
    """
    if isinstance(source, Raw):
        for path in source.paths:
            for doc in read_documents(path):
                yield tokenize(doc, vocab)
        return
    if isinstance(source, TargetGenerated):
        model = target
    elif isinstance(source, DraftGenerated):
        model = draft
    else:
        raise TypeError(f"unknown calibration source {source!r}")
    for text in read_prompts(source.prompt_paths):
        prompt = tokenize(text, vocab, add_eos=False)
        completion = greedy_decode(model, prompt, source.max_new, vocab.eos_id)
        yield (prompt + completion) if count_prompts else completion
