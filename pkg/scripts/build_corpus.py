"""Assemble the desk-scale corpus files under data/ from Project Gutenberg
Shakespeare texts (public domain).

The texts ship inside the ``shakespeare`` sdist on PyPI::

    pip download --no-deps --no-binary :all: shakespeare==0.6
    tar xzf shakespeare-0.6.tar.gz
    python scripts/build_corpus.py shakespeare-0.6/shksprdata/texts data/

Outputs:
    corpus.txt         training text for both models (~1 MB)
    calib_raw.txt      raw-text calibration corpus (held-out plays)
    calib_prompts.txt  prompts for model-generated calibration corpora
    eval_prompts.txt   held-out evaluation prompts
"""
import sys
from pathlib import Path

TRAIN_BYTES = 1_000_000
RAW_BYTES = 300_000
PROMPT_WORDS = 8


def speeches(text):
    for block in text.split("\n\n"):
        words = block.split()
        if words:
            yield words


def take_prompts(paths, n):
    out = []
    for p in paths:
        for words in speeches(p.read_text(encoding="utf-8")):
            if len(words) >= 2 * PROMPT_WORDS:
                out.append(" ".join(words[:PROMPT_WORDS]))
    # stride through the pool so prompts spread over all plays
    step = max(1, len(out) // n)
    return out[::step][:n]


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    plays = sorted(src.glob("*_gut.txt"))
    train, rest, size = [], [], 0
    for p in plays:
        if size < TRAIN_BYTES:
            train.append(p)
            size += p.stat().st_size
        else:
            rest.append(p)
    raw, prompt_pool, size = [], [], 0
    for p in rest:
        if size < RAW_BYTES:
            raw.append(p)
            size += p.stat().st_size
        else:
            prompt_pool.append(p)
    join = lambda ps: "\n\n".join(p.read_text(encoding="utf-8").strip() for p in ps) + "\n"
    (dst / "corpus.txt").write_text(join(train), encoding="utf-8")
    (dst / "calib_raw.txt").write_text(join(raw), encoding="utf-8")
    half = len(prompt_pool) // 2
    calib = take_prompts(prompt_pool[:half], 300)
    evals = take_prompts(prompt_pool[half:], 200)
    (dst / "calib_prompts.txt").write_text("\n".join(calib) + "\n", encoding="utf-8")
    (dst / "eval_prompts.txt").write_text("\n".join(evals) + "\n", encoding="utf-8")
    for name in ("corpus.txt", "calib_raw.txt", "calib_prompts.txt", "eval_prompts.txt"):
        print(name, (dst / name).stat().st_size)


if __name__ == "__main__":
    main(*sys.argv[1:3])
