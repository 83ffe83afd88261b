import json
from pathlib import Path

import numpy as np
import pytest

from vocabtrim.lm import LinearHeadModel, train_ngram

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


class TableModel:
    """Next-token distribution looked up by the last context token."""

    def __init__(self, probs, params=1):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.params = params

    def vocab_size(self):
        return self.probs.shape[1]

    def param_count(self):
        return self.params

    def next_logits(self, context):
        return np.log(self.probs[context[-1]])


class FixedModel:
    def __init__(self, logits):
        self.logits = np.asarray(logits, dtype=np.float64)

    def vocab_size(self):
        return len(self.logits)

    def param_count(self):
        return len(self.logits)

    def next_logits(self, context):
        return self.logits.copy()


def random_ngram(rng, V, order=None, n_tokens=None):
    order = order or int(rng.integers(1, 4))
    n_tokens = n_tokens or int(rng.integers(V, 6 * V + 20))
    n_streams = int(rng.integers(1, 4))
    streams = [list(rng.integers(0, V, size=max(1, n_tokens // n_streams))) for _ in range(n_streams)]
    return train_ngram(streams, order, float(rng.uniform(0.05, 1.0)), V)


def random_linear(rng, V, d=None, m=None):
    d = d or int(rng.integers(1, 17))
    m = m or int(rng.integers(1, 4))
    return LinearHeadModel.random(V, d, m, seed=int(rng.integers(0, 2**31)))


@pytest.fixture
def tiny_corpus(tmp_path):
    """A small text world plus a config pointing at it."""
    words = ("the king and the queen of the land went to the sea and the sun was bright "
             "in the land of the king there was a queen who loved the sea and the sun ").split()
    rng = np.random.default_rng(7)
    paras = []
    for _ in range(60):
        start = int(rng.integers(0, len(words) - 12))
        paras.append(" ".join(words[start:start + int(rng.integers(6, 12))]))
    (tmp_path / "corpus.txt").write_text("\n\n".join(paras) + "\n", encoding="utf-8")
    (tmp_path / "raw.txt").write_text("\n\n".join(paras[::3]) + "\n", encoding="utf-8")
    (tmp_path / "calib.txt").write_text("the king\nthe sea\nin the land\n", encoding="utf-8")
    (tmp_path / "eval.txt").write_text("the queen of\nthe sun was\nthere was a\nand the\n", encoding="utf-8")
    cfg = {
        "seed": 42,
        "corpus": ["corpus.txt"],
        "eval_prompts": ["eval.txt"],
        "raw_calibration": ["raw.txt"],
        "calibration_prompts": ["calib.txt"],
        "task": "tiny",
        "vocab_size": 12,
        "target": {"type": "ngram", "order": 3, "alpha": 0.1},
        "draft": {"type": "linear", "d": 4, "m": 1, "fit": "bigram", "alpha": 1.0},
        "criterion": "topk:0.5v",
        "tree": {"depth": 3, "node_top_k": 3, "max_tokens": 8},
        "max_new": 12,
        "calibration_max_new": 10,
        "sweep_fractions": [0.25, 0.5, 1.0],
        "out_dir": "out",
    }
    (tmp_path / "exp.json").write_text(json.dumps(cfg), encoding="utf-8")
    return tmp_path
