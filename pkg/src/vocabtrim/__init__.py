"""Draft-vocabulary trimming for speculative decoding, on desk-scale models."""
from .decode import DecodeStats, DraftTree, TreeConfig, build_draft_tree, greedy_decode, spd_generate, verify_tree_greedy
from .lm import LinearHeadModel, NGramModel, TrimmedHeadModel, load_model, save_model, train_ngram, trim_head
from .metrics import block_efficiency, mbsu, relative_latency
from .vocab import (
    FrequencyCounter,
    MinFreq,
    TopK,
    TopP,
    TrimSelection,
    VocabMapping,
    Vocabulary,
    build_mapping,
    build_vocab,
    count_token_frequencies,
    merge_counters,
    select_trim,
    tokenize,
)

__version__ = "0.1.0"
