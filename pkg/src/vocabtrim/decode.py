"""Draft-tree speculative decoding with greedy exact-match verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyPrefix, InvariantViolation
from .lm import TrimmedHeadModel, greedy_token, log_softmax, top_k_indices
from .vocab import VocabMapping

ROOT = -1


@dataclass(frozen=True)
class TreeConfig:
    depth: int = 3
    node_top_k: int = 8
    max_tokens: int = 32

    def __post_init__(self):
        if min(self.depth, self.node_top_k, self.max_tokens) < 1:
            raise ValueError("tree depth, node_top_k and max_tokens must be >= 1")
        if self.max_tokens < self.depth:
            raise ValueError("max_tokens must be >= depth")


@dataclass
class DraftTree:
    """Flat node arrays; node ``i`` hangs under ``parents[i]`` (``ROOT`` for depth 1)."""

    tokens: list = field(default_factory=list)
    parents: list = field(default_factory=list)
    depths: list = field(default_factory=list)
    scores: list = field(default_factory=list)

    def __len__(self):
        return len(self.tokens)

    def add(self, token, parent, score):
        depth = 1 if parent == ROOT else self.depths[parent] + 1
        self.tokens.append(int(token))
        self.parents.append(int(parent))
        self.depths.append(depth)
        self.scores.append(float(score))
        return len(self.tokens) - 1

    def children(self) -> dict:
        """parent index -> {token: child index}"""
        out = {ROOT: {}}
        for i, (tok, par) in enumerate(zip(self.tokens, self.parents)):
            out.setdefault(par, {})[tok] = i
        return out

    def path(self, node: int) -> list:
        toks = []
        while node != ROOT:
            toks.append(self.tokens[node])
            node = self.parents[node]
        return toks[::-1]


@dataclass(frozen=True)
class DecodeStats:
    blocks: int
    produced: int
    accepted_per_block: tuple
    draft_passes_per_block: int

    def __post_init__(self):
        if self.produced != sum(a + 1 for a in self.accepted_per_block):
            raise InvariantViolation("produced != sum(accepted + 1)")
        if self.blocks != len(self.accepted_per_block):
            raise InvariantViolation("blocks != number of recorded blocks")


def draft_logprobs(draft, mapping: VocabMapping | None, context: Sequence[int]) -> np.ndarray:
    """Log-probabilities over the trimmed index space."""
    if isinstance(draft, TrimmedHeadModel):
        logits = draft.trimmed_next_logits(context)
    else:
        logits = draft.next_logits(context)
        if mapping is not None:
            logits = logits[mapping.to_target]
    return log_softmax(logits)


def build_draft_tree(draft, mapping: VocabMapping | None, prefix: Sequence[int],
                     cfg: TreeConfig) -> DraftTree:
    """Grow the tree one level at a time.

    Every frontier node proposes its ``node_top_k`` best trimmed tokens. The
    level's candidates are ranked by cumulative log-prob (ties: smaller target
    token, then smaller parent index) and at most ``node_top_k`` of them are
    kept, never exceeding ``max_tokens`` nodes overall. Kept nodes form the next
    frontier.
    """
    if len(prefix) == 0:
        raise EmptyPrefix("draft tree needs at least one prefix token")
    if mapping is None and isinstance(draft, TrimmedHeadModel):
        mapping = draft.mapping
    to_target = mapping.to_target if mapping is not None else None
    prefix = list(prefix)
    tree = DraftTree()
    frontier = [(ROOT, [], 0.0)]
    for _ in range(cfg.depth):
        room = min(cfg.node_top_k, cfg.max_tokens - len(tree))
        if room <= 0 or not frontier:
            break
        cands = []
        for parent, path, score in frontier:
            lp = draft_logprobs(draft, mapping, prefix + path)
            for idx in top_k_indices(lp, cfg.node_top_k):
                tok = int(to_target[idx]) if to_target is not None else int(idx)
                cands.append((score + float(lp[idx]), tok, parent, path))
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        frontier = []
        for score, tok, parent, path in cands[:room]:
            node = tree.add(tok, parent, score)
            frontier.append((node, path + [tok], score))
    return tree


def verify_tree_greedy(target, prefix: Sequence[int], tree: DraftTree):
    """Walk matching children while they equal the target's greedy token.

    Returns ``(accepted, bonus)``; ``accepted + [bonus]`` is exactly what
    greedy decoding of ``target`` would emit next.
    """
    children = tree.children()
    context = list(prefix)
    accepted = []
    node = ROOT
    while True:
        g = greedy_token(target, context)
        nxt = children.get(node, {}).get(g)
        if nxt is None:
            return accepted, g
        accepted.append(g)
        context.append(g)
        node = nxt


def greedy_decode(model, prompt: Sequence[int], max_new: int, eos_id: int | None = None) -> list:
    context = list(prompt)
    out = []
    while len(out) < max_new:
        t = greedy_token(model, context)
        out.append(t)
        context.append(t)
        if t == eos_id:
            break
    return out


def spd_generate(target, draft, mapping: VocabMapping | None, prompt: Sequence[int], max_new: int,
                 cfg: TreeConfig, eos_id: int | None = None):
    """Speculative decoding loop. Returns ``(output, stats)``.

    The last block is cut at ``max_new`` or just after ``eos_id``; its
    accepted count shrinks with it.
    """
    if len(prompt) == 0:
        raise EmptyPrefix("prompt must hold at least one token")
    if max_new < 1:
        raise ValueError("max_new must be >= 1")
    prompt = list(prompt)
    out = []
    accepted_per_block = []
    while len(out) < max_new:
        tree = build_draft_tree(draft, mapping, prompt + out, cfg)
        accepted, bonus = verify_tree_greedy(target, prompt + out, tree)
        if len(accepted) > cfg.depth:
            raise InvariantViolation("accepted more tokens than tree depth")
        block = accepted + [bonus]
        keep = min(len(block), max_new - len(out))
        done = False
        if eos_id is not None and eos_id in block[:keep]:
            keep = block.index(eos_id) + 1
            done = True
        out.extend(block[:keep])
        accepted_per_block.append(keep - 1)
        if done:
            break
    stats = DecodeStats(len(accepted_per_block), len(out), tuple(accepted_per_block), cfg.depth)
    return out, stats
