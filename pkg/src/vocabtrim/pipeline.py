"""End-to-end experiment driver: count -> select -> map -> trimmed drafting -> report."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from . import calibration as cal
from .config import ExperimentConfig, derive_seed
from .decode import greedy_decode, spd_generate
from .errors import InvariantViolation
from .lm import LinearHeadModel, TrimmedHeadModel, head_params, save_model, train_ngram, trim_head
from .metrics import BenchReport, LatencyModel, make_row, merge_stats, plot_data, relative_latency
from .vocab import (
    FrequencyCounter,
    TopK,
    TrimSelection,
    Vocabulary,
    build_vocab,
    count_token_frequencies,
    parse_criterion,
    select_trim,
    tokenize,
    write_counter,
    write_selection,
)

log = logging.getLogger(__name__)


@dataclass
class World:
    vocab: Vocabulary
    target: object
    draft: object

    @property
    def V(self) -> int:
        return len(self.vocab)


def _build_model(spec, streams, V, seed):
    if spec.type == "ngram":
        return train_ngram(streams, spec.order, spec.alpha, V)
    if spec.fit == "random":
        return LinearHeadModel.random(V, spec.d, spec.m, seed=seed)
    return LinearHeadModel.fit_bigram(streams, V, spec.d, spec.m, seed=seed, alpha=spec.alpha)


def build_world(cfg: ExperimentConfig) -> World:
    docs = [d for p in cfg.corpus for d in cal.read_documents(p)]
    vocab = build_vocab(docs, cfg.vocab_size)
    streams = [tokenize(d, vocab) for d in docs]
    V = len(vocab)
    target = _build_model(cfg.target, streams, V, derive_seed(cfg.seed, "target"))
    draft = _build_model(cfg.draft, streams, V, derive_seed(cfg.seed, "draft"))
    log.info("vocab V=%d, target params=%d, draft params=%d", V, target.param_count(), draft.param_count())
    return World(vocab, target, draft)


def calibration_source(cfg: ExperimentConfig, name: str):
    if name == "raw":
        return cal.Raw(cfg.raw_calibration)
    if name == "target":
        return cal.TargetGenerated(cfg.calibration_prompts, cfg.calibration_max_new)
    if name == "draft":
        return cal.DraftGenerated(cfg.calibration_prompts, cfg.calibration_max_new)
    raise ValueError(name)


def calibrate(cfg: ExperimentConfig, world: World, source: str) -> FrequencyCounter:
    streams = cal.produce_calibration_streams(
        calibration_source(cfg, source), world.target, world.draft, world.vocab,
        seed=derive_seed(cfg.seed, f"calibration/{source}"), count_prompts=cfg.count_prompts)
    return count_token_frequencies(streams, world.V)


def eval_prompts(cfg: ExperimentConfig, vocab: Vocabulary) -> list:
    return [tokenize(p, vocab, add_eos=False) for p in cal.read_prompts(cfg.eval_prompts)]


def latency_for(cfg: ExperimentConfig, world: World, draft) -> LatencyModel:
    if cfg.relative_latency is None:
        c = relative_latency(draft.param_count(), world.target.param_count())
    else:
        # the override is the full drafter's cost; trimmed drafters scale with their size
        c = cfg.relative_latency * draft.param_count() / world.draft.param_count()
    return LatencyModel(c, cfg.gamma_value())


def decode_prompts(cfg: ExperimentConfig, world: World, draft, prompts):
    """Decode every prompt; raise if any output differs from plain greedy decoding."""
    outputs, runs = [], []
    for prompt in prompts:
        out, stats = spd_generate(world.target, draft, None, prompt, cfg.max_new, cfg.tree,
                                  world.vocab.eos_id)
        if out != greedy_decode(world.target, prompt, cfg.max_new, world.vocab.eos_id):
            raise InvariantViolation("speculative output differs from greedy target decode")
        outputs.append(out)
        runs.append(stats)
    return outputs, merge_stats(runs)


def _write_outputs(path: Path, vocab: Vocabulary, outputs) -> None:
    path.write_text("".join(vocab.decode(o) + "\n" for o in outputs), encoding="utf-8", newline="\n")


def _row(cfg, world, draft, prompts, K, source, out_dir, tag):
    outputs, stats = decode_prompts(cfg, world, draft, prompts)
    if out_dir is not None:
        _write_outputs(out_dir / f"outputs_{tag}.txt", world.vocab, outputs)
    return make_row(cfg.task_name, K, head_params(draft), stats, latency_for(cfg, world, draft),
                    cfg.seed, source)


def trimmed_draft(world: World, counter: FrequencyCounter, criterion) -> tuple[TrimSelection, TrimmedHeadModel]:
    selection = select_trim(counter, criterion, world.vocab.special)
    return selection, trim_head(world.draft, selection)


def run_pipeline(cfg: ExperimentConfig, world: World | None = None, write: bool = True) -> BenchReport:
    """Baseline row plus one trimmed row per calibration source."""
    world = world or build_world(cfg)
    out_dir = Path(cfg.out_dir) if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        world.vocab.save(out_dir / "vocab.txt")
        save_model(out_dir / "target.vtlm", world.target)
        save_model(out_dir / "draft.vtlm", world.draft)
    prompts = eval_prompts(cfg, world.vocab)
    criterion = parse_criterion(cfg.criterion, V=world.V)

    report = BenchReport()
    report.rows.append(_row(cfg, world, world.draft, prompts, world.V, "baseline", out_dir, "baseline"))
    for source in cfg.sources:
        counter = calibrate(cfg, world, source)
        selection, draft = trimmed_draft(world, counter, criterion)
        if out_dir is not None:
            write_counter(out_dir / f"counter_{source}.txt", counter)
            write_selection(out_dir / f"selection_{source}.txt", selection, world.V)
        report.rows.append(_row(cfg, world, draft, prompts, selection.K, source, out_dir, source))

    trimmed = [r for r in report.rows if r.calibration_source != "baseline"]
    if trimmed:
        report.notes.append("source ordering by BE:   " + source_ordering(trimmed, "block_efficiency"))
        report.notes.append("source ordering by MBSU: " + source_ordering(trimmed, "mbsu"))
    report.notes.append(f"gamma = {cfg.gamma} ({cfg.gamma_value()})"
                        + ("" if cfg.relative_latency is None else f", relative latency override {cfg.relative_latency}"))
    for note in report.notes:
        log.info(note)
    if out_dir is not None:
        report.write_csv(out_dir / "report.csv")
    return report


def source_ordering(rows, metric: str) -> str:
    """``"target > draft = raw"`` style ranking of calibration sources."""
    rows = sorted(rows, key=lambda r: (-getattr(r, metric), r.calibration_source))
    text = rows[0].calibration_source
    for prev, row in zip(rows, rows[1:]):
        text += (" = " if getattr(row, metric) == getattr(prev, metric) else " > ") + row.calibration_source
    return text


def sweep_sizes(cfg: ExperimentConfig, V: int, n_special: int) -> list:
    sizes = []
    for f in cfg.sweep_fractions:
        k = min(V, max(n_special, round(f * V)))
        if k not in sizes:
            sizes.append(k)
    return sorted(sizes)


def run_sweep(cfg: ExperimentConfig, world: World | None = None, write: bool = True) -> BenchReport:
    """One row per K on a fixed calibration counter."""
    world = world or build_world(cfg)
    out_dir = Path(cfg.out_dir) if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    prompts = eval_prompts(cfg, world.vocab)
    counter = calibrate(cfg, world, cfg.sweep_source)
    if out_dir is not None:
        write_counter(out_dir / f"counter_{cfg.sweep_source}.txt", counter)
    report = BenchReport()
    for K in sweep_sizes(cfg, world.V, len(world.vocab.special)):
        selection, draft = trimmed_draft(world, counter, TopK(K))
        if out_dir is not None:
            write_selection(out_dir / f"selection_K{K}.txt", selection, world.V)
        report.rows.append(_row(cfg, world, draft, prompts, K, cfg.sweep_source, out_dir, f"K{K}"))
        log.info("K=%d BE=%.4f MBSU=%.4f", K, report.rows[-1].block_efficiency, report.rows[-1].mbsu)
    if out_dir is not None:
        report.write_csv(out_dir / "sweep.csv")
        (out_dir / "plot_data.csv").write_text(plot_data(report.rows), encoding="utf-8", newline="\n")
    return report
