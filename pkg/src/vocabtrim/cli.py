"""Command-line driver.

    vocabtrim calibrate --config exp.json --source target -o counter.txt
    vocabtrim trim      --config exp.json --counter counter.txt --criterion topk:0.25v -o sel.txt
    vocabtrim generate  --config exp.json --prompt "to be or not" [--selection sel.txt]
    vocabtrim bench     --config exp.json
    vocabtrim sweep     --config exp.json [--plot-data k_be_mbsu.csv]

Exit codes: 0 ok, 2 config error, 3 data error, 4 invariant violation.
"""
import argparse
import logging
import sys
from pathlib import Path

from . import calibration as cal
from .config import SOURCES, load_config, override
from .decode import spd_generate
from .errors import ConfigError, DataError, InvariantViolation, VocabTrimError
from .lm import trim_head
from .metrics import block_efficiency, mbsu, plot_data
from .pipeline import build_world, calibrate, latency_for, run_pipeline, run_sweep
from .vocab import (
    build_mapping,
    build_vocab,
    parse_criterion,
    read_counter,
    read_selection,
    select_trim,
    tokenize,
    write_counter,
    write_selection,
)

log = logging.getLogger("vocabtrim")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x)


def _names(text):
    return tuple(x for x in text.split(",") if x)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--max-new", type=int)
    common.add_argument("--depth", type=int)
    common.add_argument("--node-top-k", type=int)
    common.add_argument("--max-tokens", type=int)
    common.add_argument("--relative-latency", type=float,
                        help="cost ratio of the full drafter to the target (default: parameter ratio)")
    common.add_argument("--gamma", choices=("depth", "max_tokens"))
    common.add_argument("--count-prompts", action="store_true", default=None,
                        help="count prompt tokens too for generated calibration")
    common.add_argument("--no-figures", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vocabtrim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="write a token counter file")
    p.add_argument("--source", choices=SOURCES, required=True)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("trim", parents=[common], help="write a selection file from a counter")
    p.add_argument("--counter", required=True)
    p.add_argument("--criterion", help="topk:N | topk:0.25v | topp:P | minfreq:F")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("generate", parents=[common], help="decode one prompt and print stats")
    p.add_argument("--prompt", required=True)
    p.add_argument("--selection", help="selection file; omit for the full-vocabulary drafter")
    p.add_argument("--counter", help="counter the selection came from (digest check)")

    p = sub.add_parser("bench", parents=[common], help="baseline vs trimmed drafters per calibration source")
    p.add_argument("--sources", type=_names)
    p.add_argument("--criterion")

    p = sub.add_parser("sweep", parents=[common], help="BE / MBSU over a grid of K")
    p.add_argument("--fractions", dest="sweep_fractions", type=_floats)
    p.add_argument("--source", dest="sweep_source", choices=SOURCES)
    p.add_argument("--plot-data", help="also write K,BE,MBSU triples here")
    return parser


def _config(args):
    cfg = load_config(args.config)
    keys = ("seed", "out_dir", "max_new", "depth", "node_top_k", "max_tokens", "relative_latency",
            "gamma", "count_prompts", "sources", "criterion", "sweep_fractions", "sweep_source")
    return override(cfg, **{k: getattr(args, k, None) for k in keys})


def cmd_calibrate(args, cfg):
    world = build_world(cfg)
    counter = calibrate(cfg, world, args.source)
    write_counter(args.output, counter)
    print(f"{args.output}: V={counter.V} total={counter.total} nonzero={int((counter.counts > 0).sum())}")


def cmd_trim(args, cfg):
    docs = [d for p in cfg.corpus for d in cal.read_documents(p)]
    vocab = build_vocab(docs, cfg.vocab_size)
    counter = read_counter(args.counter)
    if counter.V != len(vocab):
        raise DataError(f"counter has V={counter.V} but the configured vocabulary has {len(vocab)}")
    selection = select_trim(counter, parse_criterion(args.criterion or cfg.criterion, V=counter.V), vocab.special)
    write_selection(args.output, selection, counter.V)
    print(f"{args.output}: kept K={selection.K} of V={counter.V}")


def cmd_generate(args, cfg):
    world = build_world(cfg)
    draft, mapping = world.draft, None
    if args.selection:
        counter = read_counter(args.counter) if args.counter else None
        selection, V = read_selection(args.selection, counter)
        if V != world.V:
            raise DataError(f"selection has V={V} but the configured vocabulary has {world.V}")
        draft = trim_head(world.draft, selection)
        mapping = build_mapping(selection, V)
    prompt = tokenize(args.prompt, world.vocab, add_eos=False)
    out, stats = spd_generate(world.target, draft, mapping, prompt, cfg.max_new, cfg.tree, world.vocab.eos_id)
    lat = latency_for(cfg, world, draft)
    tau = block_efficiency(stats)
    print(world.vocab.decode(out))
    print(f"blocks={stats.blocks} produced={stats.produced} accepted={list(stats.accepted_per_block)}")
    print(f"BE={tau:.4f} c={lat.c:.4f} gamma={lat.gamma} MBSU={mbsu(tau, lat.c, lat.gamma):.4f}")


def cmd_bench(args, cfg):
    report = run_pipeline(cfg)
    print(report.table())
    out = Path(cfg.out_dir)
    if not args.no_figures:
        from .plotting import plot_bench
        plot_bench(report, out / "report.png")
    print(f"report written to {out / 'report.csv'}")


def cmd_sweep(args, cfg):
    report = run_sweep(cfg)
    print(report.table())
    out = Path(cfg.out_dir)
    if args.plot_data:
        Path(args.plot_data).write_text(plot_data(report.rows), encoding="utf-8", newline="\n")
    if not args.no_figures:
        from .plotting import plot_sweep
        plot_sweep(report.rows, out / "sweep.png", title=f"{cfg.task_name} ({cfg.sweep_source} calibration)")
    print(f"sweep written to {out / 'sweep.csv'}")


COMMANDS = {
    "calibrate": cmd_calibrate,
    "trim": cmd_trim,
    "generate": cmd_generate,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return exc.exit_code
    except (VocabTrimError, OSError, UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
