"""Block efficiency, relative latency, memory-bound speed-up and bench reports."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .decode import DecodeStats
from .errors import InvariantViolation, ZeroBlocks, ZeroTarget

CSV_COLUMNS = ("task", "K", "head_params", "BE", "MBSU", "produced", "blocks", "seed", "source")


@dataclass(frozen=True)
class LatencyModel:
    c: float
    gamma: int

    def __post_init__(self):
        if not (self.c >= 0 and self.c != float("inf")):
            raise ValueError("relative latency must be finite and >= 0")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")


def block_efficiency(stats: DecodeStats) -> float:
    """Tokens emitted per target verification."""
    if stats.blocks < 1:
        raise ZeroBlocks("block efficiency needs at least one block")
    return stats.produced / stats.blocks


def relative_latency(draft_params: int, target_params: int) -> float:
    if target_params <= 0:
        raise ZeroTarget("target parameter count must be positive")
    return draft_params / target_params


def mbsu(tau: float, c: float, gamma: int) -> float:
    return tau / (c * gamma + 1)


def merge_stats(runs: Iterable[DecodeStats]) -> DecodeStats:
    """Pool several decodes into one; block efficiency becomes a token-weighted mean."""
    accepted = []
    depth = None
    for s in runs:
        accepted.extend(s.accepted_per_block)
        depth = s.draft_passes_per_block
    return DecodeStats(len(accepted), sum(a + 1 for a in accepted), tuple(accepted), depth or 1)


@dataclass(frozen=True)
class BenchRow:
    task: str
    K: int
    head_params: int
    block_efficiency: float
    mbsu: float
    produced: int
    blocks: int
    seed: int
    calibration_source: str
    # kept for recomputation, not written to CSV
    c: float = field(default=0.0, compare=False)
    gamma: int = field(default=1, compare=False)
    accepted_per_block: tuple = field(default=(), repr=False, compare=False)

    def csv_fields(self) -> list:
        return [self.task, self.K, self.head_params, repr(self.block_efficiency), repr(self.mbsu),
                self.produced, self.blocks, self.seed, self.calibration_source]


def make_row(task: str, K: int, head_params: int, stats: DecodeStats, latency: LatencyModel,
             seed: int, source: str) -> BenchRow:
    tau = block_efficiency(stats)
    if not 1.0 <= tau <= stats.draft_passes_per_block + 1:
        raise InvariantViolation(f"block efficiency {tau} outside [1, depth + 1]")
    return BenchRow(task, K, head_params, tau, mbsu(tau, latency.c, latency.gamma),
                    stats.produced, stats.blocks, seed, source,
                    latency.c, latency.gamma, stats.accepted_per_block)


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    def table(self) -> str:
        head = f"{'task':<14}{'source':<10}{'K':>7}{'head':>10}{'BE':>8}{'MBSU':>8}{'produced':>10}{'blocks':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.task:<14}{r.calibration_source:<10}{r.K:>7}{r.head_params:>10}"
                         f"{r.block_efficiency:>8.3f}{r.mbsu:>8.3f}{r.produced:>10}{r.blocks:>8}")
        lines.extend(self.notes)
        return "\n".join(lines)


def plot_data(rows: Sequence[BenchRow]) -> str:
    """``K,BE,MBSU`` triples, ascending K."""
    lines = ["K,BE,MBSU"]
    for r in sorted(rows, key=lambda r: r.K):
        lines.append(f"{r.K},{r.block_efficiency!r},{r.mbsu!r}")
    return "\n".join(lines) + "\n"
