import csv
import io

import numpy as np
import pytest

from vocabtrim.decode import DecodeStats
from vocabtrim.errors import InvariantViolation, ZeroBlocks, ZeroTarget
from vocabtrim.lm import LinearHeadModel, trim_head
from vocabtrim.metrics import (
    CSV_COLUMNS,
    BenchReport,
    LatencyModel,
    block_efficiency,
    make_row,
    mbsu,
    merge_stats,
    plot_data,
    relative_latency,
)
from vocabtrim.vocab import TrimSelection


def stats(accepted, depth=3):
    return DecodeStats(len(accepted), sum(a + 1 for a in accepted), tuple(accepted), depth)


def test_be_upper_bound_case():
    assert block_efficiency(stats([3])) == 4.0


def test_be_all_rejected():
    assert block_efficiency(stats([0, 0, 0, 0])) == 1.0


def test_be_zero_blocks():
    with pytest.raises(ZeroBlocks):
        block_efficiency(DecodeStats(0, 0, (), 3))


@pytest.mark.parametrize("seed", range(10))
def test_be_recount(seed):
    acc = list(map(int, np.random.default_rng(seed).integers(0, 4, size=20)))
    assert block_efficiency(stats(acc)) == (sum(acc) + len(acc)) / len(acc)


def test_relative_latency():
    assert relative_latency(100, 1000) == 0.1
    with pytest.raises(ZeroTarget):
        relative_latency(5, 0)


def test_trimmed_drafter_is_cheaper():
    m = LinearHeadModel.random(40, 4, 1, seed=0)
    t = trim_head(m, TrimSelection(np.arange(10), ""))
    target_params = 10_000
    assert relative_latency(t.param_count(), target_params) < relative_latency(m.param_count(), target_params)
    assert relative_latency(t.param_count(), target_params) == (40 * 4 + 4 + 10 * 4) / target_params


def test_mbsu_examples():
    assert mbsu(2.7, 0.0, 3) == 2.7
    assert mbsu(2.0, 0.25, 4) == 1.0


def test_mbsu_monotone():
    grid = [1.0, 0.5, 0.25, 0.1, 0.01, 0.0]
    vals = [mbsu(3.0, c, 3) for c in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    taus = [1.0, 1.5, 2.0, 4.0]
    vals = [mbsu(t, 0.2, 3) for t in taus]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_latency_model_validation():
    with pytest.raises(ValueError):
        LatencyModel(-0.1, 3)
    with pytest.raises(ValueError):
        LatencyModel(float("inf"), 3)
    with pytest.raises(ValueError):
        LatencyModel(0.1, 0)


def test_merge_stats_pools_blocks():
    m = merge_stats([stats([1, 2]), stats([0])])
    assert m.accepted_per_block == (1, 2, 0)
    assert m.blocks == 3 and m.produced == 6


def test_make_row_and_bounds():
    row = make_row("t", 10, 40, stats([1, 3, 0]), LatencyModel(0.5, 3), 42, "raw")
    assert row.block_efficiency == 7 / 3
    assert row.mbsu == (7 / 3) / 2.5
    with pytest.raises(InvariantViolation):
        make_row("t", 10, 40, DecodeStats(1, 5, (4,), 3), LatencyModel(0.5, 3), 42, "raw")


def test_report_csv_layout(tmp_path):
    report = BenchReport([make_row("t", 10, 40, stats([1]), LatencyModel(0.5, 3), 42, "raw")])
    report.write_csv(tmp_path / "r.csv")
    raw = (tmp_path / "r.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1] == ["t", "10", "40", "2.0", repr(2.0 / 2.5), "2", "1", "42", "raw"]
    assert "raw" in report.table()


def test_plot_data_sorted_by_k():
    rows = [make_row("t", k, k, stats([1]), LatencyModel(0.1, 3), 0, "target") for k in (50, 5, 20)]
    lines = plot_data(rows).splitlines()
    assert lines[0] == "K,BE,MBSU"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["5", "20", "50"]
