"""Benchmark harness: scenario invariants, determinism, CSV contract."""

import pytest

from hvguard.bench import (
    BenchScenario,
    CSV_COLUMNS,
    ScenarioKind,
    results_csv,
    run_workload,
    sacl_scaling,
    summary_table,
)
from hvguard.trap import CostModel, TrapMode


def test_s1_has_no_traps_and_unit_ratio():
    for call in ("open", "rename", "unlink"):
        result = run_workload(call, 50, BenchScenario(ScenarioKind.S1_NO_TRAP))
        assert result.total_switches == 0
        assert result.ratio_vs_s1 == 1.0
        assert result.mean_model_cost == 0.0


def test_switch_totals_by_mode():
    n = 40
    classic = run_workload("open", n, BenchScenario(ScenarioKind.S2_EMPTY_SACL))
    assert classic.total_switches == 4 * n
    nop = run_workload("open", n, BenchScenario(ScenarioKind.S2_EMPTY_SACL, trap_mode=TrapMode.NOP2))
    assert nop.total_switches == 2 * n


def test_modeled_cost_deterministic_under_seed():
    scenario = BenchScenario(ScenarioKind.S3_FULL_SACL, sacl_size=500, seed=9)
    a = run_workload("rename", 100, scenario)
    b = run_workload("rename", 100, scenario)
    assert a.mean_model_cost == b.mean_model_cost
    assert a.total_switches == b.total_switches
    assert a.sacl_size == b.sacl_size == 500


def test_modeled_cost_constant_across_sizes():
    model = CostModel(switch_cost=1.0, callback_base_cost=2.0, lookup_cost=0.25)
    results = sacl_scaling("unlink", [100, 1000], 50, cost_model=model)
    assert results[0].mean_model_cost == results[1].mean_model_cost
    # unlink performs two probes per call: 4*1.0 + 2.0 + 2*0.25
    assert results[0].mean_model_cost == pytest.approx(6.5)


def test_modeled_halving_between_modes():
    model = CostModel(switch_cost=5.0)
    classic = run_workload("open", 20, BenchScenario(ScenarioKind.S2_EMPTY_SACL, cost_model=model))
    nop = run_workload(
        "open", 20, BenchScenario(ScenarioKind.S2_EMPTY_SACL, trap_mode=TrapMode.NOP2, cost_model=model)
    )
    assert classic.mean_model_cost / nop.mean_model_cost == pytest.approx(2.0)


def test_scaling_requires_ascending_sizes():
    with pytest.raises(ValueError):
        sacl_scaling("open", [1000, 100], 10)
    with pytest.raises(ValueError):
        sacl_scaling("open", [], 10)


def test_workload_argument_validation():
    with pytest.raises(ValueError):
        run_workload("getpid", 10, BenchScenario(ScenarioKind.S1_NO_TRAP))
    with pytest.raises(ValueError):
        run_workload("open", 0, BenchScenario(ScenarioKind.S1_NO_TRAP))
    with pytest.raises(ValueError):
        BenchScenario(ScenarioKind.S3_FULL_SACL)  # sacl_size missing
    with pytest.raises(ValueError):
        BenchScenario(ScenarioKind.S3_FULL_SACL, sacl_size=10, file_pool=20)


def test_csv_columns_exact():
    result = run_workload("open", 5, BenchScenario(ScenarioKind.S2_EMPTY_SACL))
    text = results_csv([result])
    header, row = text.strip().splitlines()
    assert header == "call,scenario,trap_mode,sacl_size,n,mean_model_cost,mean_wall_ns,ratio_vs_S1,total_switches"
    assert header.split(",") == list(CSV_COLUMNS)
    fields = row.split(",")
    assert fields[0] == "open"
    assert fields[1] == "S2_EmptySacl"
    assert fields[4] == "5"


def test_scaling_row_per_size():
    results = sacl_scaling("open", [100, 1000, 10000], 20)
    assert [r.sacl_size for r in results] == [100, 1000, 10000]
    assert all(r.scenario == "S3_FullSacl" for r in results)


def test_summary_table_mentions_every_row():
    results = sacl_scaling("open", [100, 1000], 10)
    table = summary_table(results)
    assert table.count("S3_FullSacl") == 2
