"""Synthetic workloads quantifying trap overhead and mediation cost.

Three deployment scenarios: S1 issues bare syscalls with no trapping at
all; S2 runs the full trap/mediation stack against an empty shadow list;
S3 runs it against a full list with one entry per guest file.  Modeled cost
prices the context-switch sequence; wall-clock timing covers only the
mediation function, since simulated switches cost no real time.
"""

from __future__ import annotations

import gc
import random
import time
from dataclasses import dataclass
from enum import Enum

from .guest import Guest, GuestFile, SyscallEvent
from .mediator import AuthConfig, OwnershipTable, PolicyOptions, apply_verdict, mediate
from .sacl import PermissionOctets, Sacl, generate_full_sacl
from .trap import CostModel, TrapMode, arm, cost_of, handle_trap, make_site

BENCH_CALLS = ("open", "rename", "unlink")

CSV_COLUMNS = (
    "call",
    "scenario",
    "trap_mode",
    "sacl_size",
    "n",
    "mean_model_cost",
    "mean_wall_ns",
    "ratio_vs_S1",
    "total_switches",
)

_WORKLOAD_PERMS = PermissionOctets(6, 4, 4)
_DEFAULT_POOL = 1000


class ScenarioKind(Enum):
    S1_NO_TRAP = "S1_NoTrap"
    S2_EMPTY_SACL = "S2_EmptySacl"
    S3_FULL_SACL = "S3_FullSacl"


@dataclass(frozen=True)
class BenchScenario:
    """file_pool is the guest file count the workload draws targets from;
    None means sacl_size for S3 (the full list covers every file) and a
    small default pool otherwise.  Comparisons across scenarios should pin
    file_pool so only the SACL differs."""

    kind: ScenarioKind
    trap_mode: TrapMode = TrapMode.CLASSIC4
    cost_model: CostModel = CostModel(switch_cost=1.0)
    sacl_size: int = 0
    seed: int = 0
    file_pool: int | None = None

    def __post_init__(self):
        if self.kind is ScenarioKind.S3_FULL_SACL:
            if self.sacl_size < 1:
                raise ValueError("S3 requires sacl_size >= 1")
            if self.file_pool is not None and self.file_pool != self.sacl_size:
                raise ValueError("S3 covers every guest file; file_pool must equal sacl_size")
        if self.file_pool is not None and self.file_pool < 1:
            raise ValueError("file_pool must be >= 1")

    @property
    def pool(self) -> int:
        if self.kind is ScenarioKind.S3_FULL_SACL:
            return self.sacl_size
        return self.file_pool if self.file_pool is not None else _DEFAULT_POOL


@dataclass(frozen=True)
class BenchResult:
    """Aggregates for one (call, scenario) workload.

    mean_model_cost is deterministic under a fixed seed; mean_wall_ns is
    measured and covers the mediation function only (the bare syscall for
    S1).  ratio_vs_S1 compares (bare + mediation) time against a twin
    bare-guest run of the same workload, and is 1.0 for S1 by definition.
    """

    call: str
    scenario: str
    trap_mode: str
    sacl_size: int
    n: int
    mean_model_cost: float
    mean_wall_ns: float
    ratio_vs_s1: float
    total_switches: int

    def csv(self) -> str:
        return (
            f"{self.call},{self.scenario},{self.trap_mode},{self.sacl_size},"
            f"{self.n},{self.mean_model_cost:.6f},{self.mean_wall_ns:.1f},"
            f"{self.ratio_vs_s1:.3f},{self.total_switches}"
        )


def _workload_guest(pool: int):
    """A guest with `pool` root-level files and one root worker process.

    Root-level paths keep the tree flat so a full SACL has exactly `pool`
    entries; a root worker keeps guest-side permission checks out of the
    measured path.
    """
    guest = Guest()
    paths = [f"/f{i:07d}" for i in range(pool)]
    guest.files.update({p: GuestFile(p, 0, 0, _WORKLOAD_PERMS) for p in paths})
    pid = guest.spawn_process(1, 0, 0)
    return guest, paths, pid


def _event_for(call: str, seq: int, pid: int, path: str) -> SyscallEvent:
    if call == "open":
        return SyscallEvent(seq, pid, "open", path, flags=frozenset({"O_RDONLY"}))
    if call == "rename":
        # Rename onto itself: a successful no-op that leaves the pool intact
        # while exercising the full four-check mediation path.
        return SyscallEvent(seq, pid, "rename", path, path2=path)
    if call == "unlink":
        return SyscallEvent(seq, pid, "unlink", path)
    raise ValueError(f"unsupported bench call: {call!r}")


def _bare_mean_ns(call: str, n: int, pool: int, seed: int) -> float:
    """Twin run of the same workload with no trapping or mediation."""
    guest, paths, pid = _workload_guest(pool)
    rng = random.Random(seed)
    total = 0
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i in range(n):
            event = _event_for(call, i + 1, pid, paths[rng.randrange(len(paths))])
            t0 = time.perf_counter_ns()
            guest.execute_syscall(event)
            total += time.perf_counter_ns() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    return total / n


def run_workload(call: str, n: int, scenario: BenchScenario) -> BenchResult:
    """Issue n independent syscalls of one kind through the chosen stack."""
    if call not in BENCH_CALLS:
        raise ValueError(f"call must be one of {BENCH_CALLS}, got {call!r}")
    if n < 1:
        raise ValueError("n must be >= 1")

    pool = scenario.pool
    guest, paths, pid = _workload_guest(pool)
    bare_ns = _bare_mean_ns(call, n, pool, scenario.seed)

    if scenario.kind is ScenarioKind.S1_NO_TRAP:
        return BenchResult(
            call=call,
            scenario=scenario.kind.value,
            trap_mode=scenario.trap_mode.value,
            sacl_size=0,
            n=n,
            mean_model_cost=0.0,
            mean_wall_ns=bare_ns,
            ratio_vs_s1=1.0,
            total_switches=0,
        )

    if scenario.kind is ScenarioKind.S3_FULL_SACL:
        sacl = generate_full_sacl(guest)
        sacl_size = len(sacl)
    else:
        sacl = Sacl()
        sacl_size = 0

    table = OwnershipTable()
    table.on_fork(pid, 0, 0, 0)
    options = PolicyOptions(trap_mode=scenario.trap_mode)
    auth = AuthConfig()
    sessions: dict[int, int] = {}
    site = arm(make_site(call, nop_prologue=scenario.trap_mode is TrapMode.NOP2))
    proc = guest.processes[pid]

    rng = random.Random(scenario.seed)
    wall_total = 0
    model_total = 0.0
    switches = 0

    def run_one(event: SyscallEvent, timed: bool):
        nonlocal wall_total

        def callback(ev):
            nonlocal wall_total
            t0 = time.perf_counter_ns()
            verdict = mediate(
                ev, proc.claimed_uid, proc.claimed_gid,
                sacl, table, options, auth, sessions, ev.seq,
            )
            forwarded = apply_verdict(ev, verdict)
            if timed:
                wall_total += time.perf_counter_ns() - t0
            return forwarded, verdict.probes

        record, forwarded = handle_trap(
            site, event, callback, scenario.trap_mode, scenario.cost_model
        )
        guest.execute_syscall(forwarded)
        return record

    # Warm up the interpreter path before measuring.
    warm_rng = random.Random(scenario.seed + 1)
    for i in range(min(100, n)):
        run_one(_event_for(call, i + 1, pid, paths[warm_rng.randrange(len(paths))]), timed=False)

    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i in range(n):
            event = _event_for(call, i + 1, pid, paths[rng.randrange(len(paths))])
            record = run_one(event, timed=True)
            model_total += cost_of(record, scenario.cost_model)
            switches += record.vm_exits + record.vm_entries
    finally:
        if gc_was_enabled:
            gc.enable()

    mediation_ns = wall_total / n
    return BenchResult(
        call=call,
        scenario=scenario.kind.value,
        trap_mode=scenario.trap_mode.value,
        sacl_size=sacl_size,
        n=n,
        mean_model_cost=model_total / n,
        mean_wall_ns=mediation_ns,
        ratio_vs_s1=(bare_ns + mediation_ns) / bare_ns if bare_ns > 0 else 1.0,
        total_switches=switches,
    )


def sacl_scaling(
    call: str,
    sizes,
    n: int,
    trap_mode: TrapMode = TrapMode.CLASSIC4,
    cost_model: CostModel = CostModel(switch_cost=1.0),
    seed: int = 0,
) -> list[BenchResult]:
    """One full-SACL result per size; sizes must be ascending."""
    sizes = list(sizes)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be non-empty and strictly ascending")
    results = []
    for size in sizes:
        scenario = BenchScenario(
            ScenarioKind.S3_FULL_SACL,
            trap_mode=trap_mode,
            cost_model=cost_model,
            sacl_size=size,
            seed=seed,
        )
        results.append(run_workload(call, n, scenario))
    return results


def results_csv(results) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(r.csv() for r in results)
    return "\n".join(lines) + "\n"


def summary_table(results) -> str:
    header = f"{'call':<8} {'scenario':<14} {'mode':<8} {'sacl':>8} {'model':>12} {'wall_ns':>12} {'ratio':>8} {'switches':>9}"
    rows = [header, "-" * len(header)]
    for r in results:
        rows.append(
            f"{r.call:<8} {r.scenario:<14} {r.trap_mode:<8} {r.sacl_size:>8} "
            f"{r.mean_model_cost:>12.3f} {r.mean_wall_ns:>12.1f} {r.ratio_vs_s1:>8.2f} {r.total_switches:>9}"
        )
    return "\n".join(rows)
