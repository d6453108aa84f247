"""Scenario trace format and the loop wiring guest, traps, and mediation.

A scenario is JSON-lines text, one event object per line (blank lines and
``#`` comments allowed):

    {"ev":"user","uid":1000,"gid":1000,"name":"user"}
    {"ev":"file","path":"/etc/shadow","uid":0,"gid":0,"perm":"640"}
    {"ev":"file","path":"/home/user","uid":1000,"gid":1000,"perm":"755","dir":true}
    {"ev":"spawn","pid":2,"parent":1,"uid":1000,"gid":1000}
    {"ev":"sudo","pid":2,"uid":0,"gid":0}
    {"ev":"forge","pid":2,"uid":0,"gid":0}
    {"ev":"sys","pid":2,"call":"open","path":"/etc/shadow","flags":["O_WRONLY"]}
    {"ev":"expect","decision":"deny"}

"sudo" is a trusted ownership change and updates the fork-time table;
"forge" alters only what the guest kernel believes, modeling an attacker
rewriting process credentials.  "expect" asserts on the immediately
preceding sys event: required key "decision" (permit|deny), optional
"error" (an outcome error code) and "status" (success|error).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .guest import EXIT_CALLS, TRAPPED_CALLS, Guest, GuestError, SyscallEvent, SyscallOutcome
from .mediator import (
    AuthConfig,
    OwnershipTable,
    PolicyOptions,
    Verdict,
    apply_verdict,
    mediate,
)
from .sacl import PermissionOctets, Sacl
from .trap import CostModel, TrapMode, TrapSequenceRecord, arm, handle_trap, make_site

DECISION_LOG_COLUMNS = (
    "seq",
    "pid",
    "call",
    "resolved_uid",
    "resolved_gid",
    "decision",
    "reason",
    "mismatch",
)


class ScenarioError(ValueError):
    """Invalid scenario text or an event the guest state cannot accept."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class DecisionRow:
    """One decision-log line, emitted per mediated sys event."""

    seq: int
    pid: int
    call: str
    resolved_uid: int
    resolved_gid: int
    decision: str
    reason: str
    mismatch: bool

    def csv(self) -> str:
        return (
            f"{self.seq},{self.pid},{self.call},{self.resolved_uid},"
            f"{self.resolved_gid},{self.decision},{self.reason},"
            f"{'true' if self.mismatch else 'false'}"
        )


class Simulation:
    """Owns all mutable state for one run; strictly single-threaded.

    Every trapped call flows breakpoint-hit -> mediation callback ->
    forwarded (possibly nulled) event -> guest execution, with one trap
    record and one decision-log row per call.
    """

    def __init__(
        self,
        sacl: Sacl | None = None,
        options: PolicyOptions | None = None,
        auth: AuthConfig | None = None,
        cost_model: CostModel | None = None,
    ):
        self.sacl = sacl if sacl is not None else Sacl()
        self.options = options if options is not None else PolicyOptions()
        self.auth = auth if auth is not None else AuthConfig()
        self.cost_model = cost_model
        self.guest = Guest()
        self.table = OwnershipTable()
        self.sessions: dict[int, int] = {}
        self.clock = 0
        nop = self.options.trap_mode is TrapMode.NOP2
        self.sites = {call: arm(make_site(call, nop_prologue=nop)) for call in TRAPPED_CALLS}
        self.records: list[TrapSequenceRecord] = []
        self.decisions: list[DecisionRow] = []
        self.outcomes: list[SyscallOutcome] = []
        self.guest.fork_listeners.append(self._on_fork)

    def _on_fork(self, pid: int, uid: int, gid: int) -> None:
        self.table.on_fork(pid, uid, gid, self.clock)

    def _tick(self) -> int:
        self.clock += 1
        return self.clock

    # -- scenario events ----------------------------------------------------

    def add_user(self, uid: int, gid: int, name: str) -> None:
        self._tick()
        self.guest.add_user(uid, gid, name)

    def add_file(self, path, uid, gid, perms: PermissionOctets, is_directory=False) -> None:
        self._tick()
        self.guest.add_file(path, uid, gid, perms, is_directory)

    def spawn(self, parent_pid: int, uid: int, gid: int, pid: int | None = None) -> int:
        self._tick()
        return self.guest.spawn_process(parent_pid, uid, gid, pid=pid)

    def sudo(self, pid: int, uid: int, gid: int) -> None:
        self._tick()
        self.guest.set_claimed(pid, uid, gid)
        self.table.on_sudo(pid, uid, gid)

    def forge_credentials(self, pid: int, uid: int, gid: int) -> None:
        """Attacker-style credential rewrite: the guest believes it, the
        ownership table does not."""
        self._tick()
        self.guest.set_claimed(pid, uid, gid)

    def syscall(
        self,
        pid: int,
        call: str,
        path: str | None = None,
        path2: str | None = None,
        flags=(),
    ) -> tuple[Verdict, SyscallOutcome]:
        seq = self._tick()
        if not self.guest.is_alive(pid):
            raise GuestError(f"pid {pid} is not alive")
        proc = self.guest.processes[pid]
        event = SyscallEvent(seq, pid, call, path, path2, frozenset(flags))
        holder: dict[str, Verdict] = {}

        def callback(ev: SyscallEvent):
            v = mediate(
                ev,
                proc.claimed_uid,
                proc.claimed_gid,
                self.sacl,
                self.table,
                self.options,
                self.auth,
                self.sessions,
                seq,
            )
            holder["verdict"] = v
            return apply_verdict(ev, v), v.probes

        record, forwarded = handle_trap(
            self.sites[call], event, callback, self.options.trap_mode, self.cost_model
        )
        outcome = self.guest.execute_syscall(forwarded)
        if call in EXIT_CALLS:
            self.table.on_exit(pid)
        verdict = holder["verdict"]
        self.records.append(record)
        self.outcomes.append(outcome)
        self.decisions.append(
            DecisionRow(
                seq,
                pid,
                call,
                verdict.resolved_uid,
                verdict.resolved_gid,
                verdict.decision.value,
                verdict.reason.value,
                verdict.mismatch,
            )
        )
        return verdict, outcome

    def decision_log(self) -> str:
        lines = [",".join(DECISION_LOG_COLUMNS)]
        lines.extend(row.csv() for row in self.decisions)
        return "\n".join(lines) + "\n"


@dataclass
class ScenarioResult:
    simulation: Simulation
    sys_events: int = 0
    expect_checks: int = 0
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def parse_scenario(text: str) -> list[tuple[int, dict]]:
    """JSON-lines to (line_no, event dict) pairs, validated structurally."""
    events = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(line_no, f"bad JSON: {exc}") from None
        if not isinstance(obj, dict) or "ev" not in obj:
            raise ScenarioError(line_no, "event must be an object with an 'ev' key")
        events.append((line_no, obj))
    return events


def _need(line_no: int, obj: dict, key: str):
    if key not in obj:
        raise ScenarioError(line_no, f"'{obj['ev']}' event missing key {key!r}")
    return obj[key]


def run_scenario(
    text: str,
    sacl: Sacl | None = None,
    options: PolicyOptions | None = None,
    auth: AuthConfig | None = None,
    cost_model: CostModel | None = None,
) -> ScenarioResult:
    """Replay a scenario; expectation mismatches are collected, not raised."""
    sim = Simulation(sacl=sacl, options=options, auth=auth, cost_model=cost_model)
    result = ScenarioResult(sim)
    last: tuple[Verdict, SyscallOutcome] | None = None

    for line_no, obj in parse_scenario(text):
        ev = obj["ev"]
        try:
            if ev == "user":
                sim.add_user(_need(line_no, obj, "uid"), _need(line_no, obj, "gid"), obj.get("name", ""))
            elif ev == "file":
                perms = PermissionOctets.from_text(str(_need(line_no, obj, "perm")))
                sim.add_file(
                    _need(line_no, obj, "path"),
                    _need(line_no, obj, "uid"),
                    _need(line_no, obj, "gid"),
                    perms,
                    bool(obj.get("dir", False)),
                )
            elif ev == "spawn":
                sim.spawn(
                    _need(line_no, obj, "parent"),
                    _need(line_no, obj, "uid"),
                    _need(line_no, obj, "gid"),
                    pid=_need(line_no, obj, "pid"),
                )
            elif ev == "sudo":
                sim.sudo(_need(line_no, obj, "pid"), _need(line_no, obj, "uid"), _need(line_no, obj, "gid"))
            elif ev == "forge":
                sim.forge_credentials(
                    _need(line_no, obj, "pid"), _need(line_no, obj, "uid"), _need(line_no, obj, "gid")
                )
            elif ev == "sys":
                flags = obj.get("flags", [])
                if not isinstance(flags, list):
                    raise ScenarioError(line_no, "'flags' must be a list of strings")
                last = sim.syscall(
                    _need(line_no, obj, "pid"),
                    _need(line_no, obj, "call"),
                    path=obj.get("path"),
                    path2=obj.get("path2"),
                    flags=flags,
                )
                result.sys_events += 1
            elif ev == "expect":
                if last is None:
                    raise ScenarioError(line_no, "'expect' with no preceding sys event")
                _check_expect(line_no, obj, last, result)
            else:
                raise ScenarioError(line_no, f"unknown event type {ev!r}")
        except ScenarioError:
            raise
        except (GuestError, ValueError, KeyError) as exc:
            raise ScenarioError(line_no, str(exc)) from None
    return result


def _check_expect(line_no: int, obj: dict, last, result: ScenarioResult) -> None:
    verdict, outcome = last
    result.expect_checks += 1
    wanted = _need(line_no, obj, "decision")
    if wanted not in ("permit", "deny"):
        raise ScenarioError(line_no, f"decision must be permit or deny, got {wanted!r}")
    if verdict.decision.value != wanted:
        result.mismatches.append(
            f"line {line_no}: expected decision {wanted}, got {verdict.decision.value}"
        )
    if "status" in obj:
        actual = "success" if outcome.success else "error"
        if obj["status"] != actual:
            result.mismatches.append(
                f"line {line_no}: expected status {obj['status']}, got {actual}"
            )
    if "error" in obj:
        actual_err = outcome.error.value if outcome.error else "none"
        if obj["error"] != actual_err:
            result.mismatches.append(
                f"line {line_no}: expected error {obj['error']}, got {actual_err}"
            )
