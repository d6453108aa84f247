"""Breakpoint trap state machine and context-switch cost accounting.

A trap site models the first byte of a syscall's code plus an instruction
pointer cursor.  Arming writes the 0xCC breakpoint opcode over the original
byte.  Handling a hit either walks the classic restore/single-step/re-inject
dance (two VM-exit/VM-entry pairs) or, when the site was compiled with a NOP
prologue, simply steps the instruction pointer past the permanently armed
breakpoint (one pair).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

BREAKPOINT_OPCODE = 0xCC
NOP_OPCODE = 0x90
# Stand-in first byte of an ordinary, non-NOP-prologue syscall (push rbp).
DEFAULT_ORIGINAL_OPCODE = 0x55


class TrapMode(Enum):
    CLASSIC4 = "classic"
    NOP2 = "nop"


class TrapStateError(RuntimeError):
    """Illegal transition: double-arm, unarmed handle, mode/site mismatch."""


@dataclass
class TrapSite:
    """First code byte and IP cursor for one trapped syscall symbol."""

    symbol: str
    original_opcode: int = DEFAULT_ORIGINAL_OPCODE
    armed: bool = False
    current_byte: int = field(default=-1)
    ip: int = 0

    def __post_init__(self):
        if self.current_byte == -1:
            self.current_byte = self.original_opcode


def make_site(symbol: str, nop_prologue: bool = False) -> TrapSite:
    """A fresh, unarmed site; nop_prologue marks code compiled with a
    leading 0x90 so the breakpoint can stay in place permanently."""
    original = NOP_OPCODE if nop_prologue else DEFAULT_ORIGINAL_OPCODE
    return TrapSite(symbol=symbol, original_opcode=original)


def arm(site: TrapSite) -> TrapSite:
    """Inject the breakpoint, retaining the original byte for restoration."""
    if site.armed:
        raise TrapStateError(f"site {site.symbol} already armed")
    site.current_byte = BREAKPOINT_OPCODE
    site.armed = True
    return site


@dataclass(frozen=True)
class CostModel:
    """Duration units per context switch, per callback, and per SACL probe."""

    switch_cost: float = 0.0
    callback_base_cost: float = 0.0
    lookup_cost: float = 0.0

    def __post_init__(self):
        if min(self.switch_cost, self.callback_base_cost, self.lookup_cost) < 0:
            raise ValueError("costs must be non-negative")


@dataclass(frozen=True)
class TrapSequenceRecord:
    """Exact switch sequence and cost for one handled trap."""

    symbol: str
    mode: TrapMode
    vm_exits: int
    vm_entries: int
    single_steps: int
    callback_cost: float
    steps: tuple[str, ...]


CLASSIC4_STEPS = (
    "VM-exit",
    "callback",
    "restore-original",
    "set-single-step",
    "VM-entry",
    "execute-1-instruction",
    "single-step-exception",
    "VM-exit",
    "re-inject-0xCC",
    "clear-single-step",
    "VM-entry",
)

NOP2_STEPS = (
    "VM-exit",
    "callback",
    "advance-instruction-pointer-past-breakpoint",
    "VM-entry",
)

# Callback contract: callable(event) -> (forwarded_event, sacl_probe_count).
TrapCallback = Callable


def handle_trap(
    site: TrapSite,
    event,
    callback: TrapCallback,
    mode: TrapMode,
    cost_model: CostModel | None = None,
):
    """Handle one breakpoint hit; returns (record, forwarded event).

    The callback's verdict, including any nulled path slot, is reflected in
    the forwarded event, which the caller passes onward to the guest.  On
    return the site is armed again in both modes, so no later instance of
    the same call can be missed.  Denial is never an error at this layer.
    """
    if not site.armed:
        raise TrapStateError(f"site {site.symbol} is not armed")
    if event.call != site.symbol:
        raise TrapStateError(f"event {event.call!r} hit site {site.symbol!r}")
    if mode is TrapMode.NOP2 and site.original_opcode != NOP_OPCODE:
        raise TrapStateError(
            f"site {site.symbol} lacks a NOP prologue; cannot skip its first instruction"
        )

    forwarded = event
    probes = 0
    if mode is TrapMode.CLASSIC4:
        steps = CLASSIC4_STEPS
        for label in steps:
            if label == "callback":
                forwarded, probes = callback(event)
            elif label == "restore-original":
                site.current_byte = site.original_opcode
            elif label == "execute-1-instruction":
                site.ip += 1
            elif label == "re-inject-0xCC":
                site.current_byte = BREAKPOINT_OPCODE
    else:
        steps = NOP2_STEPS
        for label in steps:
            if label == "callback":
                forwarded, probes = callback(event)
            elif label == "advance-instruction-pointer-past-breakpoint":
                site.ip += 1

    callback_cost = 0.0
    if cost_model is not None:
        callback_cost = cost_model.callback_base_cost + probes * cost_model.lookup_cost

    record = TrapSequenceRecord(
        symbol=site.symbol,
        mode=mode,
        vm_exits=steps.count("VM-exit"),
        vm_entries=steps.count("VM-entry"),
        single_steps=steps.count("single-step-exception"),
        callback_cost=callback_cost,
        steps=steps,
    )
    assert record.vm_exits == record.vm_entries
    assert site.current_byte == BREAKPOINT_OPCODE  # re-arm guarantee
    return record, forwarded


def cost_of(record: TrapSequenceRecord, model: CostModel) -> float:
    """Modeled duration of one handled trap under the given cost model."""
    return (record.vm_exits + record.vm_entries) * model.switch_cost + record.callback_cost
