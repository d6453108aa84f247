"""Breakpoint trap handling, step by step, in both modes.

The classic sequence restores the original first byte, single-steps one
instruction, and re-injects the breakpoint: two VM-exit/VM-entry pairs per
trapped call.  A site compiled with a NOP prologue keeps its breakpoint
permanently and only advances the instruction pointer: one pair.
"""

from hvguard import CostModel, SyscallEvent, TrapMode, arm, cost_of, handle_trap, make_site

event = SyscallEvent(seq=1, pid=2, call="open", path="/etc/hosts", flags=frozenset({"O_RDONLY"}))
model = CostModel(switch_cost=1.0)


def show(mode, nop):
    site = arm(make_site("open", nop_prologue=nop))
    record, _ = handle_trap(site, event, lambda ev: (ev, 0), mode, model)
    print(f"\n{mode.value} handling of one open():")
    for step in record.steps:
        print("   ", step)
    print(
        f"  -> {record.vm_exits} VM-exits, {record.vm_entries} VM-entries, "
        f"{record.single_steps} single-steps; modeled cost {cost_of(record, model):.0f} switch units"
    )
    return record


classic = show(TrapMode.CLASSIC4, nop=False)
nop = show(TrapMode.NOP2, nop=True)

ratio = cost_of(classic, model) / cost_of(nop, model)
print(f"\nwith a free callback, the NOP-prologue mode halves the overhead: ratio = {ratio:.2f}")

# With a real callback cost c and switch cost s the ratio is (4s+c)/(2s+c).
priced = CostModel(switch_cost=1.0, callback_base_cost=2.0)
c4, _ = handle_trap(arm(make_site("open")), event, lambda ev: (ev, 0), TrapMode.CLASSIC4, priced)
n2, _ = handle_trap(arm(make_site("open", nop_prologue=True)), event, lambda ev: (ev, 0), TrapMode.NOP2, priced)
print(f"with callback cost 2 and switch cost 1: ratio = {cost_of(c4, priced) / cost_of(n2, priced):.2f}")
