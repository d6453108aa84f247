"""Guest model: processes, file-tree syscall semantics, determinism."""

import pytest

from hvguard.guest import (
    ErrorCode,
    Guest,
    GuestError,
    INTERPOSED_CALLS,
    SyscallEvent,
    SyscallOutcome,
    TRAPPED_CALLS,
    nulled_error_code,
)
from hvguard.sacl import PermissionOctets

RW = PermissionOctets(6, 4, 4)
DIR = PermissionOctets(7, 5, 5)


def make_guest():
    guest = Guest()
    guest.add_file("/home/user", 1000, 1000, DIR, is_directory=True)
    guest.add_file("/home/user/a.txt", 1000, 1000, RW)
    guest.add_file("/home/user/run", 1000, 1000, PermissionOctets(7, 5, 5))
    pid = guest.spawn_process(1, 1000, 1000)
    return guest, pid


def ev(pid, call, path=None, path2=None, flags=(), seq=1):
    return SyscallEvent(seq, pid, call, path, path2, frozenset(flags))


def test_trapped_call_set_is_closed():
    assert len(INTERPOSED_CALLS) == 21
    assert len(TRAPPED_CALLS) == 22
    assert "clone" in TRAPPED_CALLS and "clone" not in INTERPOSED_CALLS
    with pytest.raises(ValueError):
        SyscallEvent(1, 1, "getpid")


def test_spawn_assigns_distinct_pids_and_notifies():
    guest = Guest()
    seen = []
    guest.fork_listeners.append(lambda pid, uid, gid: seen.append((pid, uid, gid)))
    a = guest.spawn_process(1, 1000, 1000)
    b = guest.spawn_process(1, 1000, 1000)
    assert a != b
    assert seen == [(a, 1000, 1000), (b, 1000, 1000)]


def test_spawn_from_dead_parent_fails():
    guest = Guest()
    pid = guest.spawn_process(1, 0, 0)
    guest.execute_syscall(ev(pid, "exit"))
    with pytest.raises(GuestError):
        guest.spawn_process(pid, 0, 0)


def test_spawn_explicit_pid_conflict():
    guest = Guest()
    guest.spawn_process(1, 0, 0, pid=5)
    with pytest.raises(GuestError):
        guest.spawn_process(1, 0, 0, pid=5)


def test_exit_removes_pid_from_live_views():
    guest, pid = make_guest()
    assert pid in guest.live_pids()
    out = guest.execute_syscall(ev(pid, "exit_group"))
    assert out.success
    assert pid not in guest.live_pids()
    with pytest.raises(GuestError):
        guest.execute_syscall(ev(pid, "open", "/home/user/a.txt"))


def test_clone_spawns_child_with_caller_credentials():
    guest, pid = make_guest()
    before = guest.live_pids()
    assert guest.execute_syscall(ev(pid, "clone")).success
    (child,) = guest.live_pids() - before
    proc = guest.processes[child]
    assert (proc.claimed_uid, proc.claimed_gid) == (1000, 1000)


def test_open_missing_file():
    guest, pid = make_guest()
    out = guest.execute_syscall(ev(pid, "open", "/tokens/nope", flags=["O_RDONLY"]))
    assert out.error is ErrorCode.NO_SUCH_FILE


def test_open_create_in_missing_directory():
    guest, pid = make_guest()
    out = guest.execute_syscall(ev(pid, "open", "/tokens/x", flags=["O_CREAT", "O_WRONLY"]))
    assert out.error is ErrorCode.NO_SUCH_FILE


def test_open_create_then_reopen():
    guest, pid = make_guest()
    assert guest.execute_syscall(ev(pid, "open", "/home/user/new", flags=["O_CREAT", "O_WRONLY"])).success
    assert "/home/user/new" in guest.files
    assert guest.execute_syscall(ev(pid, "open", "/home/user/new", flags=["O_RDONLY"])).success


def test_guest_perms_enforced_for_non_root():
    guest, _ = make_guest()
    other = guest.spawn_process(1, 2000, 2000)
    out = guest.execute_syscall(ev(other, "open", "/home/user/a.txt", flags=["O_WRONLY"]))
    assert out.error is ErrorCode.PERMISSION_DENIED
    # read bit is set for others
    assert guest.execute_syscall(ev(other, "open", "/home/user/a.txt", flags=["O_RDONLY"])).success


def test_root_bypasses_guest_perms():
    guest, _ = make_guest()
    root = guest.spawn_process(1, 0, 0)
    assert guest.execute_syscall(ev(root, "open", "/home/user/a.txt", flags=["O_WRONLY"])).success


def test_rename_moves_tree_entry():
    guest, pid = make_guest()
    out = guest.execute_syscall(ev(pid, "rename", "/home/user/a.txt", "/home/user/b.txt"))
    assert out.success
    assert "/home/user/a.txt" not in guest.files
    assert guest.files["/home/user/b.txt"].owner_uid == 1000


def test_rename_missing_source():
    guest, pid = make_guest()
    out = guest.execute_syscall(ev(pid, "rename", "/home/user/nope", "/home/user/b"))
    assert out.error is ErrorCode.NO_SUCH_FILE


def test_unlink_and_truncate():
    guest, pid = make_guest()
    assert guest.execute_syscall(ev(pid, "truncate", "/home/user/a.txt")).success
    assert guest.execute_syscall(ev(pid, "unlink", "/home/user/a.txt")).success
    assert guest.execute_syscall(ev(pid, "unlink", "/home/user/a.txt")).error is ErrorCode.NO_SUCH_FILE


def test_link_and_symlink():
    guest, pid = make_guest()
    assert guest.execute_syscall(ev(pid, "link", "/home/user/a.txt", "/home/user/hard")).success
    assert guest.execute_syscall(ev(pid, "link", "/home/user/nope", "/home/user/x")).error is ErrorCode.NO_SUCH_FILE
    # symlink target may dangle
    assert guest.execute_syscall(ev(pid, "symlink", "/home/user/nope", "/home/user/soft")).success


def test_execve_semantics():
    guest, pid = make_guest()
    assert guest.execute_syscall(ev(pid, "execve", "/home/user/run")).success
    assert guest.execute_syscall(ev(pid, "execve", "/home/user/neverthere")).error is ErrorCode.NO_SUCH_FILE
    guest.add_file("/home/user/noexec", 1000, 1000, PermissionOctets(6, 4, 4))
    assert guest.execute_syscall(ev(pid, "execve", "/home/user/noexec")).error is ErrorCode.PERMISSION_DENIED


def test_nulled_slot_error_codes():
    # write-intent opens surface as a bad descriptor, read-only opens and
    # other path calls fault on the address, module loading reports a bad
    # descriptor
    assert nulled_error_code("open", frozenset({"O_WRONLY"})) is ErrorCode.BAD_FILE_DESCRIPTOR
    assert nulled_error_code("open", frozenset({"O_CREAT", "O_WRONLY"})) is ErrorCode.BAD_FILE_DESCRIPTOR
    assert nulled_error_code("open", frozenset({"O_RDONLY"})) is ErrorCode.BAD_ADDRESS
    assert nulled_error_code("openat", frozenset()) is ErrorCode.BAD_ADDRESS
    assert nulled_error_code("execve", frozenset()) is ErrorCode.BAD_ADDRESS
    assert nulled_error_code("rename", frozenset()) is ErrorCode.BAD_ADDRESS
    assert nulled_error_code("init_module", frozenset()) is ErrorCode.BAD_FILE_DESCRIPTOR
    assert nulled_error_code("finit_module", frozenset()) is ErrorCode.BAD_FILE_DESCRIPTOR
    assert nulled_error_code("open_by_handle_at", frozenset()) is ErrorCode.BAD_FILE_DESCRIPTOR
    assert nulled_error_code("kexec_load", frozenset()) is ErrorCode.BAD_ADDRESS


def test_nulled_slot_outcomes_through_guest():
    guest, pid = make_guest()
    out = guest.execute_syscall(ev(pid, "execve", None))
    assert out.error is ErrorCode.BAD_ADDRESS
    out = guest.execute_syscall(ev(pid, "open", None, flags=["O_CREAT", "O_WRONLY"]))
    assert out.error is ErrorCode.BAD_FILE_DESCRIPTOR
    out = guest.execute_syscall(ev(pid, "init_module", None))
    assert out.error is ErrorCode.BAD_FILE_DESCRIPTOR


def test_outcome_success_carries_no_code():
    assert SyscallOutcome.ok().error is None
    assert SyscallOutcome.ok().success
    assert not SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE).success


def test_event_paths_must_be_absolute_or_null():
    with pytest.raises(ValueError):
        SyscallEvent(1, 1, "open", "relative.txt")
    SyscallEvent(1, 1, "open", None)  # null marker is fine


def test_replay_is_deterministic():
    script = [
        ("open", "/home/user/a.txt", None, ("O_RDONLY",)),
        ("rename", "/home/user/a.txt", "/home/user/b.txt", ()),
        ("unlink", "/home/user/b.txt", None, ()),
        ("open", "/home/user/c", None, ("O_CREAT", "O_WRONLY")),
        ("execve", "/home/user/run", None, ()),
    ]

    def run():
        guest, pid = make_guest()
        return [
            guest.execute_syscall(SyscallEvent(seq, pid, call, path, path2, frozenset(flags)))
            for seq, (call, path, path2, flags) in enumerate(script, start=1)
        ]

    assert run() == run()
