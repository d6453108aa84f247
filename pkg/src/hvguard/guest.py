"""Deterministic model of the protected guest: users, processes, file tree.

The guest applies its own permission bits after mediation, so a permissive
shadow list can never grant an access the guest itself forbids.  Syscall
outcomes are values, never exceptions; a nulled argument slot produced by a
denial surfaces as the error code the corresponding shell transcript shows.
File contents are not modeled, only existence, ownership, and permissions.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, replace
from enum import Enum

from .sacl import PermissionOctets

# Calls interposed by the hypervisor layer: every file-operation and
# kernel-access call, plus clone for process tracking.
INTERPOSED_CALLS = (
    "open",
    "openat",
    "name_to_handle_at",
    "open_by_handle_at",
    "rename",
    "renameat",
    "renameat2",
    "unlink",
    "unlinkat",
    "truncate",
    "link",
    "linkat",
    "symlink",
    "symlinkat",
    "execve",
    "execveat",
    "exit",
    "exit_group",
    "init_module",
    "finit_module",
    "kexec_load",
)
TRAPPED_CALLS = INTERPOSED_CALLS + ("clone",)

OPEN_CALLS = frozenset({"open", "openat"})
RENAME_CALLS = frozenset({"rename", "renameat", "renameat2"})
UNLINK_CALLS = frozenset({"unlink", "unlinkat"})
LINK_CALLS = frozenset({"link", "linkat"})
SYMLINK_CALLS = frozenset({"symlink", "symlinkat"})
EXEC_CALLS = frozenset({"execve", "execveat"})
EXIT_CALLS = frozenset({"exit", "exit_group"})
# Calls whose pointer slot is not a resolvable path (module image, handle).
POINTER_SLOT_CALLS = frozenset(
    {"init_module", "finit_module", "kexec_load", "open_by_handle_at"}
)

# open(2) flag vocabulary understood by the model.
WRITE_INTENT_FLAGS = frozenset({"O_WRONLY", "O_RDWR", "O_CREAT", "O_TRUNC", "O_APPEND"})

INIT_PID = 1

_DEFAULT_FILE_PERMS = PermissionOctets(6, 4, 4)
_DEFAULT_DIR_PERMS = PermissionOctets(7, 5, 5)


class ErrorCode(Enum):
    BAD_ADDRESS = "bad_address"
    BAD_FILE_DESCRIPTOR = "bad_file_descriptor"
    NO_SUCH_FILE = "no_such_file"
    PERMISSION_DENIED = "permission_denied"


@dataclass(frozen=True, slots=True)
class SyscallOutcome:
    """Success (error is None) or a failure carrying exactly one code."""

    error: ErrorCode | None = None

    @property
    def success(self) -> bool:
        return self.error is None

    @classmethod
    def ok(cls) -> "SyscallOutcome":
        return cls(None)

    @classmethod
    def fail(cls, code: ErrorCode) -> "SyscallOutcome":
        return cls(code)


@dataclass(frozen=True, slots=True)
class UserAccount:
    uid: int
    gid: int
    name: str


@dataclass(frozen=True, slots=True)
class GuestFile:
    path: str
    owner_uid: int
    owner_gid: int
    guest_perms: PermissionOctets
    is_directory: bool = False


@dataclass
class Process:
    """claimed_uid/gid are what the guest kernel believes; the mediation
    layer keeps its own fork-time record and treats that as authoritative."""

    pid: int
    claimed_uid: int
    claimed_gid: int
    parent_pid: int
    alive: bool = True


@dataclass(frozen=True, slots=True)
class SyscallEvent:
    """One trapped call.

    Argument slots mirror the 64-bit calling convention's register order:
    ``path`` is the first pointer-carrying slot (source for rename, target
    for symlink, module image for init_module), ``path2`` the second (rename
    destination, new name for link/symlink).  None is the null-address
    marker a denial writes into a slot.
    """

    seq: int
    pid: int
    call: str
    path: str | None = None
    path2: str | None = None
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.call not in TRAPPED_CALLS:
            raise ValueError(f"unknown syscall: {self.call!r}")
        for p in (self.path, self.path2):
            if p is not None and not p.startswith("/"):
                raise ValueError(f"path argument is not absolute: {p!r}")


class GuestError(RuntimeError):
    """Scenario-level misuse of the guest (dead pid, duplicate path, ...)."""


def nulled_error_code(call: str, flags: frozenset[str]) -> ErrorCode:
    """Error a call yields when its pointer slot was nulled by a denial.

    Fixed per call: a write-intent open surfaces at the shell-redirection
    level as a bad descriptor, a read-only open fails the address lookup
    itself; module loading reports a bad descriptor; every other path call
    faults on the null address.
    """
    if call in OPEN_CALLS:
        if flags & WRITE_INTENT_FLAGS:
            return ErrorCode.BAD_FILE_DESCRIPTOR
        return ErrorCode.BAD_ADDRESS
    if call in ("init_module", "finit_module", "open_by_handle_at"):
        return ErrorCode.BAD_FILE_DESCRIPTOR
    return ErrorCode.BAD_ADDRESS


def _octet_for(perms: PermissionOctets, owner_uid: int, owner_gid: int, uid: int, gid: int) -> int:
    if uid == owner_uid:
        return perms.user
    if gid == owner_gid:
        return perms.group
    return perms.other


class Guest:
    """Mutable guest state, owned by a single simulator loop."""

    def __init__(self):
        self.users: dict[int, UserAccount] = {}
        self.files: dict[str, GuestFile] = {}
        self.processes: dict[int, Process] = {INIT_PID: Process(INIT_PID, 0, 0, 0)}
        # Callables (pid, uid, gid) invoked on every successful spawn.
        self.fork_listeners: list = []
        self._next_pid = INIT_PID + 1

    # -- construction -----------------------------------------------------

    def add_user(self, uid: int, gid: int, name: str) -> UserAccount:
        if uid in self.users:
            raise GuestError(f"duplicate uid: {uid}")
        account = UserAccount(uid, gid, name)
        self.users[uid] = account
        return account

    def add_file(
        self,
        path: str,
        owner_uid: int,
        owner_gid: int,
        perms: PermissionOctets,
        is_directory: bool = False,
    ) -> GuestFile:
        """Insert a tree node, creating missing parent directories as
        root-owned 755 entries."""
        if not path.startswith("/") or path == "/":
            raise GuestError(f"bad path: {path!r}")
        if path in self.files:
            raise GuestError(f"duplicate path: {path}")
        self._ensure_parents(path)
        node = GuestFile(path, owner_uid, owner_gid, perms, is_directory)
        self.files[path] = node
        return node

    def _ensure_parents(self, path: str) -> None:
        parent = posixpath.dirname(path)
        if parent == "/" or parent in self.files:
            return
        self._ensure_parents(parent)
        self.files[parent] = GuestFile(parent, 0, 0, _DEFAULT_DIR_PERMS, True)

    # -- processes --------------------------------------------------------

    def spawn_process(self, parent_pid: int, uid: int, gid: int, pid: int | None = None) -> int:
        if not self.is_alive(parent_pid):
            raise GuestError(f"parent pid {parent_pid} is not alive")
        if pid is None:
            pid = self._next_pid
        elif self.is_alive(pid):
            raise GuestError(f"pid {pid} already alive")
        self._next_pid = max(self._next_pid, pid + 1)
        self.processes[pid] = Process(pid, uid, gid, parent_pid)
        for listener in self.fork_listeners:
            listener(pid, uid, gid)
        return pid

    def set_claimed(self, pid: int, uid: int, gid: int) -> None:
        proc = self.processes.get(pid)
        if proc is None or not proc.alive:
            raise GuestError(f"pid {pid} is not alive")
        proc.claimed_uid = uid
        proc.claimed_gid = gid

    def is_alive(self, pid: int) -> bool:
        proc = self.processes.get(pid)
        return proc is not None and proc.alive

    def live_pids(self) -> set[int]:
        return {p.pid for p in self.processes.values() if p.alive}

    # -- syscall semantics ------------------------------------------------

    def execute_syscall(self, event: SyscallEvent) -> SyscallOutcome:
        """Apply one already-mediated call to the tree.

        Denials never raise: a nulled slot produces its fixed error code.
        Guest permission bits are enforced with the process's claimed
        credentials; uid 0 bypasses them, as a root attacker would expect.
        """
        proc = self.processes.get(event.pid)
        if proc is None or not proc.alive:
            raise GuestError(f"pid {event.pid} is not alive")
        call = event.call

        if call in EXIT_CALLS:
            proc.alive = False
            return SyscallOutcome.ok()
        if call == "clone":
            self.spawn_process(event.pid, proc.claimed_uid, proc.claimed_gid)
            return SyscallOutcome.ok()
        if call in POINTER_SLOT_CALLS:
            if event.path is None:
                return SyscallOutcome.fail(nulled_error_code(call, event.flags))
            return SyscallOutcome.ok()

        # Every remaining call resolves a path from its first slot.
        if event.path is None:
            return SyscallOutcome.fail(nulled_error_code(call, event.flags))
        uid, gid = proc.claimed_uid, proc.claimed_gid

        if call in OPEN_CALLS:
            return self._do_open(event, uid, gid)
        if call == "truncate":
            return self._do_truncate(event.path, uid, gid)
        if call in RENAME_CALLS:
            return self._do_rename(event, uid, gid)
        if call in UNLINK_CALLS:
            return self._do_unlink(event.path, uid, gid)
        if call in LINK_CALLS or call in SYMLINK_CALLS:
            return self._do_link(event, uid, gid, symbolic=call in SYMLINK_CALLS)
        if call in EXEC_CALLS:
            return self._do_exec(event.path, uid, gid)
        if call == "name_to_handle_at":
            if event.path not in self.files:
                return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
            return SyscallOutcome.ok()
        raise GuestError(f"unhandled call: {call}")  # pragma: no cover

    # -- helpers ----------------------------------------------------------

    def _allows(self, node: GuestFile, uid: int, gid: int, bit: int) -> bool:
        if uid == 0:
            return True
        return bool(_octet_for(node.guest_perms, node.owner_uid, node.owner_gid, uid, gid) & bit)

    def _dir_node(self, path: str) -> GuestFile | None:
        # "/" exists implicitly and behaves like a root-owned 755 directory.
        if path == "/":
            return GuestFile("/", 0, 0, _DEFAULT_DIR_PERMS, True)
        node = self.files.get(path)
        return node if node is not None and node.is_directory else None

    def _parent_writable(self, path: str, uid: int, gid: int):
        """Returns (parent node, error outcome or None)."""
        parent = self._dir_node(posixpath.dirname(path))
        if parent is None:
            return None, SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if not self._allows(parent, uid, gid, 2):
            return None, SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        return parent, None

    def _do_open(self, event: SyscallEvent, uid: int, gid: int) -> SyscallOutcome:
        path, flags = event.path, event.flags
        node = self.files.get(path)
        if node is None:
            if "O_CREAT" not in flags:
                return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
            _, err = self._parent_writable(path, uid, gid)
            if err is not None:
                return err
            self.files[path] = GuestFile(path, uid, gid, _DEFAULT_FILE_PERMS)
            return SyscallOutcome.ok()
        wants_write = bool(flags & {"O_WRONLY", "O_RDWR", "O_TRUNC", "O_APPEND"})
        wants_read = "O_WRONLY" not in flags
        if node.is_directory and wants_write:
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        if wants_write and not self._allows(node, uid, gid, 2):
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        if wants_read and not self._allows(node, uid, gid, 4):
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        return SyscallOutcome.ok()

    def _do_truncate(self, path: str, uid: int, gid: int) -> SyscallOutcome:
        node = self.files.get(path)
        if node is None:
            return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if node.is_directory or not self._allows(node, uid, gid, 2):
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        return SyscallOutcome.ok()

    def _do_rename(self, event: SyscallEvent, uid: int, gid: int) -> SyscallOutcome:
        src, dst = event.path, event.path2
        if dst is None:
            return SyscallOutcome.fail(ErrorCode.BAD_ADDRESS)
        node = self.files.get(src)
        if node is None:
            return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if node.is_directory:
            # Moving directories would orphan child paths; out of model scope.
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        for endpoint in (src, dst):
            _, err = self._parent_writable(endpoint, uid, gid)
            if err is not None:
                return err
        existing = self.files.get(dst)
        if existing is not None and existing.is_directory:
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        del self.files[src]
        self.files[dst] = replace(node, path=dst)
        return SyscallOutcome.ok()

    def _do_unlink(self, path: str, uid: int, gid: int) -> SyscallOutcome:
        node = self.files.get(path)
        if node is None:
            return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if node.is_directory:
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        _, err = self._parent_writable(path, uid, gid)
        if err is not None:
            return err
        del self.files[path]
        return SyscallOutcome.ok()

    def _do_link(self, event: SyscallEvent, uid: int, gid: int, symbolic: bool) -> SyscallOutcome:
        target, newpath = event.path, event.path2
        if newpath is None:
            return SyscallOutcome.fail(ErrorCode.BAD_ADDRESS)
        node = self.files.get(target)
        if not symbolic and node is None:
            return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if newpath in self.files:
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        _, err = self._parent_writable(newpath, uid, gid)
        if err is not None:
            return err
        if symbolic:
            self.files[newpath] = GuestFile(newpath, uid, gid, PermissionOctets(7, 7, 7))
        else:
            self.files[newpath] = replace(node, path=newpath)
        return SyscallOutcome.ok()

    def _do_exec(self, path: str, uid: int, gid: int) -> SyscallOutcome:
        node = self.files.get(path)
        if node is None:
            return SyscallOutcome.fail(ErrorCode.NO_SUCH_FILE)
        if node.is_directory or not self._allows(node, uid, gid, 1):
            return SyscallOutcome.fail(ErrorCode.PERMISSION_DENIED)
        return SyscallOutcome.ok()
