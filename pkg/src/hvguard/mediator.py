"""Per-syscall mediation: policy checks, ownership integrity, 2-step auth.

The mediation callback decides every trapped call in a fixed order: hard
kernel-integrity denials first, then a challenge-response attempt on opens
under /tokens/, owner resolution against the fork-time table, the
authentication gate, the execute white-list, and finally the per-path shadow
list checks.  A denial never raises; it nulls the event's first pointer slot
so the call fails naturally inside the guest.
"""

from __future__ import annotations

import hashlib
import posixpath
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .guest import (
    EXEC_CALLS,
    LINK_CALLS,
    OPEN_CALLS,
    RENAME_CALLS,
    SYMLINK_CALLS,
    UNLINK_CALLS,
    SyscallEvent,
)
from .sacl import AccessKind, Decision, Sacl, check_access
from .trap import TrapMode

TOKEN_PREFIX = "/tokens/"
RESPONSE_HEX_LEN = 128  # SHA-512 digest length in hex characters

# Unconditionally blocked calls: module loading, kernel swapping, and the
# two handle-based calls that bypass path-based checks.
HARD_DENIED_CALLS = frozenset(
    {"init_module", "finit_module", "kexec_load", "name_to_handle_at", "open_by_handle_at"}
)

FILE_OP_CALLS = (
    OPEN_CALLS | RENAME_CALLS | UNLINK_CALLS | {"truncate"} | LINK_CALLS | SYMLINK_CALLS | EXEC_CALLS
)


class Reason(Enum):
    PERMIT = "permit"
    SACL_DENY = "sacl_deny"
    HARD_DENIED_CALL = "hard_denied_call"
    UNAUTHENTICATED = "unauthenticated"
    WHITELIST_MISS = "whitelist_miss"
    # Defined for completeness of the closed enumeration: under the current
    # policy a mismatch is logged and the recorded owner used, never a
    # denial of its own.
    OWNERSHIP_MISMATCH_DENY = "ownership_mismatch_deny"


@dataclass(frozen=True, slots=True)
class OwnershipRecord:
    pid: int
    uid: int
    gid: int
    recorded_at: int


class OwnershipTable:
    """Authoritative (uid, gid) per live pid, captured at fork time.

    Updated only by trusted fork/sudo/exit notifications; a claimed
    credential that disagrees with the record is reported as a mismatch and
    the record wins.
    """

    def __init__(self):
        self._records: dict[int, OwnershipRecord] = {}

    def on_fork(self, pid: int, uid: int, gid: int, seq: int) -> None:
        if pid in self._records:
            raise ValueError(f"pid {pid} already tracked")
        self._records[pid] = OwnershipRecord(pid, uid, gid, seq)

    def on_sudo(self, pid: int, new_uid: int, new_gid: int) -> None:
        """Legitimate ownership change; keeps the original capture seq."""
        record = self._records.get(pid)
        if record is None:
            raise KeyError(f"pid {pid} not tracked")
        self._records[pid] = OwnershipRecord(pid, new_uid, new_gid, record.recorded_at)

    def on_exit(self, pid: int) -> None:
        self._records.pop(pid, None)

    def get(self, pid: int) -> OwnershipRecord | None:
        return self._records.get(pid)

    def resolve_owner(self, pid: int, claimed_uid: int, claimed_gid: int):
        """Recorded creds win when present; returns (uid, gid, mismatch)."""
        record = self._records.get(pid)
        if record is None:
            return claimed_uid, claimed_gid, False
        mismatch = record.uid != claimed_uid or record.gid != claimed_gid
        return record.uid, record.gid, mismatch

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, pid: int) -> bool:
        return pid in self._records


@dataclass(frozen=True)
class AuthConfig:
    """Challenge-response configuration.

    Users absent from enabled_uids are implicitly always authenticated;
    every enabled uid must have a shared secret.  The window is counted in
    logical event ticks.
    """

    secrets: Mapping[int, str] = field(default_factory=dict)
    window: int = 300
    enabled_uids: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("auth window must be positive")
        missing = set(self.enabled_uids) - set(self.secrets)
        if missing:
            raise ValueError(f"enabled uids without a secret: {sorted(missing)}")


@dataclass(frozen=True)
class PolicyOptions:
    exec_whitelist: bool = False
    trap_mode: TrapMode = TrapMode.CLASSIC4
    hard_denied_calls: frozenset[str] = HARD_DENIED_CALLS

    def __post_init__(self):
        if not self.hard_denied_calls >= HARD_DENIED_CALLS:
            raise ValueError("hard_denied_calls must include the kernel-integrity set")


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    reason: Reason
    checks: tuple  # (path, AccessKind, Decision) per consulted pair
    resolved_uid: int
    resolved_gid: int
    mismatch: bool
    probes: int  # SACL lookups performed, for the trap cost model


def required_checks(event: SyscallEvent) -> list[tuple[str, AccessKind]]:
    """The (path, access kind) pairs a file-operation call must pass.

    open: read and/or write on the target per flags, plus write on the
    parent directory when creating.  rename: write on both names and both
    parents.  unlink: write on the name and its parent.  truncate: write on
    the name.  link/symlink: write on the new name and its parent.  exec:
    execute on the target.  Null slots contribute no checks; non-file calls
    are a caller error.
    """
    call = event.call
    if call not in FILE_OP_CALLS:
        raise ValueError(f"not a file-operation call: {call!r}")
    checks: list[tuple[str, AccessKind]] = []

    def want(path: str | None, kind: AccessKind) -> None:
        if path is not None:
            checks.append((path, kind))

    def want_parent(path: str | None, kind: AccessKind) -> None:
        if path is not None:
            checks.append((posixpath.dirname(path), kind))

    if call in OPEN_CALLS:
        flags = event.flags
        if "O_RDWR" in flags:
            want(event.path, AccessKind.READ)
            want(event.path, AccessKind.WRITE)
        elif flags & {"O_WRONLY", "O_CREAT", "O_TRUNC", "O_APPEND"}:
            want(event.path, AccessKind.WRITE)
        else:
            want(event.path, AccessKind.READ)
        if "O_CREAT" in flags:
            want_parent(event.path, AccessKind.WRITE)
    elif call in RENAME_CALLS:
        want(event.path, AccessKind.WRITE)
        want(event.path2, AccessKind.WRITE)
        want_parent(event.path, AccessKind.WRITE)
        want_parent(event.path2, AccessKind.WRITE)
    elif call in UNLINK_CALLS:
        want(event.path, AccessKind.WRITE)
        want_parent(event.path, AccessKind.WRITE)
    elif call == "truncate":
        want(event.path, AccessKind.WRITE)
    elif call in LINK_CALLS or call in SYMLINK_CALLS:
        want(event.path2, AccessKind.WRITE)
        want_parent(event.path2, AccessKind.WRITE)
    else:  # exec
        want(event.path, AccessKind.EXECUTE)
    return checks


def _is_lower_hex(text: str) -> bool:
    return all(c in "0123456789abcdef" for c in text)


def token_response(challenge: str, secret: str) -> str:
    """The expected response string: SHA-512 hex of challenge + secret."""
    return hashlib.sha512((challenge + secret).encode()).hexdigest()


def try_token_auth(
    path: str | None,
    pid: int,
    table: OwnershipTable,
    config: AuthConfig,
    sessions: dict[int, int],
    seq: int,
) -> bool:
    """Treat an open under /tokens/ as a challenge-response attempt.

    The file name encodes <challenge><response> where the response is the
    trailing 128 lowercase hex characters.  On a digest match the caller's
    fork-time uid becomes authenticated through seq + window.  Returns True
    whenever the path was a token attempt, verified or not; the open itself
    still reaches the guest and fails against the artificial path.
    """
    if path is None or not path.startswith(TOKEN_PREFIX):
        return False
    blob = path[len(TOKEN_PREFIX):]
    if len(blob) < RESPONSE_HEX_LEN:
        return True
    challenge, response = blob[:-RESPONSE_HEX_LEN], blob[-RESPONSE_HEX_LEN:]
    if not _is_lower_hex(response):
        return True
    record = table.get(pid)
    if record is None:
        return True
    secret = config.secrets.get(record.uid)
    if secret is None:
        return True
    if token_response(challenge, secret) == response:
        sessions[record.uid] = seq + config.window
    return True


def is_authenticated(sessions: dict[int, int], uid: int, config: AuthConfig, seq: int) -> bool:
    """Valid through the recorded expiry seq inclusive; non-enabled uids
    are always authenticated."""
    if uid not in config.enabled_uids:
        return True
    expiry = sessions.get(uid)
    return expiry is not None and seq <= expiry


def mediate(
    event: SyscallEvent,
    claimed_uid: int,
    claimed_gid: int,
    sacl: Sacl,
    table: OwnershipTable,
    options: PolicyOptions,
    config: AuthConfig,
    sessions: dict[int, int],
    seq: int,
) -> Verdict:
    """Decide one trapped call.

    Order: (1) hard-denied calls; (2) token-auth attempt on /tokens/ opens,
    which never denies by itself; (3) owner resolution; (4) an enabled but
    unauthenticated uid is denied any path that has a SACL entry; (5) under
    execute white-listing an unlisted exec target is denied; (6) every
    required (path, kind) pair is checked against the SACL with unlisted
    paths permitted by default.
    """
    probes = 0
    resolved_uid, resolved_gid, mismatch = table.resolve_owner(
        event.pid, claimed_uid, claimed_gid
    )

    def verdict(decision: Decision, reason: Reason, checks=()) -> Verdict:
        return Verdict(decision, reason, tuple(checks), resolved_uid, resolved_gid, mismatch, probes)

    if event.call in options.hard_denied_calls:
        return verdict(Decision.DENY, Reason.HARD_DENIED_CALL)

    if event.call in OPEN_CALLS:
        try_token_auth(event.path, event.pid, table, config, sessions, seq)

    checks = required_checks(event) if event.call in FILE_OP_CALLS else []

    if not is_authenticated(sessions, resolved_uid, config, seq):
        seen = set()
        for path, _ in checks:
            if path in seen:
                continue
            seen.add(path)
            probes += 1
            if sacl.lookup(path) is not None:
                return verdict(Decision.DENY, Reason.UNAUTHENTICATED)

    if options.exec_whitelist and event.call in EXEC_CALLS:
        probes += 1
        if event.path is None or sacl.lookup(event.path) is None:
            return verdict(Decision.DENY, Reason.WHITELIST_MISS)

    results = []
    denied = False
    for path, kind in checks:
        probes += 1
        decision = check_access(sacl, path, resolved_uid, resolved_gid, kind)
        results.append((path, kind, decision))
        denied = denied or decision is Decision.DENY
    if denied:
        return verdict(Decision.DENY, Reason.SACL_DENY, results)
    return verdict(Decision.PERMIT, Reason.PERMIT, results)


def apply_verdict(event: SyscallEvent, verdict: Verdict) -> SyscallEvent:
    """Permit forwards the event untouched; deny nulls its first pointer
    slot so the guest fails the call naturally instead of being told no."""
    if verdict.decision is Decision.PERMIT or event.path is None:
        return event
    return replace(event, path=None)
