"""Shadow access-control list: parsing, storage, and permission decisions.

The list lives outside the guest it protects and is invisible to it.  Each
row pins one absolute path to a three-octet permission mask and an owning
uid/gid; a decision for a requester cascades owner -> group -> other exactly
like classic Unix mode bits.  Paths without a row are considered noncritical
and fall through to a caller-chosen default decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Iterator

READ_BIT = 4
WRITE_BIT = 2
EXECUTE_BIT = 1


class AccessKind(IntEnum):
    """The three access classes a permission octet can grant.

    An IntEnum whose value is the mode bit, so members mask directly
    against an octet.
    """

    READ = READ_BIT
    WRITE = WRITE_BIT
    EXECUTE = EXECUTE_BIT

    @property
    def bit(self) -> int:
        return int(self)


class Decision(Enum):
    PERMIT = "permit"
    DENY = "deny"


class SaclParseError(ValueError):
    """Malformed SACL text; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, slots=True)
class PermissionOctets:
    """User/group/other octets, each 0..7 (read=4, write=2, execute=1)."""

    user: int
    group: int
    other: int

    def __post_init__(self):
        for octet in (self.user, self.group, self.other):
            if not isinstance(octet, int) or not 0 <= octet <= 7:
                raise ValueError(f"octet out of range 0..7: {octet!r}")

    @classmethod
    def from_text(cls, text: str) -> "PermissionOctets":
        """Parse a 3-character octal string such as "644"."""
        if len(text) != 3 or any(c not in "01234567" for c in text):
            raise ValueError(f"not a 3-digit octal permission: {text!r}")
        return cls(int(text[0]), int(text[1]), int(text[2]))

    def to_text(self) -> str:
        return f"{self.user}{self.group}{self.other}"


@dataclass(frozen=True, slots=True)
class SaclEntry:
    """One row: absolute path, permission octets, and owner uid/gid.

    uid/gid 0 denote the root user and root group.  The octets are also
    denormalized onto the entry itself so a decision touches one object.
    """

    path: str
    perms: PermissionOctets
    owner_uid: int
    owner_gid: int
    user_octet: int = field(init=False)
    group_octet: int = field(init=False)
    other_octet: int = field(init=False)

    def __post_init__(self):
        if not self.path.startswith("/"):
            raise ValueError(f"path is not absolute: {self.path!r}")
        if self.owner_uid < 0 or self.owner_gid < 0:
            raise ValueError("owner uid/gid must be non-negative")
        object.__setattr__(self, "user_octet", self.perms.user)
        object.__setattr__(self, "group_octet", self.perms.group)
        object.__setattr__(self, "other_octet", self.perms.other)


class Sacl:
    """The shadow list, a hashtable keyed by full path (amortized O(1))."""

    def __init__(self, entries: Iterable[SaclEntry] = ()):
        self.entries: dict[str, SaclEntry] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: SaclEntry) -> None:
        if entry.path in self.entries:
            raise ValueError(f"duplicate path: {entry.path}")
        self.entries[entry.path] = entry

    def lookup(self, path: str) -> SaclEntry | None:
        """Exact full-path match; no prefix or glob semantics."""
        return self.entries.get(path)

    def remove(self, path: str) -> None:
        self.entries.pop(path, None)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, path: str) -> bool:
        return path in self.entries

    def __iter__(self) -> Iterator[SaclEntry]:
        return iter(self.entries.values())


def parse_sacl(text: str) -> Sacl:
    """Parse SACL file content into a list.

    Format: one entry per line, ``<absolute-path> <3-octal-digits> <uid>
    <gid>`` separated by spaces or tabs.  Blank lines and ``#`` comment
    lines are skipped.  Paths may not contain whitespace.  Duplicate or
    relative paths, bad octal digits, and missing columns raise
    SaclParseError naming the line.
    """
    sacl = Sacl()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise SaclParseError(line_no, f"expected 4 fields, got {len(fields)}")
        path, perm_text, uid_text, gid_text = fields
        if not path.startswith("/"):
            raise SaclParseError(line_no, f"path is not absolute: {path!r}")
        try:
            perms = PermissionOctets.from_text(perm_text)
        except ValueError as exc:
            raise SaclParseError(line_no, str(exc)) from None
        if not uid_text.isdigit() or not gid_text.isdigit():
            raise SaclParseError(line_no, "uid/gid must be decimal non-negative integers")
        if path in sacl:
            raise SaclParseError(line_no, f"duplicate path: {path}")
        sacl.add(SaclEntry(path, perms, int(uid_text), int(gid_text)))
    return sacl


def serialize_sacl(sacl: Sacl) -> str:
    """Canonical text form: parse(serialize(s)) reproduces s."""
    lines = [
        f"{e.path} {e.perms.to_text()} {e.owner_uid} {e.owner_gid}" for e in sacl
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def effective_octet(entry: SaclEntry, uid: int, gid: int) -> int:
    """Select the octet governing a requester: owner, then group, then other.

    Exactly one octet applies; the cascade is on uid first, gid second.
    """
    if uid == entry.owner_uid:
        return entry.perms.user
    if gid == entry.owner_gid:
        return entry.perms.group
    return entry.perms.other


def check_access(
    sacl: Sacl,
    path: str,
    uid: int,
    gid: int,
    kind: AccessKind,
    default: Decision = Decision.PERMIT,
) -> Decision:
    """Decide one (path, requester, access kind) triple against the list.

    A path with no entry yields ``default``: Permit under the normal
    noncritical-by-default policy, Deny when the caller runs execute
    white-listing.  Pure function; no state is touched.
    """
    entry = sacl.entries.get(path)
    if entry is None:
        return default
    # Owner/group/other cascade inlined: this runs once per checked path on
    # the hot mediation path and must stay close to the cost of a miss.
    if uid == entry.owner_uid:
        octet = entry.user_octet
    elif gid == entry.owner_gid:
        octet = entry.group_octet
    else:
        octet = entry.other_octet
    return Decision.PERMIT if octet & kind else Decision.DENY


def generate_full_sacl(guest_fs) -> Sacl:
    """Build a permit-style list mirroring a guest tree's own metadata.

    Accepts a Guest or any iterable of objects carrying path, owner_uid,
    owner_gid, and guest_perms attributes; emits one entry per tree node
    with the node's own permissions and owner copied verbatim.
    """
    files = guest_fs.files.values() if hasattr(guest_fs, "files") else guest_fs
    sacl = Sacl()
    for f in files:
        sacl.add(SaclEntry(f.path, f.guest_perms, f.owner_uid, f.owner_gid))
    return sacl
