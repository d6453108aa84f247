"""Shadow ACL basics: rows, the owner/group/other cascade, root denial.

The list lives outside the guest.  Each row pins a path to octal permission
bits and an owner; whoever the requester is, unlisted paths are considered
noncritical and permitted by default.
"""

from hvguard import AccessKind, check_access, effective_octet, parse_sacl

SACL_TEXT = """\
/home/user/Documents/critical.txt 644 1000 1000
/home/user/Desktop/read-only.pdf  400 1000 1000
/etc/shadow 400 0 0
"""

sacl = parse_sacl(SACL_TEXT)
print(f"loaded {len(sacl)} rows")

# The owner of critical.txt may read and write; everyone else may only read.
entry = sacl.lookup("/home/user/Documents/critical.txt")
print("owner octet:", effective_octet(entry, 1000, 1000))
print("group octet:", effective_octet(entry, 2000, 1000))
print("other octet:", effective_octet(entry, 2000, 2000))

# uid 0 is just another uid here: the /etc/shadow row grants root read-only,
# so even a root-owned process cannot write the password store.
for uid, kind in [(0, AccessKind.READ), (0, AccessKind.WRITE)]:
    decision = check_access(sacl, "/etc/shadow", uid, 0, kind)
    print(f"root {kind.name.lower():7s} /etc/shadow -> {decision.value}")

# Paths without a row fall through to the caller's default.
print("unlisted file ->", check_access(sacl, "/tmp/scratch", 0, 0, AccessKind.WRITE).value)
