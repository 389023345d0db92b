"""Small helpers for hostname shape checks and apex-suffix matching."""

from __future__ import annotations

MAX_NAME_LEN = 253
MAX_LABEL_LEN = 63

# Characters that can plausibly appear in a queried name, including the
# separator/padding characters used by tunneling payload encoders.
_HOSTNAME_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyz0123456789-._=+/~"
)


def strip_trailing_dot(name: str) -> str:
    return name[:-1] if name.endswith(".") else name


def is_plausible_hostname(name: str) -> bool:
    """True if the string is shaped like a queryable name.

    Permissive on purpose: tunneling payload labels legitimately contain
    '=', '+', '/', '_' and '~', so only clearly-invalid strings (empty
    labels, oversize labels, characters outside the payload alphabet)
    are rejected.
    """
    name = strip_trailing_dot(name.strip())
    if not name or len(name) > MAX_NAME_LEN:
        return False
    for label in name.split("."):
        if not label or len(label) > MAX_LABEL_LEN:
            return False
    return all(ch in _HOSTNAME_CHARS for ch in name.lower())


def matches_apex(qname: str, apex: str) -> bool:
    """Label-boundary suffix match: 'a.evil.com' matches apex 'evil.com',
    'notevil.com' does not."""
    qname = strip_trailing_dot(qname.strip().lower())
    apex = strip_trailing_dot(apex.strip().lower())
    if not apex:
        return False
    return qname == apex or qname.endswith("." + apex)
