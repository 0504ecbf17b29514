"""Injective mapping from arbitrary TSTP names to ``[A-Za-z0-9_]+`` identifiers.

Every byte outside ``[A-Za-z0-9_]`` becomes ``_xHH``. An underscore that
would otherwise be read back as the start of an escape is itself escaped,
which keeps the mapping invertible.
"""
import re

_ESCAPE = re.compile(r"_x([0-9A-F]{2})")
_SAFE = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")


def sanitize(name: str) -> str:
    raw = name.encode("utf-8")
    out = []
    for i, b in enumerate(raw):
        c = chr(b)
        if c in _SAFE:
            out.append(c)
        elif c == "_" and not _ESCAPE.match(raw[i:i + 4].decode("latin-1")):
            out.append(c)
        else:
            out.append(f"_x{b:02X}")
    return "".join(out)


def unsanitize(ident: str) -> str:
    data = bytearray()
    i = 0
    while i < len(ident):
        m = _ESCAPE.match(ident, i)
        if m:
            data.append(int(m.group(1), 16))
            i = m.end()
        else:
            data.extend(ident[i].encode("ascii"))
            i += 1
    return data.decode("utf-8")
