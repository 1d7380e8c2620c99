"""Writes cache_v1.svec from the byte layout alone, without the Rust code.

Values are a running counter mapped through (k - 10) / 8, so every float is
exact in f32 and the reader test can recompute them.
"""
import struct
from pathlib import Path

D_CLIP, D_TEXT = 3, 2
RECORDS = [("a", 1), ("img/2", 2)]

out = bytearray(b"SVEC" + struct.pack("<III", 1, D_CLIP, D_TEXT))
k = 0


def vec(dim):
    global k
    vals = [(k + i - 10) / 8 for i in range(dim)]
    k += dim
    return struct.pack(f"<{dim}f", *vals)


for ident, n in RECORDS:
    raw = ident.encode()
    out += struct.pack("<I", len(raw)) + raw + struct.pack("<I", n)
    out += vec(D_CLIP) + vec(D_CLIP)
    for _ in range(n):
        out += vec(D_CLIP)
    out += vec(D_TEXT)
    for _ in range(n):
        out += vec(D_TEXT)

Path(__file__).with_name("cache_v1.svec").write_bytes(bytes(out))
