#!/usr/bin/env python3
"""Freeze canonical-rendering vectors for the TypeScript codec tests.

Numbers on the wire must come out byte-identical no matter which side
renders them, so the console's renderer is checked against vectors
produced by the simulation package itself. Doubles are stored as bit
patterns because a JSON literal would already be one lossy round trip.

Run from frontend/: python3 scripts/make-vectors.py
"""

import json
import random
import struct
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))
from cavsim.protocol import _render_number, _render_string  # noqa: E402

EDGE_VALUES = [
    0.0, -0.0, 1.0, -1.0, 0.5, -0.5, 0.1, 0.2, 0.30000000000000004,
    1.0 / 3.0, 2.0 / 3.0, 3.141592653589793, -2.718281828459045,
    123456.789, -0.001, 0.0001, 0.00010000000000000002,
    9.999999999999999e-05, 1e-05, -1.5e-05, 2.5e-07, 5e-324,
    2.2250738585072014e-308, 1.7976931348623157e+308,
    9007199254740991.0, 9007199254740992.0, 9007199254740994.0,
    9500000000000001.0, 9999999999999998.0, 1e16, -1e16, 1.5e16,
    1.0000000000000002e+16, 1e21, 248.60000000000002, -0.09999999999999999,
    0.49999999999999994, 1.9999999999999998, 0.024999999999999998,
]


def main():
    rng = random.Random(0x5CA1AB1E)
    values = list(EDGE_VALUES)
    # Sweep magnitudes across the whole exponent range in both notations.
    for _ in range(3000):
        v = rng.uniform(-1.0, 1.0) * 10.0 ** rng.uniform(-12.0, 18.0)
        values.append(v)
    # Raw bit patterns catch shortest-repr corners no sweep would hit.
    while sum(1 for _ in values) < 7000:
        bits = rng.getrandbits(64)
        (v,) = struct.unpack(">d", struct.pack(">Q", bits))
        if v == v and abs(v) != float("inf"):
            values.append(v)

    numbers = []
    for v in values:
        bits = struct.pack(">d", v).hex()
        numbers.append([bits, _render_number(v)])

    strings = [
        "", "plain", "with space", 'quote " inside', "back\\slash",
        "new\nline", "tab\there", "carriage\rreturn", "bell\x07",
        "null\x00byte", "\x01\x02\x1f", "\x7f delete", "héllo",
        "中文", "emoji \U0001f697", "mixed é中\U0001f697!",
        "/slash/", "back\bspace", "form\ffeed", "é combining",
    ]
    string_vectors = [[s, _render_string(s)] for s in strings]

    out = Path(__file__).resolve().parents[1] / "test" / "data"
    out.mkdir(parents=True, exist_ok=True)
    (out / "number_vectors.json").write_text(
        json.dumps(numbers, indent=0), "utf-8")
    (out / "string_vectors.json").write_text(
        json.dumps(string_vectors, ensure_ascii=False, indent=0), "utf-8")
    print(f"wrote {len(numbers)} number vectors, {len(string_vectors)} string vectors")


if __name__ == "__main__":
    main()
