"""Admissible parameter sequences.

An admissible sequence is strictly increasing with value i congruent to i
mod 7 and to 0 mod 3 (both residues together: congruent to 15*i mod 21), and
with gaps value(i+1) - value(i) >= i.  Indexing is 1-based throughout, to
match how the pair products consume the values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True)
class RSequence:
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def r(self, i: int) -> int:
        """1-based access: r(1) is the first value."""
        if not 1 <= i <= len(self.values):
            raise InputError(f"index {i} outside 1..{len(self.values)}")
        return self.values[i - 1]

    def to_json(self) -> str:
        return json.dumps(list(self.values))

    @classmethod
    def from_json(cls, text: str) -> "RSequence":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(x, int) for x in data):
            raise InputError("sequence file must hold a JSON array of integers")
        return cls(tuple(data))


def generate(n: int, r_min: int = 15) -> RSequence:
    """Smallest admissible sequence of length n with first value >= r_min.

    Value i is the least integer >= max(r_min, previous + max(i-1, 1))
    congruent to 15*i mod 21.
    """
    if n < 1:
        raise InputError("need n >= 1")
    if r_min < 3:
        raise InputError("need r_min >= 3")
    values: list[int] = []
    prev = None
    for i in range(1, n + 1):
        lo = r_min if prev is None else max(r_min, prev + max(i - 1, 1))
        residue = (15 * i) % 21
        candidate = lo + ((residue - lo) % 21)
        values.append(candidate)
        prev = candidate
    return RSequence(tuple(values))


def validate(seq: RSequence) -> list[str]:
    """All violated invariants, empty when admissible."""
    violations: list[str] = []
    vals = seq.values if isinstance(seq, RSequence) else tuple(seq)
    for i, v in enumerate(vals, start=1):
        if v <= 0:
            violations.append(f"i={i}: value {v} not positive")
        if v % 7 != i % 7:
            violations.append(f"i={i}: {v} mod 7 != {i % 7}")
        if v % 3 != 0:
            violations.append(f"i={i}: {v} not divisible by 3")
    for i in range(1, len(vals)):
        gap = vals[i] - vals[i - 1]
        if gap <= 0:
            violations.append(f"i={i+1}: not strictly increasing")
        if gap < i:
            violations.append(f"i={i}: gap {gap} below required {i}")
    return violations


def generate_geometric(n: int, r_min: int = 15, gap_factor: int = 30) -> RSequence:
    """Admissible sequence with gaps at least gap_factor * i.

    Useful where the asymptotic statements need gaps growing faster than the
    bare admissibility floor.
    """
    if n < 1:
        raise InputError("need n >= 1")
    values: list[int] = []
    prev = None
    for i in range(1, n + 1):
        lo = r_min if prev is None else max(r_min, prev + max(gap_factor * (i - 1), 1))
        residue = (15 * i) % 21
        candidate = lo + ((residue - lo) % 21)
        values.append(candidate)
        prev = candidate
    return RSequence(tuple(values))
