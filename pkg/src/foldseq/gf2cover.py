"""Mod-2 coverage computation for products of the block transition matrices.

Everything is over GF(2) with rows packed as 7-bit integers.  The supergolden
matrix has order 7 mod 2, so the mod-2 block matrix depends only on the
parameter mod 7 and the whole computation reduces to seven residues.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import specmat
from .errors import ResourceError

SIZE = 7
FULL_COUNT = 2 ** SIZE


def _mat_from_int_matrix(m: specmat.IntMatrix) -> tuple[int, ...]:
    return m.mod2_rows()


def _mat_mul(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    # row i of a*b: xor of rows of b selected by bits of a's row i
    out = []
    for row in a:
        acc = 0
        r = row
        j = 0
        while r:
            if r & 1:
                acc ^= b[j]
            r >>= 1
            j += 1
        out.append(acc)
    return tuple(out)


def _mat_vec(a: tuple[int, ...], v: int) -> int:
    out = 0
    for i, row in enumerate(a):
        if bin(row & v).count("1") & 1:
            out |= 1 << i
    return out


def _identity() -> tuple[int, ...]:
    return tuple(1 << i for i in range(SIZE))


def base_mod2() -> tuple[int, ...]:
    """The 3x3 supergolden matrix mod 2, packed."""
    return specmat.SUPERGOLDEN.mod2_rows()


def block_mod2(i: int) -> tuple[int, ...]:
    """The 7x7 block matrix for parameter i, mod 2."""
    return _mat_from_int_matrix(specmat.unfold_block(i % 7 if i % 7 else 7))


_BLOCKS: dict[int, tuple[int, ...]] = {}


def _block(i: int) -> tuple[int, ...]:
    key = i % 7
    if key not in _BLOCKS:
        _BLOCKS[key] = _mat_from_int_matrix(specmat.unfold_block(key + 7))
    return _BLOCKS[key]


def base_period() -> int:
    """Multiplicative order of the supergolden matrix mod 2."""
    b = base_mod2()
    acc = b
    ident = (1, 2, 4)
    for k in range(1, 64):
        if acc == ident:
            return k
        acc = _mat_mul(acc, b)
    raise ResourceError("order of the base matrix mod 2 not found below 64")


def b_period_check() -> bool:
    """True iff the supergolden matrix has order exactly 7 mod 2."""
    return base_period() == 7


def start_space() -> frozenset[int]:
    """The 8 vectors supported on coordinates 4-6 (0-based bits 3,4,5)."""
    return frozenset((i << 3) | (j << 4) | (k << 5)
                     for i in (0, 1) for j in (0, 1) for k in (0, 1))


@dataclass
class CoverageRow:
    residue: int
    index: int
    covered: int


def coverage_index(i: int, cap: int = 200) -> int:
    """Smallest absolute index j such that accumulating the images of the
    start space under the products block(i), block(i)block(i+1), ...,
    block(i)...block(j) reaches all 2^7 vectors."""
    v0 = start_space()
    seen = set(v0)
    prod = _identity()
    for j in range(i, i + cap):
        prod = _mat_mul(prod, _block(j))
        for v in v0:
            seen.add(_mat_vec(prod, v))
        if len(seen) >= FULL_COUNT:
            return j
    raise ResourceError(f"coverage cap {cap} reached for residue {i} "
                        f"({len(seen)}/{FULL_COUNT} vectors)")


def coverage_table(cap: int = 200) -> list[CoverageRow]:
    return [CoverageRow(i, coverage_index(i, cap), FULL_COUNT) for i in range(7)]


def consecutive_window(cap: int = 200) -> int:
    """Window length 2 + max coverage index over the seven residues."""
    return 2 + max(row.index for row in coverage_table(cap))


def listing_lines(cap: int = 200) -> list[str]:
    """Plain "i j" lines, one per residue."""
    return [f"{row.residue} {row.index}" for row in coverage_table(cap)]
