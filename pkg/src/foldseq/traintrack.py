"""Train track structures on roses: gates, legality, illegal-turn dynamics,
and a bounded search for periodic indivisible Nielsen paths (INPs).

Directions at the single vertex are signed letters: +x is the initial
direction of edge x, -x the terminal one.  A turn is an unordered pair of
distinct directions; it is illegal when both lie in the same gate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import freegroup, specmat
from .errors import InputError, LogicError
from .freegroup import Endomorphism, Word

Direction = int


def _directions(rank: int) -> list[Direction]:
    return [d for x in range(1, rank + 1) for d in (x, -x)]


@dataclass(frozen=True)
class DirectionMap:
    """Image of each direction under the substitution (first edge of the image)."""

    rank: int
    image: dict[Direction, Direction]

    def __call__(self, d: Direction) -> Direction:
        return self.image[d]


@dataclass(frozen=True)
class TrainTrackStructure:
    """Partition of the 2*rank directions into gates."""

    rank: int
    gates: tuple[frozenset, ...]
    _gate_of: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        seen: set = set()
        for g in self.gates:
            if not g:
                raise InputError("empty gate")
            for d in g:
                if d in seen:
                    raise InputError("gates are not disjoint")
                seen.add(d)
                self._gate_of[d] = g
        if seen != set(_directions(self.rank)):
            raise InputError("gates must cover all directions")

    def gate_of(self, d: Direction) -> frozenset:
        return self._gate_of[d]

    def is_legal_turn(self, d1: Direction, d2: Direction) -> bool:
        if d1 == d2:
            raise InputError("a turn needs two distinct directions")
        return self._gate_of[d1] is not self._gate_of[d2]

    def gate_names(self) -> list[str]:
        def dname(d):
            c = freegroup.GENERATOR_NAMES[abs(d) - 1]
            return c if d > 0 else c.upper()
        return ["{" + ",".join(sorted(dname(d) for d in g)) + "}" for g in self.gates]


def direction_map(e: Endomorphism) -> DirectionMap:
    """d -> first edge of the image of d; the image of -x is the inverse of
    the last letter of the image of x."""
    img: dict[Direction, Direction] = {}
    for x in range(1, e.rank + 1):
        w = e.images[x - 1].arr
        if w.size == 0:
            raise InputError(f"empty image for generator {x}; direction map undefined")
        img[x] = int(w[0])
        img[-x] = -int(w[-1])
    return DirectionMap(e.rank, img)


def gates_from_map(e: Endomorphism) -> TrainTrackStructure:
    """Partition directions by eventual coincidence under the iterated
    direction map, stopping when the partition stabilizes."""
    dm = direction_map(e)
    dirs = _directions(e.rank)
    current = {d: d for d in dirs}  # k-fold image
    prev_part = None
    for _ in range(2 * len(dirs) + 2):
        groups: dict = {}
        for d in dirs:
            groups.setdefault(current[d], []).append(d)
        part = frozenset(frozenset(v) for v in groups.values())
        if part == prev_part:
            break
        prev_part = part
        current = {d: dm(current[d]) for d in dirs}
    # merge across iterations: classes are the stable partition
    gates = sorted(prev_part, key=lambda g: sorted(abs(d) * 2 - (d > 0) for d in g))
    return TrainTrackStructure(e.rank, tuple(gates))


def count_illegal_turns(w: Word, tts: TrainTrackStructure) -> int:
    """Turns crossed by w that sit inside one gate; cyclic words wrap around."""
    arr = w.arr
    n = arr.size
    if n < 2 and not isinstance(w, freegroup.CyclicWord):
        return 0
    pairs = []
    for i in range(n - 1):
        pairs.append((-int(arr[i]), int(arr[i + 1])))
    if isinstance(w, freegroup.CyclicWord) and n >= 1:
        pairs.append((-int(arr[-1]), int(arr[0])))
    bad = 0
    for d1, d2 in pairs:
        if d1 == d2:
            continue  # degenerate (unreduced wrap of a cyclic word of length 1)
        if not tts.is_legal_turn(d1, d2):
            bad += 1
    return bad


def is_legal(w: Word, tts: TrainTrackStructure) -> bool:
    return count_illegal_turns(w, tts) == 0


@dataclass
class TrainTrackCertificate:
    ok: bool
    gates: TrainTrackStructure
    violations: list[str]

    def to_json_dict(self) -> dict:
        return {"ok": self.ok, "gates": self.gates.gate_names(),
                "violations": list(self.violations)}


def is_train_track(e: Endomorphism) -> TrainTrackCertificate:
    """Certify the train track property for the induced gate structure.

    Checks: at least two gates, every generator image is a legal path, and
    the direction map sends legal turns to legal turns.
    """
    for x in range(1, e.rank + 1):
        if len(e.images[x - 1]) == 0:
            raise InputError("empty generator image")
    tts = gates_from_map(e)
    dm = direction_map(e)
    violations: list[str] = []
    if len(tts.gates) < 2:
        violations.append("fewer than two gates at the vertex")
    for x in range(1, e.rank + 1):
        bad = count_illegal_turns(e.images[x - 1], tts)
        if bad:
            violations.append(
                f"image of {freegroup.GENERATOR_NAMES[x-1]} crosses {bad} illegal turn(s)")
    dirs = _directions(e.rank)
    for i, d1 in enumerate(dirs):
        for d2 in dirs[i + 1:]:
            if tts.is_legal_turn(d1, d2):
                i1, i2 = dm(d1), dm(d2)
                if i1 != i2 and not tts.is_legal_turn(i1, i2):
                    violations.append(f"legal turn ({d1},{d2}) maps into one gate")
    return TrainTrackCertificate(not violations, tts, violations)


def map_and_tighten(e: Endomorphism, w: Word,
                    tts: TrainTrackStructure | None = None) -> tuple[Word, int, int]:
    """Apply and reduce, returning (image, illegal turns before, after)."""
    structure = gates_from_map(e) if tts is None else tts
    before = count_illegal_turns(w, structure)
    out = e.apply(w)
    if isinstance(w, freegroup.CyclicWord):
        out = freegroup.cyclic_reduce(out)
    after = count_illegal_turns(out, structure)
    return out, before, after


# The folding-side gate structure is the same partition for every admissible
# parameter, so experiments share one instance.
_FOLD_GATES: TrainTrackStructure | None = None


def fold_gates() -> TrainTrackStructure:
    global _FOLD_GATES
    if _FOLD_GATES is None:
        _FOLD_GATES = gates_from_map(freegroup.build_family(3)[1])
    return _FOLD_GATES


_EMP_LOSS_BOUND: int | None = None


def triple_fold_reduces(seq, j: int, w: Word) -> bool:
    """True iff three consecutive inverse-family maps strictly drop the
    illegal-turn count of w.

    seq is indexed 1-based; the maps for seq[j+1], seq[j+2], seq[j+3] are
    applied in that order.  w must have at least one illegal turn; seq must
    be strictly increasing with every value divisible by 3 and its first
    value above the empirical loss bound.
    """
    values = seq.values if hasattr(seq, "values") else tuple(seq)
    if j < 0 or j + 3 > len(values):
        raise InputError("need three maps past index j")
    if any(values[k + 1] <= values[k] for k in range(len(values) - 1)):
        raise InputError("sequence must be strictly increasing")
    if any(v % 3 for v in values):
        raise InputError("sequence values must be divisible by 3")
    global _EMP_LOSS_BOUND
    if _EMP_LOSS_BOUND is None:
        _EMP_LOSS_BOUND = empirical_loss_bound(freegroup.plastic(), max_len=6)
    if values[0] <= _EMP_LOSS_BOUND:
        raise InputError(f"first value must exceed the empirical loss bound "
                         f"{_EMP_LOSS_BOUND}")
    tts = fold_gates()
    before = count_illegal_turns(w, tts)
    if before < 1:
        raise InputError("word has no illegal turn")
    cur = w
    for k in (j, j + 1, j + 2):
        g = freegroup.build_family(values[k])[1]
        cur = g.apply(cur)
        if isinstance(w, freegroup.CyclicWord):
            cur = freegroup.cyclic_reduce(cur)
    return count_illegal_turns(cur, tts) < before


# ---------------------------------------------------------------------------
# Periodic INP search
#
# A vertex-to-vertex path fixed by a power g with exactly one illegal turn
# decomposes as alpha * beta^{-1} where alpha, beta are prefixes of the
# expanding rays of two g-fixed direction germs and g-expansion appends the
# same tail to both.  Germs live either at the vertex (fixed directions) or
# at interior fixed points of g on an edge; interior fixed points are located
# with the Perron-Frobenius metric.
# ---------------------------------------------------------------------------

@dataclass
class Germ:
    """A g-fixed point with a g-fixed outgoing direction germ."""

    key: tuple
    first_letter: int          # signed edge the germ points along
    partial: bool              # True when anchored at an interior point
    param: float               # PF-metric offset into the edge (0 for vertex)
    seg0: np.ndarray           # ray continuation after the head


@dataclass
class InpRecord:
    path: str
    period: int
    illegal_turn: str
    endpoints: str

    def to_json_dict(self) -> dict:
        return {"path": self.path, "period": self.period,
                "illegal_turn": self.illegal_turn, "endpoints": self.endpoints}


def _turn_name(d1: int, d2: int) -> str:
    def nm(d):
        c = freegroup.GENERATOR_NAMES[abs(d) - 1]
        return c if d > 0 else c.upper()
    return "{" + ",".join(sorted((nm(d1), nm(d2)))) + "}"


def _ray(germ: Germ, g: Endomorphism, min_len: int) -> np.ndarray:
    """Full letters of the germ's expanding ray (after the head), at least
    min_len of them when the ray is infinite.

    The head h satisfies g(h) = h . seg0, so the ray after the head is
    seg0 . g(seg0) . g(g(seg0)) ...
    """
    chunks = [germ.seg0]
    total = germ.seg0.size
    cur = germ.seg0
    while 0 < cur.size and total < min_len:
        cur = g.apply(Word._wrap(np.ascontiguousarray(cur, dtype=np.int8))).arr
        chunks.append(cur)
        total += cur.size
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def _fixed_germs(e: Endomorphism, p: int, g: Endomorphism) -> list[Germ]:
    """All g-fixed direction germs, g = e^p, vertex and interior."""
    germs: list[Germ] = []
    dm = direction_map(g)
    for d in _directions(e.rank):
        if dm(d) == d:
            img = g.image_of(d).arr
            germs.append(Germ(("v", d), d, False, 0.0, img[1:].copy()))
    # interior fixed points need the expansion metric
    tm = specmat.transition_matrix(e)
    if not specmat.is_primitive(tm):
        return germs
    pf = specmat.pf_cached(tm)
    lengths = pf.left_vector  # row functional: expansion-equivariant edge lengths
    stretch = pf.eigenvalue ** p
    tol = 1e-9
    for x in range(1, e.rank + 1):
        w = g.images[x - 1].arr
        lx = lengths[x - 1]
        pos = 0.0
        for j, letter in enumerate(w.tolist()):
            if letter == x:
                t = pos / (stretch - 1.0)
                if tol < t < lx - tol:
                    germs.append(Germ(("i", x, j, +1), x, True, t, w[j + 1:].copy()))
                    back = Word._wrap(w[:j]).inverse().arr
                    germs.append(Germ(("i", x, j, -1), -x, True, lx - t, back))
            pos += lengths[abs(letter) - 1]
    return germs


def _expanded_length_table(g: Endomorphism) -> np.ndarray:
    lens = np.zeros(2 * g.rank + 1, dtype=np.int64)
    for i, w in enumerate(g.images):
        lens[g.rank + i + 1] = len(w)
        lens[g.rank - i - 1] = len(w)
    return lens


def find_periodic_inps(e: Endomorphism, max_period: int = 10,
                       max_len: int = 40) -> list[InpRecord]:
    """Bounded search for periodic INPs of a train track map on a rose.

    Candidates are paths alpha * beta^{-1} with one illegal turn and
    combinatorial length <= max_len whose reduced image under some power
    <= max_period is the path itself.  Endpoints at the vertex are checked
    by exact word equality; interior endpoints (located via the expansion
    metric) are certified by the matching-tail criterion of the two rays.
    """
    cert = is_train_track(e)
    if not cert.ok:
        raise InputError("periodic INP search needs a train track map: "
                         + "; ".join(cert.violations))
    tts = cert.gates
    found: dict[str, InpRecord] = {}
    g = Endomorphism.identity(e.rank)
    for p in range(1, max_period + 1):
        g = g.compose(e)
        lens = _expanded_length_table(g)
        if lens[:g.rank].min() == 0 or lens[g.rank + 1:].min() == 0:
            continue
        germs = _fixed_germs(e, p, g)
        prepped = [_prep_germ(gm, g, lens, max_len) for gm in germs]
        for a_idx in range(len(prepped)):
            for b_idx in range(a_idx, len(prepped)):
                rec = _match_pair(prepped[a_idx], prepped[b_idx], g, p, tts, max_len)
                for r in rec:
                    found.setdefault(r.path, r)
    return sorted(found.values(), key=lambda r: (r.period, r.path))


@dataclass
class _PreppedGerm:
    germ: Germ
    ray: np.ndarray
    cum: np.ndarray              # cum[k] = |tail of g(head+ray[:k])|  + k
    by_tail_len: dict            # tail length -> list of valid k


def _prep_germ(gm: Germ, g: Endomorphism, lens: np.ndarray,
               max_len: int) -> _PreppedGerm:
    need = gm.seg0.size + (max_len + 1) * int(lens.max()) + 2
    ray = _ray(gm, g, need)
    kmax = min(ray.size, max_len - 1)
    cum = np.zeros(kmax + 1, dtype=np.int64)
    cum[0] = gm.seg0.size
    if kmax:
        cum[1:] = gm.seg0.size + np.cumsum(lens[ray[:kmax].astype(np.int64) + g.rank])
    by_tail: dict[int, list[int]] = {}
    for k in range(kmax + 1):
        if cum[k] <= ray.size:
            by_tail.setdefault(int(cum[k]) - k, []).append(k)
    return _PreppedGerm(gm, ray, cum, by_tail)


def _full_prefix(pg: _PreppedGerm, k: int) -> np.ndarray:
    # full letters of head + ray[:k]; a vertex head is the edge itself
    if pg.germ.partial:
        return pg.ray[:k]
    return np.concatenate([[pg.germ.first_letter], pg.ray[:k]]).astype(np.int8)


def _match_pair(pg1: _PreppedGerm, pg2: _PreppedGerm, g: Endomorphism, p: int,
                tts: TrainTrackStructure, max_len: int) -> list[InpRecord]:
    g1, g2 = pg1.germ, pg2.germ
    out: list[InpRecord] = []
    same = g1.key == g2.key
    for k1 in range(len(pg1.cum)):
        s_hi = int(pg1.cum[k1])
        if s_hi > pg1.ray.size:
            break
        last1 = int(pg1.ray[k1 - 1]) if k1 >= 1 else g1.first_letter
        tail_len = s_hi - k1
        for k2 in pg2.by_tail_len.get(tail_len, ()):
            if same and k2 <= k1:
                continue
            if (k1 + 1) + (k2 + 1) > max_len:
                continue
            last2 = int(pg2.ray[k2 - 1]) if k2 >= 1 else g2.first_letter
            d1, d2 = -last1, -last2
            if d1 == d2 or tts.is_legal_turn(d1, d2):
                continue
            t_hi = int(pg2.cum[k2])
            if not np.array_equal(pg1.ray[k1:s_hi], pg2.ray[k2:t_hi]):
                continue
            # expansion tails agree: alpha * beta^{-1} is fixed by g
            alpha = _full_prefix(pg1, k1)
            beta = _full_prefix(pg2, k2)
            core = Word(np.concatenate([alpha, -beta[::-1]]).astype(np.int8))
            if not g1.partial and not g2.partial:
                if g.apply(core) != core:
                    continue
            endpoints = []
            for gm in (g1, g2):
                if gm.partial:
                    edge = freegroup.GENERATOR_NAMES[abs(gm.first_letter) - 1]
                    endpoints.append(f"interior:{edge}@{gm.param:.6f}")
                else:
                    endpoints.append("vertex")
            path_str = ("~" if g1.partial else "") + str(core) + ("~" if g2.partial else "")
            out.append(InpRecord(path_str, p, _turn_name(d1, d2),
                                 "|".join(endpoints)))
    return out


def inps_to_json(records: Iterable[InpRecord]) -> str:
    return json.dumps([r.to_json_dict() for r in records], indent=2)


def _legal_words_by_length(tts: TrainTrackStructure, rank: int,
                           max_length: int) -> list[list[tuple[int, ...]]]:
    """by_length[L] = all legal reduced words of length L (L from 0)."""
    dirs = _directions(rank)
    by_length: list[list[tuple[int, ...]]] = [[()]]
    for _ in range(max_length):
        nxt = []
        for wrd in by_length[-1]:
            if not wrd:
                nxt.extend((d,) for d in dirs)
                continue
            last = wrd[-1]
            for d in dirs:
                if d != -last and tts.is_legal_turn(-last, d):
                    nxt.append(wrd + (d,))
        by_length.append(nxt)
    return by_length


def empirical_loss_bound(e: Endomorphism, max_len: int = 8, max_iter: int = 200,
                         exhaustive_len: int = 6, samples_per_length: int = 400,
                         seed: int = 20_240_901) -> int:
    """Largest number of iterations a sampled one-illegal-turn path needs
    before losing its illegal turn (an empirical lower bound for the uniform
    loss constant).

    All paths up to exhaustive_len letters are tried; longer splits up to
    max_len are sampled deterministically.  Requires a train track map
    without periodic INPs; finding the turn surviving max_iter iterations
    contradicts that and raises LogicError.
    """
    cert = is_train_track(e)
    if not cert.ok:
        raise InputError("loss bound needs a train track map")
    if find_periodic_inps(e, max_period=6, max_len=40):
        raise LogicError("map has a periodic INP; no uniform loss bound exists")
    tts = cert.gates

    def settle(w: Word) -> int:
        steps = 0
        while count_illegal_turns(w, tts) > 0:
            w = e.apply(w)
            steps += 1
            if steps > max_iter:
                raise LogicError("illegal turn persisted past the iteration cap")
        return steps

    worst = 0
    cutoff = min(exhaustive_len, max_len)
    by_length = _legal_words_by_length(tts, e.rank, cutoff)
    for la in range(1, cutoff):
        for lb in range(1, cutoff - la + 1):
            for a in by_length[la]:
                for b in by_length[lb]:
                    if -a[-1] == b[0] or tts.is_legal_turn(-a[-1], b[0]):
                        continue
                    worst = max(worst, settle(Word(a + b)))
    if max_len > cutoff:
        rng = np.random.default_rng(seed)
        dirs = _directions(e.rank)
        for total in range(cutoff + 1, max_len + 1):
            for _ in range(samples_per_length):
                la = int(rng.integers(1, total))
                a = _random_legal(rng, tts, dirs, la - 1)
                # choose an illegal continuation of the arrival direction
                mates = [d for d in dirs
                         if d != -a[-1] and not tts.is_legal_turn(-a[-1], d)]
                if not mates:
                    continue
                first_b = mates[int(rng.integers(0, len(mates)))]
                b = _random_legal(rng, tts, dirs, total - la - 1, start=first_b)
                worst = max(worst, settle(Word(a + b)))
    return worst


def _random_legal(rng, tts: TrainTrackStructure, dirs: list[int], extra: int,
                  start: int | None = None) -> tuple[int, ...]:
    if start is None:
        word = [dirs[int(rng.integers(0, len(dirs)))]]
    else:
        word = [start]
    for _ in range(extra):
        last = word[-1]
        choices = [d for d in dirs if d != -last and tts.is_legal_turn(-last, d)]
        word.append(choices[int(rng.integers(0, len(choices)))])
    return tuple(word)
