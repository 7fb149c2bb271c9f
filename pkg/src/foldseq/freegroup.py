"""Words in free groups of rank <= 7 and composable substitution endomorphisms.

Letters are signed integers: a=1 .. g=7, with negatives for inverses.  Text
form uses lowercase for generators and uppercase for inverses, so "aB" is
a * b^-1.  Words are kept freely reduced at all times; storage is a read-only
numpy int8 array so that images of iterated substitutions (tens of millions
of letters) stay cheap.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InputError, ResourceError

RANK = 7
GENERATOR_NAMES = "abcdefg"

#: Words longer than this abort with ResourceError unless a caller raises the cap.
DEFAULT_MAX_LETTERS = 10_000_000

_EMPTY = np.zeros(0, dtype=np.int8)
_EMPTY.setflags(write=False)

_CHAR_TO_LETTER = {c: i + 1 for i, c in enumerate(GENERATOR_NAMES)}
_CHAR_TO_LETTER.update({c.upper(): -(i + 1) for i, c in enumerate(GENERATOR_NAMES)})

LetterSource = Union[str, Sequence[int], np.ndarray, "Word"]


def _parse_letters(source: LetterSource) -> np.ndarray:
    if isinstance(source, Word):
        return source.arr
    if isinstance(source, str):
        try:
            return np.array([_CHAR_TO_LETTER[c] for c in source if not c.isspace()],
                            dtype=np.int8)
        except KeyError as exc:
            raise InputError(f"unknown letter symbol {exc.args[0]!r}") from None
    arr = np.asarray(source, dtype=np.int64)
    if arr.ndim != 1:
        raise InputError("letter sequence must be one-dimensional")
    if arr.size and (np.any(arr == 0) or np.any(np.abs(arr) > RANK)):
        raise InputError("letters must be nonzero signed integers with |letter| <= 7")
    return arr.astype(np.int8)


def _free_reduce(arr: np.ndarray) -> np.ndarray:
    """Freely reduce a letter array.  Fast no-op when nothing cancels."""
    if arr.size < 2 or not np.any(arr[1:] == -arr[:-1]):
        return arr
    if arr.size <= 200_000:
        out: list[int] = []
        push = out.append
        pop = out.pop
        for x in arr.tolist():
            if out and out[-1] == -x:
                pop()
            else:
                push(x)
        return np.array(out, dtype=np.int8) if out else _EMPTY
    # Large arrays: strip disjoint cancelling pairs per pass.  Confluence of
    # free reduction makes the greedy choice safe.
    work = arr
    while True:
        cancel = np.flatnonzero(work[1:] == -work[:-1])
        if cancel.size == 0:
            return work
        chosen = []
        last = -2
        for i in cancel.tolist():
            if i > last + 1:
                chosen.append(i)
                last = i
        ch = np.array(chosen, dtype=np.int64)
        keep = np.ones(work.size, dtype=bool)
        keep[ch] = False
        keep[ch + 1] = False
        work = work[keep]
        if work.size < 2:
            return work if work.size else _EMPTY


def _concat_reduced(parts: list[np.ndarray]) -> np.ndarray:
    """Concatenate already-reduced arrays, cancelling only across junctions.

    Free reduction of a product of reduced words happens at the seams, so no
    full-array scan is needed.
    """
    segs: list[list] = []  # [array, start, end) triples forming the reduced word
    for p in parts:
        i, j = 0, p.size
        while segs and i < j:
            top = segs[-1]
            tarr, ti, tj = top
            while ti < tj and i < j and tarr[tj - 1] == -p[i]:
                tj -= 1
                i += 1
            if ti == tj:
                segs.pop()
            else:
                top[2] = tj
                break
        if i < j:
            segs.append([p, i, j])
    if not segs:
        return _EMPTY
    if len(segs) == 1:
        arr, i, j = segs[0]
        return arr if (i == 0 and j == arr.size) else arr[i:j].copy()
    return np.concatenate([arr[i:j] for arr, i, j in segs])


class Word:
    """A freely reduced word.  Immutable; construction reduces its input."""

    __slots__ = ("_arr",)

    def __init__(self, letters: LetterSource = (), *, max_letters: int | None = None):
        arr = _free_reduce(_parse_letters(letters))
        cap = DEFAULT_MAX_LETTERS if max_letters is None else max_letters
        if arr.size > cap:
            raise ResourceError(f"word of {arr.size} letters exceeds cap {cap}")
        arr.setflags(write=False)
        self._arr = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Word":
        """Trusted constructor for an already-reduced read-only array."""
        w = object.__new__(cls)
        w._arr = arr
        return w

    @property
    def arr(self) -> np.ndarray:
        return self._arr

    def letters(self) -> tuple[int, ...]:
        return tuple(self._arr.tolist())

    def inverse(self) -> "Word":
        inv = (-self._arr[::-1]).copy()
        inv.setflags(write=False)
        return Word._wrap(inv)

    def __mul__(self, other: "Word") -> "Word":
        if not isinstance(other, Word):
            return NotImplemented
        out = _concat_reduced([self._arr, other._arr])
        out.setflags(write=False)
        return Word._wrap(out)

    def __len__(self) -> int:
        return int(self._arr.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Word):
            return NotImplemented
        return self._arr.size == other._arr.size and bool(np.all(self._arr == other._arr))

    def __hash__(self) -> int:
        return hash(self._arr.tobytes())

    def __str__(self) -> str:
        return "".join(
            GENERATOR_NAMES[x - 1] if x > 0 else GENERATOR_NAMES[-x - 1].upper()
            for x in self._arr.tolist()
        )

    def __repr__(self) -> str:
        s = str(self)
        return f"Word({s[:40] + '...' if len(s) > 43 else s!r})"


class CyclicWord(Word):
    """A cyclically reduced word, read as a conjugacy class representative."""

    def __init__(self, letters: LetterSource = (), *, max_letters: int | None = None):
        super().__init__(letters, max_letters=max_letters)
        arr = self._arr
        i, j = 0, arr.size
        while j - i >= 2 and arr[i] == -arr[j - 1]:
            i += 1
            j -= 1
        if i:
            trimmed = arr[i:j].copy()
            trimmed.setflags(write=False)
            self._arr = trimmed


def reduce(letters: LetterSource, *, max_letters: int | None = None) -> Word:
    """Freely reduce a raw letter sequence."""
    return Word(letters, max_letters=max_letters)


def cyclic_reduce(w: LetterSource) -> CyclicWord:
    """Cyclically reduce (empty input gives the empty cyclic word)."""
    return CyclicWord(w)


def letter_counts(w: Word, rank: int = RANK) -> np.ndarray:
    """Unsigned occurrence counts per generator (letter and inverse both count)."""
    arr = w.arr
    out = np.zeros(rank, dtype=np.int64)
    if arr.size > 4_000_000:
        # count_nonzero over the present code range beats bincount's internal
        # int cast at this size
        lo, hi = int(arr.min()), int(arr.max())
        for code in range(lo, hi + 1):
            if code:
                out[abs(code) - 1] += np.count_nonzero(arr == code)
    elif arr.size:
        counts = np.bincount(np.abs(arr), minlength=rank + 1)[1:rank + 1]
        out[:] = counts
    return out


def abelianize_mod2(w: Word, rank: int = RANK) -> np.ndarray:
    """Signed exponent sums reduced mod 2 (equals unsigned counts mod 2)."""
    return (letter_counts(w, rank) % 2).astype(np.int64)


class Endomorphism:
    """A substitution map generator -> Word, applied with free reduction."""

    __slots__ = ("rank", "images", "_arrays", "_lens")

    def __init__(self, images: Iterable[LetterSource], rank: int | None = None,
                 *, max_letters: int | None = None):
        imgs = tuple(w if isinstance(w, Word) else Word(w, max_letters=max_letters)
                     for w in images)
        self.rank = len(imgs) if rank is None else rank
        if len(imgs) != self.rank:
            raise InputError(f"need {self.rank} images, got {len(imgs)}")
        if self.rank < RANK:
            # Word already guarantees letters within 1..RANK; only narrower
            # ranks need a range check.
            for w in imgs:
                if w.arr.size and np.abs(w.arr).max() > self.rank:
                    raise InputError("image uses a letter outside the declared rank")
        self.images = imgs
        self._arrays: list[np.ndarray | None] = [None] * (2 * self.rank + 1)
        self._lens: np.ndarray | None = None

    @classmethod
    def identity(cls, rank: int) -> "Endomorphism":
        return cls([Word([i + 1]) for i in range(rank)], rank)

    def is_identity(self) -> bool:
        return all(len(w) == 1 and w.arr[0] == i + 1 for i, w in enumerate(self.images))

    def image_of(self, letter: int) -> Word:
        if letter > 0:
            return self.images[letter - 1]
        return self.images[-letter - 1].inverse()

    def _image_array(self, code: int) -> np.ndarray:
        """Image letter array for a shifted code (letter + rank), built lazily."""
        cached = self._arrays[code]
        if cached is None:
            letter = code - self.rank
            cached = (self.images[letter - 1].arr if letter > 0
                      else self.images[-letter - 1].inverse().arr)
            self._arrays[code] = cached
        return cached

    def _len_table(self) -> np.ndarray:
        if self._lens is None:
            lens = np.zeros(2 * self.rank + 1, dtype=np.int64)
            for i, w in enumerate(self.images):
                lens[self.rank + (i + 1)] = w.arr.size
                lens[self.rank - (i + 1)] = w.arr.size
            self._lens = lens
        return self._lens

    def apply(self, w: Word, *, max_letters: int | None = None) -> Word:
        """Substitute and freely reduce."""
        arr = w.arr
        if arr.size == 0:
            return Word._wrap(_EMPTY)
        cap = DEFAULT_MAX_LETTERS if max_letters is None else max_letters
        if arr.size <= 64:
            parts = [self._image_array(int(x) + self.rank) for x in arr]
            total = sum(p.size for p in parts)
            if total > cap:
                raise ResourceError(f"image of {total} letters exceeds cap {cap}")
            # Images are reduced words, so only the junctions can cancel.
            out = _concat_reduced(parts)
            out.setflags(write=False)
            return Word._wrap(out)
        else:
            lens = self._len_table()
            if lens.max() == 1:
                # Letter-to-letter substitution: one vectorized table lookup
                # on the two's-complement byte view.
                lut = np.zeros(256, dtype=np.int8)
                firsts = []
                for i, wi in enumerate(self.images):
                    if wi.arr.size:
                        first = int(wi.arr[0])
                        firsts.append(abs(first))
                        lut[i + 1] = first
                        lut[256 - (i + 1)] = -first
                out = lut[arr.view(np.uint8)]
                if len(firsts) == self.rank and len(set(firsts)) == self.rank:
                    # Signed-permutation substitution preserves reducedness.
                    out.setflags(write=False)
                    return Word._wrap(out)
            else:
                shifted = arr.astype(np.int64) + self.rank
                per = lens[shifted]
                total = int(per.sum())
                if total > cap:
                    raise ResourceError(f"image of {total} letters exceeds cap {cap}")
                offsets = np.zeros(arr.size, dtype=np.int64)
                np.cumsum(per[:-1], out=offsets[1:])
                out = np.empty(total, dtype=np.int8)
                for code in np.unique(shifted):
                    img = self._image_array(int(code))
                    if img.size == 0:
                        continue
                    starts = offsets[shifted == code]
                    idx = (starts[:, None] + np.arange(img.size, dtype=np.int64)).ravel()
                    out[idx] = np.tile(img, starts.size)
        if out.size > cap:
            raise ResourceError(f"image of {out.size} letters exceeds cap {cap}")
        reduced = _free_reduce(out)
        reduced.setflags(write=False)
        return Word._wrap(reduced)

    __call__ = apply

    def compose(self, inner: "Endomorphism", *, max_letters: int | None = None) -> "Endomorphism":
        """self after inner: (self.compose(inner))(x) == self(inner(x))."""
        if inner.rank != self.rank:
            raise InputError("rank mismatch in composition")
        return Endomorphism(
            [self.apply(w, max_letters=max_letters) for w in inner.images], self.rank
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Endomorphism):
            return NotImplemented
        return self.rank == other.rank and self.images == other.images

    def __repr__(self) -> str:
        body = ", ".join(f"{GENERATOR_NAMES[i]}->{w}" for i, w in enumerate(self.images))
        return f"Endomorphism({body})"

    def to_text(self) -> str:
        return "\n".join(f"{GENERATOR_NAMES[i]} -> {self.images[i]}"
                         for i in range(self.rank))

    @classmethod
    def from_text(cls, text: str) -> "Endomorphism":
        images = {}
        for line in text.strip().splitlines():
            lhs, _, rhs = line.partition("->")
            gen = lhs.strip()
            if len(gen) != 1 or gen not in _CHAR_TO_LETTER or _CHAR_TO_LETTER[gen] < 0:
                raise InputError(f"bad endomorphism line: {line!r}")
            images[_CHAR_TO_LETTER[gen]] = Word(rhs.strip())
        rank = max(images)
        if sorted(images) != list(range(1, rank + 1)):
            raise InputError("endomorphism text must cover generators a..")
        return cls([images[i] for i in range(1, rank + 1)], rank)


def apply(e: Endomorphism, w: Word, *, max_letters: int | None = None) -> Word:
    return e.apply(w, max_letters=max_letters)


def compose(outer: Endomorphism, inner: Endomorphism,
            *, max_letters: int | None = None) -> Endomorphism:
    return outer.compose(inner, max_letters=max_letters)


# ---------------------------------------------------------------------------
# The concrete substitution family.
#
# The base map on three letters sends a->b, b->c, c->ca; its stretch factor is
# the supergolden ratio (root of x^3 - x^2 - 1), hence the name.  Its inverse
# has the plastic number (root of x^3 - x - 1) as stretch factor.
# ---------------------------------------------------------------------------

def supergolden() -> Endomorphism:
    """Rank-3 substitution a->b, b->c, c->ca."""
    return Endomorphism(["b", "c", "ca"], 3)


def plastic() -> Endomorphism:
    """Inverse of supergolden(): a->Bc, b->a, c->b."""
    return Endomorphism(["Bc", "a", "b"], 3)


def supergolden7() -> Endomorphism:
    """supergolden() extended by the identity on d..g."""
    return Endomorphism(["b", "c", "ca", "d", "e", "f", "g"], RANK)


def plastic7() -> Endomorphism:
    """plastic() extended by the identity on d..g."""
    return Endomorphism(["Bc", "a", "b", "d", "e", "f", "g"], RANK)


def rotation() -> Endomorphism:
    """Rotation by four clicks: a->e, b->f, c->g, d->a, e->b, f->c, g->d."""
    return Endomorphism(["e", "f", "g", "a", "b", "c", "d"], RANK)


def rotation_inv() -> Endomorphism:
    return Endomorphism(["d", "e", "f", "g", "a", "b", "c"], RANK)


def endo_power(base: Endomorphism, r: int, *, max_letters: int | None = None) -> Endomorphism:
    """base^r by iterated composition with intermediate reduction."""
    if r < 0:
        raise InputError("power must be nonnegative")
    acc = Endomorphism.identity(base.rank)
    for _ in range(r):
        # acc∘base: base images are short, so each step touches only the
        # already-built image arrays once.
        acc = acc.compose(base, max_letters=max_letters)
    return acc


def build_family(r: int, *, max_letters: int | None = None) -> tuple[Endomorphism, Endomorphism]:
    """The rotated r-th power map and its inverse.

    Forward map: rotation ∘ supergolden7^r.  Inverse: plastic7^r ∘ rotation_inv,
    which undoes it exactly on every generator.
    """
    if r <= 0:
        raise InputError("family parameter r must be >= 1")
    fwd = rotation().compose(endo_power(supergolden7(), r, max_letters=max_letters),
                             max_letters=max_letters)
    inv = endo_power(plastic7(), r, max_letters=max_letters).compose(
        rotation_inv(), max_letters=max_letters)
    return fwd, inv


def apply_family_forward(r: int, w: Word, *, max_letters: int | None = None) -> Word:
    """Apply the forward family map for parameter r without materializing
    power images for letters absent from w.

    Chains like map_{r1}(map_{r2}(...)) applied to short words only ever hit
    the big power images when a/b/c letters are actually present.
    """
    if r <= 0:
        raise InputError("family parameter r must be >= 1")
    arr = w.arr
    present = set(np.unique(np.abs(arr)).tolist()) if arr.size else set()
    if present & {1, 2, 3}:
        th = endo_power(supergolden(), r, max_letters=max_letters)
        abc = list(th.images)
    else:
        abc = [Word("a"), Word("b"), Word("c")]  # never read
    power = Endomorphism(abc + [Word("d"), Word("e"), Word("f"), Word("g")], RANK)
    return rotation().apply(power.apply(w, max_letters=max_letters),
                            max_letters=max_letters)


def apply_family_inverse(r: int, w: Word, *, max_letters: int | None = None) -> Word:
    """Apply the inverse family map for parameter r, lazily as above."""
    if r <= 0:
        raise InputError("family parameter r must be >= 1")
    v = rotation_inv().apply(w, max_letters=max_letters)
    arr = v.arr
    present = set(np.unique(np.abs(arr)).tolist()) if arr.size else set()
    if present & {1, 2, 3}:
        pl = endo_power(plastic(), r, max_letters=max_letters)
        abc = list(pl.images)
    else:
        abc = [Word("a"), Word("b"), Word("c")]  # never read
    power = Endomorphism(abc + [Word("d"), Word("e"), Word("f"), Word("g")], RANK)
    return power.apply(v, max_letters=max_letters)


def family_forward_batch(rs: Sequence[int], *, max_letters: int | None = None) -> dict[int, Endomorphism]:
    """Forward family maps for several r values, sharing one ascending power chain."""
    want = sorted(set(rs))
    if want and want[0] <= 0:
        raise InputError("family parameters must be >= 1")
    out: dict[int, Endomorphism] = {}
    base = supergolden7()
    rho = rotation()
    acc = Endomorphism.identity(RANK)
    k = 0
    for r in want:
        while k < r:
            acc = acc.compose(base, max_letters=max_letters)
            k += 1
        out[r] = rho.compose(acc, max_letters=max_letters)
    return out


def family_inverse_batch(rs: Sequence[int], *, max_letters: int | None = None) -> dict[int, Endomorphism]:
    """Inverse family maps for several r values, sharing one ascending power chain."""
    want = sorted(set(rs))
    if want and want[0] <= 0:
        raise InputError("family parameters must be >= 1")
    out: dict[int, Endomorphism] = {}
    base = plastic7()
    rho_inv = rotation_inv()
    acc = Endomorphism.identity(RANK)
    k = 0
    for r in want:
        while k < r:
            acc = acc.compose(base, max_letters=max_letters)
            k += 1
        out[r] = acc.compose(rho_inv, max_letters=max_letters)
    return out
