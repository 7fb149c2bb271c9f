"""Projective simplex dynamics, length vectors, volume decay, and the
two-limit translation length experiment.

All projective data lives on l1-normalized nonnegative 7-vectors with the
l-infinity metric; all potentially huge scalars (products of stretch factors)
are carried as natural-log scale factors and never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import freegroup, specmat, traintrack
from .errors import InputError, NumericError, ResourceError
from .freegroup import CyclicWord

# ---------------------------------------------------------------------------
# Projective points and length vectors
# ---------------------------------------------------------------------------


def projective_point(v: np.ndarray) -> np.ndarray:
    """l1-normalized representative of a nonnegative ray."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InputError("projective points are vectors")
    if np.any(v < -1e-13 * max(1.0, float(np.abs(v).max()))):
        raise InputError("projective points live in the nonnegative orthant")
    total = float(v.sum())
    if total <= 0.0:
        raise InputError("zero vector has no projective class")
    return np.clip(v / total, 0.0, None)


def projective_distance(u: np.ndarray, v: np.ndarray) -> float:
    """l-infinity distance between l1-normalized representatives."""
    return float(np.abs(projective_point(u) - projective_point(v)).max())


@dataclass(frozen=True)
class LengthVector:
    """Positive edge lengths with a separate log scale: lengths = exp(log_scale) * values."""

    values: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if np.any(v <= 0):
            raise InputError("length vectors are strictly positive")
        v.setflags(write=False)

    @classmethod
    def ones(cls, n: int = 7) -> "LengthVector":
        return cls(np.ones(n))

    def normalized(self) -> "LengthVector":
        top = float(self.values.max())
        return LengthVector(self.values / top, self.log_scale + math.log(top))

    def log_volume(self) -> float:
        return self.log_scale + math.log(float(self.values.sum()))


# ---------------------------------------------------------------------------
# Vertex images and simplex endpoints
# ---------------------------------------------------------------------------


def _seq_values(seq) -> tuple[int, ...]:
    return seq.values if hasattr(seq, "values") else tuple(seq)


def block_scaled(r: int, side: str) -> specmat.ScaledMatrix:
    """unfold/fold block for parameter r divided by stretch^r, as a scaled matrix."""
    if side == "unfold":
        lam = specmat.pf_cached(specmat.SUPERGOLDEN).eigenvalue
        return specmat.unfold_block(r).to_scaled().scale_by_log(-r * math.log(lam))
    if side == "fold":
        lam = specmat.pf_cached(specmat.PLASTIC).eigenvalue
        return specmat.fold_block(r).to_scaled().scale_by_log(-r * math.log(lam))
    raise InputError(f"unknown side {side!r}")


def vertex_images(seq, i: int, j: int) -> list[np.ndarray]:
    """Projective images of the seven basis rays under the product of the
    unfold blocks for values i..j (1-based, inclusive)."""
    values = _seq_values(seq)
    if not 1 <= i < j <= len(values):
        raise InputError("need 1 <= i < j <= len(seq)")
    acc = block_scaled(values[i - 1], "unfold")
    for k in range(i + 1, j + 1):
        acc = acc @ block_scaled(values[k - 1], "unfold")
    return [projective_point(acc.mant[:, k]) for k in range(7)]


@dataclass
class SimplexEndpoints:
    p: np.ndarray
    q: np.ndarray
    distance: float
    tail_p: specmat.TailLimit
    tail_q: specmat.TailLimit


def simplex_endpoints(seq, i: int, tol: float = 1e-10,
                      coincidence_tol: float = 1e-6) -> SimplexEndpoints:
    """The two projective limit points at stage i.

    p is the ray of the first column of the tail limit at i; q is the image
    of the stage-(i+1) tail limit's first column under the stage-i block.
    """
    values = _seq_values(seq)
    yi = specmat.unfold_tail_limit(seq, i, tol=tol)
    yi1 = specmat.unfold_tail_limit(seq, i + 1, tol=tol)
    p = projective_point(yi.matrix[:, 0])
    m_i = block_scaled(values[i - 1], "unfold").to_dense()
    q = projective_point(m_i @ yi1.matrix[:, 0])
    dist = projective_distance(p, q)
    if dist <= coincidence_tol:
        raise NumericError(f"simplex endpoints coincide at stage {i} (distance {dist:.2e})")
    return SimplexEndpoints(p, q, dist, yi, yi1)


@dataclass
class CollapseRow:
    j: int
    max_distance: float
    per_vertex: list[float]


@dataclass
class CollapseReport:
    i: int
    eps: float
    rows: list[CollapseRow]
    achieved_j: int | None
    endpoints: SimplexEndpoints


def simplex_collapse_table(seq, i: int, j_max: int, eps: float,
                           tol: float = 1e-10) -> CollapseReport:
    """Distances of the seven vertex images to the nearer endpoint, per j."""
    ends = simplex_endpoints(seq, i, tol=tol)
    rows: list[CollapseRow] = []
    achieved: int | None = None
    for j in range(i + 1, j_max + 1):
        imgs = vertex_images(seq, i, j)
        dists = [min(projective_distance(v, ends.p), projective_distance(v, ends.q))
                 for v in imgs]
        worst = max(dists)
        rows.append(CollapseRow(j, worst, dists))
        if achieved is None and worst <= eps:
            achieved = j
    return CollapseReport(i, eps, rows, achieved, ends)


def limit_rays() -> tuple[np.ndarray, np.ndarray]:
    """The two asymptotic endpoint rays: the eigenvector supported on
    coordinates 2-4 and on coordinates 5-7."""
    v = specmat.pf_cached(specmat.SUPERGOLDEN).right_vector
    a = np.zeros(7)
    a[1:4] = v
    b = np.zeros(7)
    b[4:7] = v
    return projective_point(a), projective_point(b)


# ---------------------------------------------------------------------------
# Length vectors along the sequence, volumes, translation lengths
# ---------------------------------------------------------------------------


def length_vector(seq, ell0: LengthVector, i: int) -> LengthVector:
    """Pull the stage-0 lengths forward: transposed blocks applied in order."""
    values = _seq_values(seq)
    if not 0 <= i <= len(values):
        raise InputError("stage outside the sequence")
    vec = specmat.ScaledMatrix.from_dense(ell0.values.reshape(7, 1)).scale_by_log(ell0.log_scale)
    for k in range(1, i + 1):
        blk = specmat.unfold_block(values[k - 1]).to_scaled()
        vec = specmat.ScaledMatrix(blk.mant.T, blk.log_scale) @ vec
    out = vec.mant[:, 0]
    top = float(out.max())
    return LengthVector(out / top, vec.log_scale + math.log(top))


def translation_length(w: CyclicWord, ell: LengthVector) -> float:
    """Sum of edge lengths over the letters of a cyclically reduced word."""
    if not isinstance(w, CyclicWord):
        raise InputError("translation length needs a cyclically reduced word")
    counts = freegroup.letter_counts(w, 7).astype(np.float64)
    base = float(counts @ ell.values)
    if base == 0.0:
        return 0.0
    log_val = math.log(base) + ell.log_scale
    if log_val > 700.0:
        raise NumericError("translation length overflows; keep it in log scale")
    return math.exp(log_val)


@dataclass
class VolumeRow:
    i: int
    log_volume: float
    ratio_to_three_back: float | None
    certificate_min_row_sum: int | None


@dataclass
class VolumeReport:
    rows: list[VolumeRow]
    halving_ok: bool
    certificate_ok: bool


def volume_decay(seq, lam_terminal: LengthVector | None = None,
                 i_max: int | None = None) -> VolumeReport:
    """Volumes of the folding-side lengths pulled back from a terminal stage.

    Lengths at stage i come from stage i+1 through the transposed fold block,
    so the terminal stage fixes the whole family.  The integer certificate is
    the minimal row sum of each three-step fold-block product.
    """
    values = _seq_values(seq)
    n = len(values) if i_max is None else i_max
    if n > len(values):
        raise InputError("i_max exceeds the sequence length")
    lam = lam_terminal if lam_terminal is not None else LengthVector.ones()
    lengths: dict[int, LengthVector] = {n: lam}
    for i in range(n - 1, -1, -1):
        blk = specmat.fold_block(values[i]).to_scaled()  # stage i -> i+1 map
        vec = specmat.ScaledMatrix.from_dense(
            lengths[i + 1].values.reshape(7, 1)).scale_by_log(lengths[i + 1].log_scale)
        pulled = specmat.ScaledMatrix(blk.mant.T, blk.log_scale) @ vec
        out = pulled.mant[:, 0]
        top = float(out.max())
        lengths[i] = LengthVector(out / top, pulled.log_scale + math.log(top))
    rows: list[VolumeRow] = []
    halving_ok = True
    certificate_ok = True
    for i in range(0, n + 1):
        ratio = None
        cert = None
        if i >= 3:
            ratio = math.exp(lengths[i].log_volume() - lengths[i - 3].log_volume())
            triple = (specmat.fold_block(values[i - 1])
                      @ specmat.fold_block(values[i - 2])
                      @ specmat.fold_block(values[i - 3]))
            cert = triple.min_row_sum()
            if ratio > 0.5:
                halving_ok = False
            if cert < 2:
                certificate_ok = False
        rows.append(VolumeRow(i, lengths[i].log_volume(), ratio, cert))
    return VolumeReport(rows, halving_ok, certificate_ok)


# ---------------------------------------------------------------------------
# Short legal loops
# ---------------------------------------------------------------------------


def enumerate_short_legal_loops(max_len: int = 3) -> list[CyclicWord]:
    """All cyclic words of length <= max_len legal for the unfolding-side
    gates, up to rotation and inversion."""
    tts = traintrack.gates_from_map(freegroup.build_family(3)[0])
    dirs = [d for x in range(1, 8) for d in (x, -x)]
    seen: set[tuple[int, ...]] = set()
    out: list[CyclicWord] = []

    def canonical(letters: tuple[int, ...]) -> tuple[int, ...]:
        variants = []
        for word in (letters, tuple(-x for x in reversed(letters))):
            for s in range(len(word)):
                variants.append(word[s:] + word[:s])
        return min(variants)

    def is_cyclically_reduced(letters: tuple[int, ...]) -> bool:
        n = len(letters)
        for t in range(n):
            if letters[t] == -letters[(t + 1) % n] and n > 1:
                return False
        return True

    stack: list[tuple[int, ...]] = [(d,) for d in dirs]
    while stack:
        word = stack.pop()
        if is_cyclically_reduced(word):
            w = CyclicWord(word)
            if len(w) == len(word) and traintrack.count_illegal_turns(w, tts) == 0:
                key = canonical(word)
                if key not in seen:
                    seen.add(key)
                    out.append(w)
        if len(word) < max_len:
            for d in dirs:
                stack.append(word + (d,))
    out.sort(key=lambda w: (len(w), w.letters()))
    return out


# ---------------------------------------------------------------------------
# Translation lengths toward the two limit trees
# ---------------------------------------------------------------------------


@dataclass
class LegalityResult:
    index: int            # first stage where the class is legal on the fold side
    vector: np.ndarray    # letter counts at that stage
    word: CyclicWord


def legality_index(seq, x: CyclicWord, max_letters: int = 50_000_000) -> LegalityResult:
    """First stage (0-based) at which the conjugacy class is carried legally
    on the folding side, found by applying the inverse family maps.

    The cap is the three-step loss rule: each block of three inverse maps
    must kill at least one illegal turn, so the search aborts after
    3 * (initial count) + 9 stages.
    """
    values = _seq_values(seq)
    tts = traintrack.fold_gates()
    w = freegroup.cyclic_reduce(x)
    count = traintrack.count_illegal_turns(w, tts)
    budget = min(3 * count + 9, len(values))
    stage = 0
    while True:
        count = traintrack.count_illegal_turns(w, tts)
        if count == 0:
            return LegalityResult(stage, freegroup.letter_counts(w, 7).astype(np.float64), w)
        if stage >= budget or stage >= len(values):
            raise ResourceError(
                f"legality not reached within {stage} stages (count {count})")
        stage += 1
        w = freegroup.cyclic_reduce(
            freegroup.apply_family_inverse(values[stage - 1], w,
                                           max_letters=max_letters))


def _log_dot(row: np.ndarray, mat: specmat.ScaledMatrix, col: np.ndarray) -> float:
    """log of row @ M @ col for a scaled matrix; raises on nonpositive."""
    val = float(row @ mat.mant @ col)
    if val <= 0.0:
        raise NumericError("nonpositive pairing in log-domain evaluation")
    return math.log(val) + mat.log_scale


@dataclass
class StageValue:
    stage: int
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 700 else math.inf


@dataclass
class TreeLengthPair:
    even: StageValue
    odd: StageValue
    even_prev: StageValue | None
    odd_prev: StageValue | None
    legality: LegalityResult


def _stage_norm(seq, ell0: LengthVector, legality: LegalityResult,
                stage: int) -> StageValue:
    """Translation length at a stage, divided by the stage normalization.

    Computed as ell0^T (unfold blocks 1..stage) (fold blocks stage..i_x+1) v
    entirely in scaled arithmetic.
    """
    values = _seq_values(seq)
    i_x = legality.index
    if stage < i_x or stage > len(values):
        raise InputError("stage must lie between the legality index and the sequence end")
    acc = specmat.ScaledMatrix.from_dense(np.eye(7))
    for k in range(1, stage + 1):
        acc = acc @ block_scaled(values[k - 1], "unfold")
    for k in range(stage, i_x, -1):
        acc = acc @ block_scaled(values[k - 1], "fold")
    # the two normalized chains already divide by stretch^r per factor; the
    # stage constant adds the kappa parts and re-balances the stretch sums
    log_lb = math.log(specmat.pf_cached(specmat.SUPERGOLDEN).eigenvalue)
    log_lc = math.log(specmat.pf_cached(specmat.PLASTIC).eigenvalue)
    log_kb = math.log(specmat.kappa_unfold())
    log_kc = math.log(specmat.kappa_fold())
    sum_all = sum(values[k - 1] for k in range(1, stage + 1))
    sum_fold = sum(values[k - 1] for k in range(i_x + 1, stage + 1))
    if stage % 2 == 0:
        m = stage // 2
        sum_even = sum(values[k - 1] for k in range(2, stage + 1, 2))
        log_c = m * (log_kb + log_kc) + sum_even * (log_lb + log_lc)
    else:
        m = (stage - 1) // 2
        sum_odd = sum(values[k - 1] for k in range(1, stage + 1, 2))
        log_c = m * (log_kb + log_kc) + sum_odd * (log_lb + log_lc)
    log_raw = _log_dot(ell0.values, acc, legality.vector) + ell0.log_scale
    log_val = log_raw + sum_all * log_lb + sum_fold * log_lc - log_c
    return StageValue(stage, log_val)


def tree_length_pair(seq, ell0: LengthVector, x: CyclicWord,
                     m: int) -> TreeLengthPair:
    """Normalized translation lengths of x at the even stage 2m and odd
    stage 2m+1, with the previous stage pair for a convergence delta."""
    values = _seq_values(seq)
    legality = legality_index(seq, x)
    even_stage = 2 * m
    odd_stage = 2 * m + 1
    if odd_stage > len(values):
        raise InputError("sequence too short for the requested stage")
    if even_stage < legality.index or odd_stage < legality.index:
        raise InputError("stage predates legality of the class")
    even = _stage_norm(seq, ell0, legality, even_stage)
    odd = _stage_norm(seq, ell0, legality, odd_stage)
    even_prev = odd_prev = None
    if even_stage - 2 >= legality.index:
        even_prev = _stage_norm(seq, ell0, legality, even_stage - 2)
    if odd_stage - 2 >= legality.index and odd_stage - 2 >= 1:
        odd_prev = _stage_norm(seq, ell0, legality, odd_stage - 2)
    return TreeLengthPair(even, odd, even_prev, odd_prev, legality)


# ---------------------------------------------------------------------------
# The ratio experiment
# ---------------------------------------------------------------------------


@dataclass
class RatioRow:
    i: int
    log_alpha_ratio: float
    log_beta_ratio: float
    alpha_ratio: float
    beta_ratio: float


@dataclass
class RatioReport:
    rows: list[RatioRow]
    alpha_increasing: bool
    alpha_exceeds: bool
    beta_decreasing: bool
    beta_vanishes: bool
    limit_a: float
    limit_b: float
    z_kills_e5: float
    ell_e: np.ndarray
    ell_o: np.ndarray


def _ell_pair(seq, ell0: LengthVector, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """The even and odd boundary functionals induced by the stage-0 lengths."""
    y1 = specmat.unfold_tail_limit(seq, 1, tol=tol)
    y2 = specmat.unfold_tail_limit(seq, 2, tol=tol)
    values = _seq_values(seq)
    m1 = block_scaled(values[0], "unfold").to_dense()
    ell_e = y1.matrix.T @ ell0.values
    ell_o = (m1 @ y2.matrix).T @ ell0.values
    return ell_e, ell_o


def ratio_experiment(seq, ell0: LengthVector | None = None, i_max: int = 12,
                     tol: float = 1e-11, alpha_threshold: float = 1e3,
                     beta_threshold: float = 1e-3) -> RatioReport:
    """Odd-to-even translation length ratios of the two marker families.

    The alpha family (markers at even stages) must blow up; the beta family
    (odd stages) must vanish.  The class at stage n is carried by the fifth
    basis vector, so every ratio is a closed form in the fold-side tail
    limits and the stage constants, evaluated in the log domain.
    """
    ell = ell0 if ell0 is not None else LengthVector.ones()
    values = _seq_values(seq)
    log_lc = math.log(specmat.pf_cached(specmat.PLASTIC).eigenvalue)
    log_kc = math.log(specmat.kappa_fold())
    ell_e, ell_o = _ell_pair(seq, ell, tol)
    e5 = np.zeros(7)
    e5[4] = 1.0
    z = specmat.fold_idempotent()
    _, n_inf = specmat.asymptotic_blocks()
    limit_a = float(ell_e @ (z @ n_inf) @ e5)
    limit_b = float(ell_o @ (z @ n_inf) @ e5)
    z_kills = float(abs(ell_e @ z @ e5))
    rows: list[RatioRow] = []
    for i in range(1, i_max + 1):
        if 2 * i + 2 > len(values) - 4:
            raise InputError("sequence too short for the requested index range")
        z_odd = specmat.fold_tail_limit(seq, 2 * i + 1, tol=tol)
        z_even = specmat.fold_tail_limit(seq, 2 * i + 2, tol=tol)
        n_mid = block_scaled(values[2 * i], "fold").to_dense()
        den_e = float(ell_e @ z_odd.matrix @ e5)
        num_o = float(ell_o @ (z_even.matrix @ n_mid) @ e5)
        if den_e <= 0 or num_o <= 0:
            raise NumericError("ratio pairing lost positivity")
        # alpha marker at even stage 2i: even/odd stage constants differ by
        # the alternating sum of fold-side stretch exponents
        log_c_ratio_alpha = log_lc * (sum(values[k - 1] for k in range(2, 2 * i + 1, 2))
                                      - sum(values[k - 1] for k in range(1, 2 * i + 1, 2)))
        log_alpha = math.log(num_o) - math.log(den_e) + log_c_ratio_alpha
        den_o = float(ell_o @ z_odd.matrix @ e5)
        num_e = float(ell_e @ (z_even.matrix @ n_mid) @ e5)
        if den_o <= 0 or num_e <= 0:
            raise NumericError("ratio pairing lost positivity")
        log_c_ratio_beta = (log_kc - log_lc * values[0]
                            + log_lc * (sum(values[k - 1] for k in range(2, 2 * i + 2, 2))
                                        - sum(values[k - 1] for k in range(3, 2 * i + 2, 2))))
        log_beta = math.log(den_o) - math.log(num_e) + log_c_ratio_beta
        rows.append(RatioRow(i, log_alpha, log_beta,
                             math.exp(min(log_alpha, 700.0)),
                             math.exp(max(log_beta, -700.0))))
    alpha_increasing = all(rows[k].log_alpha_ratio < rows[k + 1].log_alpha_ratio
                           for k in range(len(rows) - 1))
    beta_decreasing = all(rows[k].log_beta_ratio > rows[k + 1].log_beta_ratio
                          for k in range(len(rows) - 1))
    return RatioReport(
        rows=rows,
        alpha_increasing=alpha_increasing,
        alpha_exceeds=any(r.log_alpha_ratio > math.log(alpha_threshold) for r in rows),
        beta_decreasing=beta_decreasing,
        beta_vanishes=any(r.log_beta_ratio < math.log(beta_threshold) for r in rows),
        limit_a=limit_a,
        limit_b=limit_b,
        z_kills_e5=z_kills,
        ell_e=ell_e,
        ell_o=ell_o,
    )
