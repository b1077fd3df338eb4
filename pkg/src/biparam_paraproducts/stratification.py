"""
Tile stratification for the weak-type argument.

Three drivers live here:

* ``weak_type_driver`` splits 1D tiles by their distance to the exceptional set U
  and reports sizes, energies and model-form sums per distance stratum.
* ``stratify_levels`` assigns bi-tiles to the level sets of MS f₁, SM f₂ and SS f₃
  and certifies that every tile keeps 97% of its area outside the previous levels.
* ``journe_maximal`` collects the maximal dyadic rectangles of an open set Ω that
  contain the given bi-tiles and measures how far each can be dilated inside Ω̃.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from biparam_paraproducts.errors import (
    ThresholdTooSmallError,
    ToleranceFailure,
    ValidationFailure,
)
from biparam_paraproducts.grid import GridFunction, dyadic_maximal_1d
from biparam_paraproducts.maximal_square import hybrid_square
from biparam_paraproducts.tiles import (
    FIRST_AXIS_BANDS,
    BiTileKey,
    CoefficientTable,
    TileKey,
    TileSystem,
    interval_cells,
    size_energy,
    tile_coefficients,
)

logger = logging.getLogger(__name__)

WEAK_TYPE_THRESHOLD = 8.0
WEAK_TYPE_TOTAL_BOUND = 1000.0
# Expected decay of size_{𝐏_d}(f₃) in the stratum index d
F3_DECAY_RATE = 4
SELECTION_FRACTION = 100
OVERLAP_NUMERATOR = 97
LEVEL_CAP = 64


# ---------------------------------------------------------------------------
# 1D weak-type driver
# ---------------------------------------------------------------------------


@dataclass
class StratumRow:
    d: int
    count: int
    sizes: Tuple[float, float, float]
    energies: Tuple[float, float, float]
    form_sum: float

    @property
    def f3_decay(self) -> float:
        """c_d with size_{𝐏_d}(f₃) = c_d·2^{-4d}."""
        return self.sizes[2] * 2.0 ** (F3_DECAY_RATE * self.d)


@dataclass
class WeakTypeReport:
    threshold: float
    u_measure: float
    e3_prime_measure: float
    c_total: float
    rows: List[StratumRow] = field(default_factory=list)
    u_mask: Optional[np.ndarray] = field(default=None, repr=False)
    tables: List[CoefficientTable] = field(default_factory=list, repr=False)

    @property
    def total(self) -> float:
        return sum(row.form_sum for row in self.rows)

    @property
    def f3_decay_constant(self) -> float:
        """Smallest c with size_{𝐏_d}(f₃) ≤ c·2^{-4d} for every stratum."""
        return max((row.f3_decay for row in self.rows), default=0.0)


def _distance_to_complement(
    mask: np.ndarray, start: int, stop: int, cell: float
) -> float:
    """Periodic distance from cells [start, stop) to the nearest cell off ``mask``."""
    if not np.all(mask[start:stop]):
        return 0.0
    outside = np.flatnonzero(~mask)
    if outside.size == 0:
        return math.inf
    n = mask.size
    before = (start - outside) % n
    after = (outside - (stop - 1)) % n
    return float(np.min(np.minimum(before, after)) - 1) * cell


def weak_type_driver(
    f1: GridFunction,
    f2: GridFunction,
    e3: np.ndarray,
    threshold: float = WEAK_TYPE_THRESHOLD,
    c_total: float = WEAK_TYPE_TOTAL_BOUND,
    max_doublings: int = 40,
) -> WeakTypeReport:
    """
    Restricted weak-type reduction on a 1D grid.

    f₁ and f₂ are rescaled to unit L¹ norm; E3 must have measure 1. With
    U = {M f₁ > C} ∪ {M f₂ > C} and f₃ = 1_{E3 ∖ U}, each tile is assigned
    d = ⌊log₂(1 + dist(I_P, U^c)/|I_P|)⌋.

    Raises ThresholdTooSmallError, with a threshold found by doubling, when
    |E3 ∖ U| < |E3|/2, and ToleranceFailure when the stratum sums exceed c_total.
    """
    f1.require_same_geometry(f2)
    if f1.dim != 1:
        raise ValidationFailure("weak_type_driver works on 1D functions")
    if threshold <= 0:
        raise ValidationFailure("threshold C must be positive")
    e3 = np.asarray(e3, dtype=bool)
    if e3.shape != f1.shape:
        raise ValidationFailure("E3 mask shape does not match the grid")
    e3_measure = float(np.count_nonzero(e3)) * f1.spacing
    if not math.isclose(e3_measure, 1.0, rel_tol=1e-9):
        raise ValidationFailure(f"|E3| must be 1, got {e3_measure}")

    scaled = []
    for name, f in (("f1", f1), ("f2", f2)):
        mass = float(np.sum(np.abs(f.samples)) * f.spacing)
        if mass == 0:
            raise ValidationFailure(f"{name} has zero L¹ norm")
        scaled.append(f * (1.0 / mass))
    g1, g2 = scaled

    m1 = dyadic_maximal_1d(g1).samples.real
    m2 = dyadic_maximal_1d(g2).samples.real

    def _remaining(level: float) -> Tuple[np.ndarray, float]:
        mask = (m1 > level) | (m2 > level)
        return mask, float(np.count_nonzero(e3 & ~mask)) * f1.spacing

    u, e3_prime = _remaining(threshold)
    if e3_prime < e3_measure / 2:
        suggested = None
        candidate = threshold
        for _ in range(max_doublings):
            candidate *= 2
            if _remaining(candidate)[1] >= e3_measure / 2:
                suggested = candidate
                break
        logger.error(f"❌ Threshold C={threshold} too small; suggested C={suggested}")
        raise ThresholdTooSmallError(
            f"|E3′| = {e3_prime:.4f} is below |E3|/2 = {e3_measure / 2:.4f} "
            f"at C={threshold}",
            suggested_threshold=suggested,
        )
    f3 = g1.like((e3 & ~u).astype(complex))

    tables: List[CoefficientTable] = []
    for j, g, label in ((1, g1, "f1"), (2, g2, "f2"), (3, f3, "f3")):
        system = TileSystem(f1.n_samples, f1.domain_length, FIRST_AXIS_BANDS[j], j)
        tables.append(tile_coefficients(g, system, source_id=label))

    strata: Dict[int, List[TileKey]] = {}
    for k, l in tables[0].keys():
        start, stop = interval_cells(f1.n_samples, k, l)
        width = tables[0].measure((k,))
        dist = _distance_to_complement(u, start, stop, f1.spacing)
        d = 0 if dist == 0 else int(math.floor(math.log2(1 + dist / width)))
        strata.setdefault(d, []).append((k, l))

    report = WeakTypeReport(
        threshold=threshold,
        u_measure=float(np.count_nonzero(u)) * f1.spacing,
        e3_prime_measure=e3_prime,
        c_total=c_total,
        u_mask=u,
        tables=tables,
    )
    for d in sorted(strata):
        members = strata[d]
        stats = [size_energy(t, members) for t in tables]
        form_sum = sum(
            math.prod(abs(t.value(key)) for t in tables)
            / math.sqrt(tables[0].measure((key[0],)))
            for key in members
        )
        report.rows.append(
            StratumRow(
                d=d,
                count=len(members),
                sizes=(stats[0].size, stats[1].size, stats[2].size),
                energies=(stats[0].energy, stats[1].energy, stats[2].energy),
                form_sum=form_sum,
            )
        )
    if report.total > c_total:
        logger.error(f"❌ Weak-type total {report.total:.4e} exceeds C={c_total}")
        raise ToleranceFailure(
            f"weak-type stratum sums total {report.total:.4e} > C_total={c_total}"
        )
    logger.info(
        f"✅ Weak-type driver: |U|={report.u_measure:.4f}, "
        f"|E3′|={report.e3_prime_measure:.4f}, total={report.total:.4e} "
        f"≤ {c_total:g}, f3 decay constant {report.f3_decay_constant:.3e}"
    )
    return report


# ---------------------------------------------------------------------------
# Level stratification of bi-tiles
# ---------------------------------------------------------------------------


def summed_area(mask: np.ndarray) -> np.ndarray:
    """Zero-padded 2D prefix sums of a boolean mask."""
    table = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    table[1:, 1:] = np.cumsum(np.cumsum(mask.astype(np.int64), axis=0), axis=1)
    return table


def rectangle_count(
    table: np.ndarray, rows: Tuple[int, int], cols: Tuple[int, int]
) -> int:
    (r0, r1), (c0, c1) = rows, cols
    return int(table[r1, c1] - table[r0, c1] - table[r1, c0] + table[r0, c0])


def bitile_cells(n: int, key: BiTileKey) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    k1, l1, k2, l2 = key
    return interval_cells(n, k1, l1), interval_cells(n, k2, l2)


@dataclass
class Ladder:
    """Level sets Ω_n = {op > C·2^{-n}} from ``ground`` upwards."""

    name: str
    values: np.ndarray
    threshold: float
    ground: int

    def level_set(self, n: int) -> np.ndarray:
        return self.values > self.threshold * 2.0**-n


@dataclass
class Stratification:
    strata: Dict[Tuple[int, int, int], List[BiTileKey]]
    excluded: List[BiTileKey]
    overlap_fraction: Dict[BiTileKey, float]
    level_measures: Dict[int, float]

    @property
    def certificate_passes(self) -> bool:
        return all(
            100 * frac > OVERLAP_NUMERATOR for frac in self.overlap_fraction.values()
        )

    @property
    def min_overlap(self) -> float:
        return min(self.overlap_fraction.values(), default=1.0)


def _assign_levels(
    ladder: Ladder, keys: Sequence[BiTileKey], n: int
) -> Tuple[Dict[BiTileKey, int], List[BiTileKey]]:
    """First level at which each tile has more than 1% of its cells in Ω_level."""
    below = summed_area(ladder.level_set(ladder.ground - 1))
    assigned: Dict[BiTileKey, int] = {}
    failed: List[BiTileKey] = []
    for key in keys:
        rows, cols = bitile_cells(n, key)
        cells = (rows[1] - rows[0]) * (cols[1] - cols[0])
        if SELECTION_FRACTION * rectangle_count(below, rows, cols) > cells:
            failed.append(key)
    failed_set = set(failed)
    pending = [key for key in keys if key not in failed_set]
    level = ladder.ground
    positive = ladder.values[ladder.values > 0]
    floor_value = float(np.min(positive)) if positive.size else 0.0
    while pending and level < ladder.ground + LEVEL_CAP:
        if floor_value == 0 or ladder.threshold * 2.0 ** -(level - 1) < floor_value:
            break
        table = summed_area(ladder.level_set(level))
        still = []
        for key in pending:
            rows, cols = bitile_cells(n, key)
            cells = (rows[1] - rows[0]) * (cols[1] - cols[0])
            if SELECTION_FRACTION * rectangle_count(table, rows, cols) > cells:
                assigned[key] = level
            else:
                still.append(key)
        pending = still
        level += 1
    for key in pending:
        assigned[key] = ladder.ground
    return assigned, failed


def stratify_levels(
    t1: CoefficientTable,
    t2: CoefficientTable,
    t3: CoefficientTable,
    threshold: float,
    n_start: int,
    tiles: Optional[Sequence[BiTileKey]] = None,
) -> Stratification:
    """
    Split bi-tiles into 𝐓_{n1,n2,n3} by the level sets of MS f₁, SM f₂ and SS f₃.

    Ladders for MS and SM start at level 0, the SS ladder at −n_start. A tile whose
    cells meet Ω_{ground−1} in more than 1% is excluded for MS/SM; for SS that means
    n_start is too small and a ValidationFailure is raised. Tiles never selected sit
    at the ground level.
    """
    n = t1.n_samples
    keys = list(t1.keys()) if tiles is None else list(tiles)
    ladders = [
        Ladder("MS", hybrid_square(t1, "MS").samples.real, threshold, 0),
        Ladder("SM", hybrid_square(t2, "SM").samples.real, threshold, 0),
        Ladder("SS", hybrid_square(t3, "SS").samples.real, threshold, -n_start),
    ]
    assignments = []
    excluded: List[BiTileKey] = []
    for ladder in ladders:
        assigned, failed = _assign_levels(ladder, keys, n)
        if ladder.name == "SS" and failed:
            raise ValidationFailure(
                f"n_start={n_start} too small: {len(failed)} tiles meet the SS level "
                f"set above C·2^{n_start + 1}"
            )
        excluded += failed
        assignments.append(assigned)

    excluded_set = set(excluded)
    strata: Dict[Tuple[int, int, int], List[BiTileKey]] = {}
    overlap: Dict[BiTileKey, float] = {}
    level_cover: Dict[int, np.ndarray] = {}
    level_sets: Dict[Tuple[int, int], np.ndarray] = {}
    for key in keys:
        if key in excluded_set:
            continue
        levels = tuple(a[key] for a in assignments)
        strata.setdefault(levels, []).append(key)  # type: ignore[arg-type]
        rows, cols = bitile_cells(n, key)
        cells = (rows[1] - rows[0]) * (cols[1] - cols[0])
        union = np.zeros((rows[1] - rows[0], cols[1] - cols[0]), dtype=bool)
        for idx, (ladder, level) in enumerate(zip(ladders, levels)):
            lookup = (idx, level - 1)
            if lookup not in level_sets:
                level_sets[lookup] = ladder.level_set(level - 1)
            union |= level_sets[lookup][rows[0] : rows[1], cols[0] : cols[1]]
        bad = int(np.count_nonzero(union))
        overlap[key] = (cells - bad) / cells
        cover = level_cover.setdefault(levels[0], np.zeros((n, n), dtype=bool))
        cover[rows[0] : rows[1], cols[0] : cols[1]] = True

    cell_measure = (t1.domain_length / n) ** 2
    measures = {
        level: float(np.count_nonzero(mask)) * cell_measure
        for level, mask in sorted(level_cover.items())
    }
    result = Stratification(strata, sorted(excluded_set), overlap, measures)
    if result.certificate_passes:
        logger.info(
            f"✅ Stratified {len(keys) - len(excluded_set)} bi-tiles into "
            f"{len(strata)} strata, min overlap {result.min_overlap:.4f}"
        )
    else:
        logger.warning(
            f"⚠️ Overlap certificate fails, min overlap {result.min_overlap:.4f}"
        )
    return result


# ---------------------------------------------------------------------------
# Journé rectangles
# ---------------------------------------------------------------------------


@dataclass
class JourneReport:
    rectangles: Dict[Tuple[int, int, int, int], int]
    classes: Dict[int, float]
    omega_measure: float
    epsilon: float

    @property
    def constant(self) -> float:
        """max_d Σ_{R ∈ class d} |R| / (2^{εd}·|Ω|)."""
        if self.omega_measure == 0:
            return 0.0
        return max(
            (
                area / (2.0 ** (self.epsilon * d) * self.omega_measure)
                for d, area in self.classes.items()
            ),
            default=0.0,
        )


def _maximal_rectangle(
    key: BiTileKey, omega_sat: np.ndarray, n: int
) -> Tuple[int, int, int, int]:
    k1, l1, k2, l2 = key
    best: Optional[Tuple[int, int, int, int]] = None
    best_rank: Tuple[int, int] = (0, 0)
    for a1 in range(0, k1 + 1):
        for a2 in range(0, k2 + 1):
            candidate = (a1, l1 >> (k1 - a1), a2, l2 >> (k2 - a2))
            rows, cols = bitile_cells(n, candidate)
            cells = (rows[1] - rows[0]) * (cols[1] - cols[0])
            if rectangle_count(omega_sat, rows, cols) != cells:
                continue
            rank = (-(a1 + a2), -a1)
            if best is None or rank > best_rank:
                best, best_rank = candidate, rank
    if best is None:
        raise ValidationFailure(f"bi-tile {key} is not contained in Ω")
    return best


def _dilation_depth(
    rect: Tuple[int, int, int, int], tilde_sat: np.ndarray, n: int
) -> int:
    rows, cols = bitile_cells(n, rect)
    depth = 0
    while True:
        factor = 2.0 ** (depth + 1)
        spans = []
        for lo, hi in (rows, cols):
            grow = (factor - 1) * (hi - lo) / 2
            spans.append((math.floor(lo - grow), math.ceil(hi + grow)))
        if any(lo < 0 or hi > n for lo, hi in spans):
            return depth
        cells = (spans[0][1] - spans[0][0]) * (spans[1][1] - spans[1][0])
        if rectangle_count(tilde_sat, spans[0], spans[1]) != cells:
            return depth
        depth += 1


def journe_maximal(
    tiles: Sequence[BiTileKey],
    omega: np.ndarray,
    omega_tilde: np.ndarray,
    epsilon: float = 0.5,
    length: float = 1.0,
) -> JourneReport:
    """
    Maximal dyadic rectangles R ⊆ Ω containing each bi-tile, with the largest d such
    that the centred 2^d-dilate of R stays inside the domain and Ω̃.

    When several maximal rectangles exist the one with the largest area is used,
    preferring the wider first side.
    """
    omega = np.asarray(omega, dtype=bool)
    omega_tilde = np.asarray(omega_tilde, dtype=bool)
    if omega.shape != omega_tilde.shape or omega.ndim != 2:
        raise ValidationFailure("Ω and Ω̃ must be masks on the same 2D grid")
    if np.any(omega & ~omega_tilde):
        raise ValidationFailure("Ω must be contained in Ω̃")
    n = omega.shape[0]
    omega_sat = summed_area(omega)
    tilde_sat = summed_area(omega_tilde)
    rectangles: Dict[Tuple[int, int, int, int], int] = {}
    for key in tiles:
        rect = _maximal_rectangle(key, omega_sat, n)
        if rect not in rectangles:
            rectangles[rect] = _dilation_depth(rect, tilde_sat, n)

    cell_measure = (length / n) ** 2
    classes: Dict[int, float] = {}
    for rect, depth in rectangles.items():
        rows, cols = bitile_cells(n, rect)
        area = (rows[1] - rows[0]) * (cols[1] - cols[0]) * cell_measure
        classes[depth] = classes.get(depth, 0.0) + area
    report = JourneReport(
        rectangles, classes, float(np.count_nonzero(omega)) * cell_measure, epsilon
    )
    logger.info(
        f"✅ Journé rectangles: {len(rectangles)} maximal, "
        f"constant {report.constant:.4f} at ε={epsilon}"
    )
    return report
