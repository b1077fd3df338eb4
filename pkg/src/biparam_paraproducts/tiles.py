"""
Dyadic tiles, wave packets and the size/energy stopping-time machinery.

A 1D tile (k, l) has spatial interval I_{k,l} = L·2^{-k}[l, l+1) and, for type j, a
frequency band 2^k·B_j (in integer frequency units) where

    first axis  (P′):  j=1 low [−1/4, 1/4], j=2 up [3/4, 5/4], j=3 down [−7/4, −1/4]
    second axis (P″):  j=1 up,               j=2 low,          j=3 down

Wave packets are built on the frequency side as a smooth bump on the band,
modulated to the interval centre and L²-normalised, so their spectra lie exactly
inside the band. Scales run from 0 to log2 N − 2, which keeps every band below the
Nyquist frequency and every interval at least four cells wide.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import GridFunction, integer_frequencies, weak_l1

logger = logging.getLogger(__name__)

BANDS = {
    "low": (-0.25, 0.25),
    "up": (0.75, 1.25),
    "down": (-1.75, -0.25),
}
FIRST_AXIS_BANDS = {1: "low", 2: "up", 3: "down"}
SECOND_AXIS_BANDS = {1: "up", 2: "low", 3: "down"}

# Envelope decay exponent for χ̃_I
DEFAULT_DECAY_M = 10

TileKey = Tuple[int, int]
BiTileKey = Tuple[int, int, int, int]


@dataclass(frozen=True)
class Tile1D:
    k: int
    l: int
    band: str
    j: int

    def interval(self, length: float) -> Tuple[float, float]:
        width = length * 2.0**-self.k
        return self.l * width, (self.l + 1) * width


@dataclass(frozen=True)
class BiTile:
    horizontal: Tile1D
    vertical: Tile1D
    j: int

    @property
    def key(self) -> BiTileKey:
        return (self.horizontal.k, self.horizontal.l, self.vertical.k, self.vertical.l)


@dataclass
class WavePacket:
    tile: Union[Tile1D, BiTile]
    samples: GridFunction


def interval_cells(n: int, k: int, l: int) -> Tuple[int, int]:
    """Cell index range [start, stop) of I_{k,l}."""
    width = n >> k
    return l * width, (l + 1) * width


def contains(outer: TileKey, inner: TileKey) -> bool:
    """I_inner ⊆ I_outer for dyadic intervals."""
    (k0, l0), (k1, l1) = outer, inner
    return k1 >= k0 and (l1 >> (k1 - k0)) == l0


def band_bump(xi: np.ndarray, band: str, scale: float) -> np.ndarray:
    """Smooth bump exp(−1/(1 − t²)) on the band 2^k·B."""
    lo, hi = BANDS[band]
    center = 0.5 * (lo + hi) * scale
    half = 0.5 * (hi - lo) * scale
    t = (xi - center) / half
    inside = np.abs(t) < 1
    return np.where(inside, np.exp(-1.0 / np.where(inside, 1 - t * t, 1.0)), 0.0)


class TileSystem:
    """All dyadic tiles of one axis for a fixed band, with cached packet matrices."""

    def __init__(
        self,
        n: int,
        length: float = 1.0,
        band: str = "low",
        j: int = 1,
        scale_range: Optional[Sequence[int]] = None,
    ):
        if band not in BANDS:
            raise ValidationFailure(f"unknown band '{band}'")
        self.n = n
        self.length = float(length)
        self.band = band
        self.j = j
        self.max_scale = int(math.log2(n)) - 2
        scales = (
            list(range(0, self.max_scale + 1))
            if scale_range is None
            else list(scale_range)
        )
        bad = [k for k in scales if not 0 <= k <= self.max_scale]
        if bad:
            raise ValidationFailure(
                f"scale(s) {bad} out of range 0..{self.max_scale} for N={n}"
            )
        self.scales = sorted(scales)
        self._packets: Dict[int, np.ndarray] = {}

    @property
    def cell(self) -> float:
        return self.length / self.n

    def measure(self, k: int) -> float:
        """|I_{k,l}|."""
        return self.length * 2.0**-k

    def tiles(self) -> List[Tile1D]:
        return [
            Tile1D(k, l, self.band, self.j)
            for k in self.scales
            for l in range(2**k)
        ]

    def keys(self) -> List[TileKey]:
        return [(k, l) for k in self.scales for l in range(2**k)]

    def packets(self, k: int) -> np.ndarray:
        """Matrix whose rows are the packets Φ_{k,l}, l = 0..2^k − 1."""
        if k not in self._packets:
            freqs = integer_frequencies(self.n)
            spectrum = band_bump(freqs, self.band, 2.0**k)
            x_center = 0.5 * self.measure(k)
            spectrum = spectrum * np.exp(-2j * np.pi * freqs * x_center / self.length)
            base = np.fft.ifft(spectrum)
            norm = math.sqrt(float(np.sum(np.abs(base) ** 2)) * self.cell)
            if norm == 0:
                raise ValidationFailure(f"band '{self.band}' is empty at scale {k}")
            base = base / norm
            shift = self.n >> k
            self._packets[k] = np.stack([np.roll(base, l * shift) for l in range(2**k)])
        return self._packets[k]

    def packet(self, k: int, l: int) -> WavePacket:
        samples = GridFunction(
            dim=1,
            n_samples=self.n,
            samples=self.packets(k)[l],
            domain_length=self.length,
        )
        return WavePacket(Tile1D(k, l, self.band, self.j), samples)


class BiTileSystem:
    """Bi-tiles P⃗_j = (P′_j, P″_j) over all scale pairs."""

    def __init__(
        self,
        n: int,
        length: float = 1.0,
        j: int = 1,
        scale_range: Optional[Sequence[int]] = None,
    ):
        if j not in (1, 2, 3):
            raise ValidationFailure(f"tile type must be 1, 2 or 3, got {j}")
        self.n = n
        self.length = float(length)
        self.j = j
        self.first = TileSystem(n, length, FIRST_AXIS_BANDS[j], j, scale_range)
        self.second = TileSystem(n, length, SECOND_AXIS_BANDS[j], j, scale_range)

    @property
    def scales(self) -> List[int]:
        return self.first.scales

    @property
    def max_scale(self) -> int:
        return self.first.max_scale

    def measure(self, k1: int, k2: int) -> float:
        """|I_{P⃗}| = |I′|·|I″|."""
        return self.first.measure(k1) * self.second.measure(k2)

    def keys(self) -> List[BiTileKey]:
        return [
            (k1, l1, k2, l2)
            for k1 in self.scales
            for k2 in self.scales
            for l1 in range(2**k1)
            for l2 in range(2**k2)
        ]

    def packet(self, key: BiTileKey) -> WavePacket:
        k1, l1, k2, l2 = key
        samples = np.outer(self.first.packets(k1)[l1], self.second.packets(k2)[l2])
        grid = GridFunction(
            dim=2, n_samples=self.n, samples=samples, domain_length=self.length
        )
        tile = BiTile(
            Tile1D(k1, l1, self.first.band, self.j),
            Tile1D(k2, l2, self.second.band, self.j),
            self.j,
        )
        return WavePacket(tile, grid)


AnySystem = Union[TileSystem, BiTileSystem]


def build_tile_system(
    n: int,
    length: float = 1.0,
    j: int = 1,
    dim: int = 1,
    scale_range: Optional[Sequence[int]] = None,
) -> AnySystem:
    """Tile system of type j on an N-point (1D) or N×N (2D) grid."""
    if j not in (1, 2, 3):
        raise ValidationFailure(f"tile type must be 1, 2 or 3, got {j}")
    if dim == 1:
        return TileSystem(n, length, FIRST_AXIS_BANDS[j], j, scale_range)
    if dim == 2:
        return BiTileSystem(n, length, j, scale_range)
    raise ValidationFailure(f"dim must be 1 or 2, got {dim}")


@dataclass
class CoefficientTable:
    """⟨f, Φ_P⟩ for every tile, stored per scale (1D) or scale pair (2D)."""

    j: int
    blocks: Dict[Tuple[int, ...], np.ndarray]
    n_samples: int
    domain_length: float
    source_id: str = ""
    source: Optional[GridFunction] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(next(iter(self.blocks)))

    def measure(self, scale: Tuple[int, ...]) -> float:
        return float(np.prod([self.domain_length * 2.0**-k for k in scale]))

    def value(self, key: Tuple[int, ...]) -> complex:
        """Coefficient of a tile key (k, l) or (k′, l′, k″, l″)."""
        if len(key) == 2:
            return complex(self.blocks[(key[0],)][key[1]])
        return complex(self.blocks[(key[0], key[2])][key[1], key[3]])

    def keys(self) -> List[Tuple[int, ...]]:
        out: List[Tuple[int, ...]] = []
        for scale, block in sorted(self.blocks.items()):
            if len(scale) == 1:
                out += [(scale[0], l) for l in range(block.shape[0])]
            else:
                out += [
                    (scale[0], l1, scale[1], l2)
                    for l1 in range(block.shape[0])
                    for l2 in range(block.shape[1])
                ]
        return out

    def energy_sum(self) -> float:
        return float(sum(np.sum(np.abs(b) ** 2) for b in self.blocks.values()))


def tile_coefficients(
    f: GridFunction, system: AnySystem, j: Optional[int] = None, source_id: str = ""
) -> CoefficientTable:
    """Inner products ⟨f, Φ_P⟩ by Riemann sum for every tile of the system."""
    if j is not None and j != system.j:
        raise ValidationFailure(f"tile system has type {system.j}, requested {j}")
    if f.n_samples != system.n or not math.isclose(f.domain_length, system.length):
        raise ValidationFailure("grid geometry mismatch between function and tiles")
    blocks: Dict[Tuple[int, ...], np.ndarray] = {}
    if isinstance(system, BiTileSystem):
        if f.dim != 2:
            raise ValidationFailure("bi-tile coefficients need a 2D function")
        cell = system.first.cell**2
        for k1 in system.scales:
            p1 = np.conj(system.first.packets(k1))
            for k2 in system.scales:
                p2 = np.conj(system.second.packets(k2))
                blocks[(k1, k2)] = p1 @ f.samples @ p2.T * cell
    else:
        if f.dim != 1:
            raise ValidationFailure("1D tile coefficients need a 1D function")
        for k in system.scales:
            blocks[(k,)] = np.conj(system.packets(k)) @ f.samples * system.cell
    table = CoefficientTable(
        system.j, blocks, system.n, system.length, source_id or "f", source=f
    )
    norm2 = float(np.sum(np.abs(f.samples) ** 2) * f.cell_measure)
    if norm2 > 0:
        logger.info(
            f"🔍 Bessel ratio for {table.source_id} (j={system.j}): "
            f"{table.energy_sum() / norm2:.4f}"
        )
    return table


def random_coefficient_table(
    system: AnySystem, seed: int = 0, source_id: str = ""
) -> CoefficientTable:
    """Complex Gaussian coefficients on every tile of the system."""
    rng = np.random.default_rng(seed)
    blocks: Dict[Tuple[int, ...], np.ndarray] = {}
    if isinstance(system, BiTileSystem):
        for k1 in system.scales:
            for k2 in system.scales:
                shape = (2**k1, 2**k2)
                real = rng.standard_normal(shape)
                blocks[(k1, k2)] = real + 1j * rng.standard_normal(shape)
    else:
        for k in system.scales:
            blocks[(k,)] = rng.standard_normal(2**k) + 1j * rng.standard_normal(2**k)
    return CoefficientTable(
        system.j, blocks, system.n, system.length, source_id or f"random_{seed}"
    )


def model_form(
    t1: CoefficientTable, t2: CoefficientTable, t3: CoefficientTable
) -> float:
    """Σ_P |I_P|^{-1/2}·|⟨f₁,Φ_{P₁}⟩|·|⟨f₂,Φ_{P₂}⟩|·|⟨f₃,Φ_{P₃}⟩|."""
    if not (t1.blocks.keys() == t2.blocks.keys() == t3.blocks.keys()):
        raise ValidationFailure("index mismatch: tables cover different scales")
    total = 0.0
    for scale in sorted(t1.blocks):
        a, b, c = (t.blocks[scale] for t in (t1, t2, t3))
        if not a.shape == b.shape == c.shape:
            raise ValidationFailure(f"index mismatch at scale {scale}")
        total += float(np.sum(np.abs(a) * np.abs(b) * np.abs(c))) / math.sqrt(
            t1.measure(scale)
        )
    return total


# ---------------------------------------------------------------------------
# Size and energy (1D)
# ---------------------------------------------------------------------------


def _subset(
    table: CoefficientTable, tiles: Optional[Iterable[TileKey]]
) -> Set[TileKey]:
    if table.dim != 1:
        raise ValidationFailure("size/energy are defined for 1D tile tables")
    return set(table.keys()) if tiles is None else set(tiles)


def local_square_profile(
    table: CoefficientTable, tiles: Set[TileKey]
) -> Dict[int, np.ndarray]:
    """B_k(x) = Σ_{P: k_P ≥ k} |c_P|²/|I_P|·1_{I_P}(x) on cells, for every scale k."""
    n = table.n_samples
    per_scale: Dict[int, np.ndarray] = {}
    for k, l in tiles:
        start, stop = interval_cells(n, k, l)
        if k not in per_scale:
            per_scale[k] = np.zeros(n)
        per_scale[k][start:stop] += abs(table.value((k, l))) ** 2 / table.measure((k,))
    cumulative: Dict[int, np.ndarray] = {}
    running = np.zeros(n)
    for k in sorted(per_scale, reverse=True):
        running = running + per_scale[k]
        cumulative[k] = running
    return cumulative


def _cumulative_at(cumulative: Dict[int, np.ndarray], k: int, n: int) -> np.ndarray:
    deeper = [s for s in cumulative if s >= k]
    return cumulative[min(deeper)] if deeper else np.zeros(n)


def tile_criteria(
    table: CoefficientTable, tiles: Set[TileKey], j: int
) -> Dict[TileKey, float]:
    """Per-tile size term: |c|/|I|^{1/2} (j=1) or |I|^{-1}‖S_P‖_{1,∞} (j=2,3)."""
    if j == 1:
        return {
            key: abs(table.value(key)) / math.sqrt(table.measure((key[0],)))
            for key in tiles
        }
    n = table.n_samples
    cell = table.domain_length / n
    cumulative = local_square_profile(table, tiles)
    out = {}
    for k, l in tiles:
        start, stop = interval_cells(n, k, l)
        local = np.sqrt(_cumulative_at(cumulative, k, n)[start:stop])
        out[(k, l)] = weak_l1(local, cell) / table.measure((k,))
    return out


def chi_tilde(n: int, length: float, key: TileKey, decay_m: int) -> np.ndarray:
    """χ̃_I(x) = (1 + dist_periodic(x, c(I))/|I|)^{-M} on cell positions."""
    k, l = key
    width = length * 2.0**-k
    x = np.arange(n) * (length / n)
    center = (l + 0.5) * width
    d = np.abs(x - center)
    d = np.minimum(d, length - d)
    return (1.0 + d / width) ** (-decay_m)


def tile_weights(
    f: GridFunction, keys: Iterable[TileKey], decay_m: int = DEFAULT_DECAY_M
) -> Dict[TileKey, float]:
    """w_P = ⟨|f|, χ̃_{I_P}⟩/|I_P|."""
    magnitude = np.abs(f.samples)
    out = {}
    for key in keys:
        envelope = chi_tilde(f.n_samples, f.domain_length, key, decay_m)
        width = f.domain_length * 2.0 ** -key[0]
        out[key] = float(np.sum(magnitude * envelope) * f.spacing) / width
    return out


def energy_from_weights(weights: Dict[TileKey, float], length: float) -> float:
    """
    sup over disjoint subfamilies of ‖Σ w_P 1_{I_P}‖_{1,∞}.

    For dyadic intervals the best family at level t is the set of maximal intervals
    with w_P ≥ t, so the sup equals max_t t·|∪{I_P : w_P ≥ t}|.
    """
    if not weights:
        return 0.0
    ordered = sorted(weights.items(), key=lambda kv: -kv[1])
    best = 0.0
    covered: List[TileKey] = []
    measure = 0.0
    idx = 0
    while idx < len(ordered):
        t = ordered[idx][1]
        while idx < len(ordered) and ordered[idx][1] == t:
            key = ordered[idx][0]
            if not any(contains(c, key) for c in covered):
                inside = [c for c in covered if contains(key, c)]
                measure -= sum(length * 2.0 ** -c[0] for c in inside)
                covered = [c for c in covered if c not in inside] + [key]
                measure += length * 2.0 ** -key[0]
            idx += 1
        best = max(best, t * measure)
    return best


@dataclass
class SizeEnergy:
    size: float
    energy: float
    jn_size: float


def size_energy(
    table: CoefficientTable,
    tiles: Optional[Iterable[TileKey]] = None,
    j: Optional[int] = None,
    decay_m: int = DEFAULT_DECAY_M,
) -> SizeEnergy:
    """Size, energy and the John-Nirenberg size of a 1D tile subset."""
    j = table.j if j is None else j
    if j not in (1, 2, 3):
        raise ValidationFailure(f"tile type must be 1, 2 or 3, got {j}")
    subset = _subset(table, tiles)
    if not subset:
        return SizeEnergy(0.0, 0.0, 0.0)
    criteria = tile_criteria(table, subset, j)
    size = max(criteria.values())

    cumulative = local_square_profile(table, subset)
    n, cell = table.n_samples, table.domain_length / table.n_samples
    jn = 0.0
    for k, l in subset:
        start, stop = interval_cells(n, k, l)
        total = float(np.sum(_cumulative_at(cumulative, k, n)[start:stop]) * cell)
        jn = max(jn, math.sqrt(total / table.measure((k,))))

    energy = 0.0
    if table.source is not None:
        weights = tile_weights(table.source, subset, decay_m)
        energy = energy_from_weights(weights, table.domain_length)
    return SizeEnergy(size, energy, jn)


def cz_check(
    f: GridFunction,
    tile: TileKey,
    j: int,
    system: Optional[TileSystem] = None,
    decay_m: int = DEFAULT_DECAY_M,
) -> Tuple[float, float]:
    """(‖local square function over I_{P′} ⊆ I_P‖_{1,∞}, ‖f·χ̃_{I_P}‖₁)."""
    if j not in (2, 3):
        raise ValidationFailure("cz_check is defined for j = 2, 3")
    system = system or TileSystem(f.n_samples, f.domain_length, FIRST_AXIS_BANDS[j], j)
    table = tile_coefficients(f, system)
    descendants = {key for key in table.keys() if contains(tile, key)}
    cumulative = local_square_profile(table, descendants)
    start, stop = interval_cells(f.n_samples, *tile)
    local = np.sqrt(_cumulative_at(cumulative, tile[0], f.n_samples)[start:stop])
    lhs = weak_l1(local, f.spacing)
    envelope = chi_tilde(f.n_samples, f.domain_length, tile, decay_m)
    rhs = float(np.sum(np.abs(f.samples) * envelope) * f.spacing)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Stopping time
# ---------------------------------------------------------------------------


@dataclass
class Tree:
    top: TileKey
    members: List[TileKey]


@dataclass
class StoppingDecomposition:
    """Strata 𝐏_n of trees, the unselected residual and the recorded constants."""

    j: int
    energy_ref: float
    n_start: int
    strata: Dict[int, List[TileKey]] = field(default_factory=dict)
    trees: Dict[int, List[Tree]] = field(default_factory=dict)
    thresholds: Dict[int, float] = field(default_factory=dict)
    c_stop: Dict[int, float] = field(default_factory=dict)
    residual: List[TileKey] = field(default_factory=list)

    def rows(self, length: float) -> List[Tuple[int, int, float, float, int]]:
        """(stratum n, tree id, I_T start, I_T end, member count)."""
        out = []
        for n in sorted(self.trees):
            for tree_id, tree in enumerate(self.trees[n]):
                lo, hi = Tile1D(tree.top[0], tree.top[1], "", self.j).interval(length)
                out.append((n, tree_id, lo, hi, len(tree.members)))
        return out


def stopping_step(
    table: CoefficientTable, tiles: Set[TileKey], j: int, threshold: float
) -> Tuple[List[Tree], Set[TileKey]]:
    """
    Remove trees until every remaining criterion is ≤ threshold.

    Picks the tile with the largest interval whose criterion exceeds the threshold
    (ties by smallest (k, l)), sweeps every remaining tile inside its interval into a
    tree, and recomputes criteria on what is left.
    """
    remaining = set(tiles)
    trees: List[Tree] = []
    criteria = tile_criteria(table, remaining, j)
    while True:
        over = [key for key in remaining if criteria[key] > threshold]
        if not over:
            return trees, remaining
        top = min(over)
        members = sorted(key for key in remaining if contains(top, key))
        trees.append(Tree(top, members))
        remaining -= set(members)
        if j == 1:
            criteria = {key: criteria[key] for key in remaining}
        else:
            criteria = tile_criteria(table, remaining, j)


def stopping_decompose(
    table: CoefficientTable,
    tiles: Optional[Iterable[TileKey]] = None,
    j: Optional[int] = None,
    energy_ref: Optional[float] = None,
    max_levels: int = 48,
) -> StoppingDecomposition:
    """
    Iterate the stopping step over levels n, starting where size ≤ 2^{-n}·energy.

    Level n removes trees until the residual size is ≤ 2^{-n-1}·energy_ref; the
    removed tiles form 𝐏_n and C_stop(n) = Σ_T |I_T| / 2^n is recorded.
    """
    j = table.j if j is None else j
    subset = _subset(table, tiles)
    if energy_ref is None:
        energy_ref = size_energy(table, subset, j).energy
    decomposition = StoppingDecomposition(j=j, energy_ref=energy_ref, n_start=0)
    if not subset or energy_ref <= 0:
        decomposition.residual = sorted(subset)
        return decomposition
    size = max(tile_criteria(table, subset, j).values())
    n_start = math.floor(math.log2(energy_ref / size)) if size > 0 else 0
    decomposition.n_start = n_start
    remaining = subset
    for n in range(n_start, n_start + max_levels):
        if not remaining:
            break
        threshold = 2.0 ** (-n - 1) * energy_ref
        trees, remaining = stopping_step(table, remaining, j, threshold)
        decomposition.thresholds[n] = threshold
        decomposition.trees[n] = trees
        decomposition.strata[n] = sorted(key for t in trees for key in t.members)
        total = sum(table.measure((t.top[0],)) for t in trees)
        decomposition.c_stop[n] = total / 2.0**n
    decomposition.residual = sorted(remaining)
    worst = max(decomposition.c_stop.values(), default=0.0)
    logger.info(
        f"✅ Stopping decomposition (j={j}): {len(decomposition.strata)} levels from "
        f"n={n_start}, C_stop={worst:.3f}"
    )
    return decomposition


def size_energy_estimate(
    tables: Sequence[CoefficientTable],
    tiles: Optional[Iterable[TileKey]] = None,
    thetas: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    energies: Optional[Sequence[float]] = None,
) -> Tuple[float, float, float]:
    """
    (Σ_P |I_P|^{-1/2}Π|c_j|, Π size_j^{1−θ_j}·energy_j^{θ_j}, ratio).

    Tables without a source function have no computable energy; pass ``energies``
    (one per table) for them. A positive left side over a vanishing bound gives an
    infinite ratio.
    """
    if len(tables) != 3 or len(thetas) != 3:
        raise ValidationFailure("need three tables and three θ weights")
    if any(not 0 <= t < 1 for t in thetas) or not math.isclose(sum(thetas), 1.0):
        raise ValidationFailure("θ_j must lie in [0, 1) and sum to 1")
    if energies is not None and (
        len(energies) != 3 or any(not e >= 0 for e in energies)
    ):
        raise ValidationFailure("energies must be three non-negative numbers")
    subset = _subset(tables[0], tiles)
    if not subset:
        return 0.0, 0.0, 0.0
    lhs = sum(
        math.prod(abs(t.value(key)) for t in tables)
        / math.sqrt(tables[0].measure((key[0],)))
        for key in subset
    )
    rhs = 1.0
    for idx, (table, theta) in enumerate(zip(tables, thetas)):
        se = size_energy(table, subset, table.j)
        energy = se.energy if energies is None else float(energies[idx])
        if energies is None and table.source is None and theta > 0:
            logger.warning(
                f"⚠️ Table {table.source_id} has no source function; energy taken as 0"
            )
        rhs *= se.size ** (1 - theta) * energy**theta
    if rhs > 0:
        ratio = lhs / rhs
    elif lhs > 0:
        ratio = math.inf
        logger.warning(f"⚠️ Size-energy bound vanishes while lhs={lhs:.4e}")
    else:
        ratio = 0.0
    logger.info(
        f"🔍 Size-energy estimate: lhs={lhs:.4e} rhs={rhs:.4e} ratio={ratio:.4e}"
    )
    return lhs, rhs, ratio


def tile_subsets(
    keys: Sequence[TileKey], max_size: int
) -> Iterable[Tuple[TileKey, ...]]:
    """All subsets of up to ``max_size`` tiles with pairwise disjoint intervals."""
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(keys, size):
            if all(
                not contains(a, b) and not contains(b, a)
                for a, b in itertools.combinations(combo, 2)
            ):
                yield combo
