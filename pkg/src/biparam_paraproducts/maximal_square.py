"""
Hybrid maximal-square operators on 2D bi-tile coefficient tables.

With α_P⃗ = |a_P⃗|/|I_P⃗|^{1/2} and A_{k′,k″}(x) = Σ_{l′,l″} α²·1_{I_P⃗}(x):

    SS(x) = (Σ_{k′,k″} A_{k′,k″}(x))^{1/2}
    MS(x) = max_{k′} (Σ_{k″} A_{k′,k″}(x))^{1/2}
    SM(x) = (Σ_{k′} max_{k″} A_{k′,k″}(x))^{1/2}

MS takes tables of type 1, SM type 2 and SS type 3, so the pointwise bound
Σ |a||b||c|/|I|^{3/2}·1_I ≤ MS(a)·SM(b)·SS(c) holds cell by cell.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from biparam_paraproducts.errors import (
    ThresholdTooSmallError,
    ToleranceFailure,
    ValidationFailure,
)
from biparam_paraproducts.grid import GridFunction
from biparam_paraproducts.tiles import BiTileSystem, CoefficientTable, tile_coefficients

logger = logging.getLogger(__name__)

MODE_TYPES = {"MS": 1, "SM": 2, "SS": 3}

MAJORIZATION_TOLERANCE = 1e-12


def mm_maximal(f: GridFunction) -> GridFunction:
    """Strong dyadic maximal function: max over dyadic rectangles R ∋ x of ⟨|f|⟩_R."""
    if f.dim != 2:
        raise ValidationFailure("mm_maximal needs a 2D function")
    values = np.abs(f.samples)
    n = f.n_samples
    best = values.copy()
    blocks = [n >> k for k in range(int(math.log2(n)) + 1)]
    for bx in blocks:
        rows = values.reshape(n // bx, bx, n).mean(axis=1)
        for by in blocks:
            means = rows.reshape(n // bx, n // by, by).mean(axis=2)
            expanded = np.repeat(np.repeat(means, bx, axis=0), by, axis=1)
            np.maximum(best, expanded, out=best)
    return f.like(best)


def _scale_profiles(table: CoefficientTable) -> Dict[Tuple[int, int], np.ndarray]:
    """A_{k′,k″} on cells for every scale pair."""
    if table.dim != 2:
        raise ValidationFailure("hybrid operators need a 2D bi-tile table")
    n = table.n_samples
    out = {}
    for (k1, k2), block in table.blocks.items():
        alpha2 = np.abs(block) ** 2 / table.measure((k1, k2))
        out[(k1, k2)] = np.repeat(np.repeat(alpha2, n >> k1, axis=0), n >> k2, axis=1)
    return out


def hybrid_square(table: CoefficientTable, mode: str) -> GridFunction:
    """MS, SM or SS of a coefficient table as a nonnegative function on the grid."""
    if mode not in MODE_TYPES:
        raise ValidationFailure(
            f"mode must be one of {sorted(MODE_TYPES)}, got '{mode}'"
        )
    if table.j != MODE_TYPES[mode]:
        raise ValidationFailure(
            f"{mode} expects tiles of type {MODE_TYPES[mode]}, got type {table.j}"
        )
    profiles = _scale_profiles(table)
    n = table.n_samples
    first_scales = sorted({k1 for k1, _ in profiles})
    second_scales = sorted({k2 for _, k2 in profiles})
    if mode == "SS":
        values = np.sqrt(sum(profiles.values(), np.zeros((n, n))))
    elif mode == "MS":
        values = np.zeros((n, n))
        for k1 in first_scales:
            inner = sum((profiles[(k1, k2)] for k2 in second_scales), np.zeros((n, n)))
            np.maximum(values, np.sqrt(inner), out=values)
    else:
        total = np.zeros((n, n))
        for k1 in first_scales:
            peak = np.zeros((n, n))
            for k2 in second_scales:
                np.maximum(peak, profiles[(k1, k2)], out=peak)
            total += peak
        values = np.sqrt(total)
    return GridFunction(
        dim=2,
        n_samples=n,
        samples=values.astype(complex),
        domain_length=table.domain_length,
    )


def model_density(
    t1: CoefficientTable, t2: CoefficientTable, t3: CoefficientTable
) -> np.ndarray:
    """Σ_P⃗ |a||b||c|/|I_P⃗|^{3/2}·1_{I_P⃗}(x) on cells."""
    if not (t1.blocks.keys() == t2.blocks.keys() == t3.blocks.keys()):
        raise ValidationFailure("index mismatch: tables cover different scale pairs")
    n = t1.n_samples
    total = np.zeros((n, n))
    for (k1, k2), a in t1.blocks.items():
        b, c = t2.blocks[(k1, k2)], t3.blocks[(k1, k2)]
        density = np.abs(a) * np.abs(b) * np.abs(c) / t1.measure((k1, k2)) ** 1.5
        total += np.repeat(np.repeat(density, n >> k1, axis=0), n >> k2, axis=1)
    return total


@dataclass
class MajorizationCertificate:
    lhs: np.ndarray
    rhs: np.ndarray
    min_slack: float
    tolerance: float

    @property
    def passes(self) -> bool:
        return self.min_slack >= -self.tolerance


def pointwise_majorization(
    t1: CoefficientTable,
    t2: CoefficientTable,
    t3: CoefficientTable,
    strict: bool = False,
) -> MajorizationCertificate:
    """Compare the model density with MS(t1)·SM(t2)·SS(t3) on every cell."""
    lhs = model_density(t1, t2, t3)
    rhs = (
        hybrid_square(t1, "MS").samples.real
        * hybrid_square(t2, "SM").samples.real
        * hybrid_square(t3, "SS").samples.real
    )
    tolerance = MAJORIZATION_TOLERANCE * max(1.0, float(np.max(rhs)))
    certificate = MajorizationCertificate(
        lhs, rhs, float(np.min(rhs - lhs)), tolerance
    )
    if certificate.passes:
        logger.info(
            f"✅ Pointwise majorization holds, min slack {certificate.min_slack:.3e}"
        )
    else:
        logger.warning(
            f"⚠️ Pointwise majorization fails, min slack {certificate.min_slack:.3e}"
        )
        if strict:
            raise ToleranceFailure(
                f"pointwise majorization violated by {-certificate.min_slack:.3e}"
            )
    return certificate


@dataclass
class ExceptionalSets:
    """Ω₀ ⊆ Ω ⊆ Ω̃ as cell masks, and E3′ = E3 ∖ Ω̃."""

    threshold: float
    omega0: np.ndarray
    omega: np.ndarray
    omega_tilde: np.ndarray
    e3_prime: np.ndarray
    cell_measure: float

    def measure(self, mask: np.ndarray) -> float:
        return float(np.count_nonzero(mask)) * self.cell_measure


def _indicator(mask: np.ndarray, like: GridFunction) -> GridFunction:
    return like.like(mask.astype(complex))


def _build_sets(
    f1: GridFunction,
    f2: GridFunction,
    ms1: np.ndarray,
    sm2: np.ndarray,
    mm1: np.ndarray,
    mm2: np.ndarray,
    e3: np.ndarray,
    threshold: float,
) -> ExceptionalSets:
    omega0 = (
        (ms1 > threshold) | (sm2 > threshold) | (mm1 > threshold) | (mm2 > threshold)
    )
    omega = mm_maximal(_indicator(omega0, f1)).samples.real > 1 / 100
    omega_tilde = mm_maximal(_indicator(omega, f1)).samples.real > 1 / 2
    return ExceptionalSets(
        threshold, omega0, omega, omega_tilde, e3 & ~omega_tilde, f1.cell_measure
    )


def exceptional_sets(
    f1: GridFunction,
    f2: GridFunction,
    e3: np.ndarray,
    threshold: float,
    system: Optional[Tuple[BiTileSystem, BiTileSystem]] = None,
    max_doublings: int = 40,
) -> ExceptionalSets:
    """
    Ω₀ = {MS f₁ > C} ∪ {SM f₂ > C} ∪ {MM f₁ > C} ∪ {MM f₂ > C},
    Ω = {MM 1_Ω₀ > 1/100}, Ω̃ = {MM 1_Ω > 1/2}.

    Raises ThresholdTooSmallError, with a threshold found by doubling, when
    |Ω̃| ≥ |E3|/2.
    """
    f1.require_same_geometry(f2)
    if f1.dim != 2:
        raise ValidationFailure("exceptional_sets needs 2D functions")
    e3 = np.asarray(e3, dtype=bool)
    if e3.shape != f1.shape:
        raise ValidationFailure("E3 mask shape does not match the grid")
    if threshold <= 0:
        raise ValidationFailure("threshold C must be positive")
    first, second = system or (
        BiTileSystem(f1.n_samples, f1.domain_length, 1),
        BiTileSystem(f1.n_samples, f1.domain_length, 2),
    )
    ms1 = hybrid_square(tile_coefficients(f1, first, source_id="f1"), "MS").samples.real
    sm2_table = tile_coefficients(f2, second, source_id="f2")
    sm2 = hybrid_square(sm2_table, "SM").samples.real
    mm1 = mm_maximal(f1).samples.real
    mm2 = mm_maximal(f2).samples.real
    e3_measure = float(np.count_nonzero(e3)) * f1.cell_measure

    sets = _build_sets(f1, f2, ms1, sm2, mm1, mm2, e3, threshold)
    if sets.measure(sets.omega_tilde) < e3_measure / 2:
        logger.info(
            f"✅ Exceptional sets at C={threshold}: "
            f"|Ω₀|={sets.measure(sets.omega0):.4f}, "
            f"|Ω|={sets.measure(sets.omega):.4f}, "
            f"|Ω̃|={sets.measure(sets.omega_tilde):.4f}"
        )
        return sets

    suggested = None
    candidate = threshold
    for _ in range(max_doublings):
        candidate *= 2
        trial = _build_sets(f1, f2, ms1, sm2, mm1, mm2, e3, candidate)
        if trial.measure(trial.omega_tilde) < e3_measure / 2:
            suggested = candidate
            break
    logger.error(f"❌ Threshold C={threshold} too small; suggested C={suggested}")
    raise ThresholdTooSmallError(
        f"|Ω̃| = {sets.measure(sets.omega_tilde):.4f} is not below |E3|/2 = "
        f"{e3_measure / 2:.4f} at C={threshold}",
        suggested_threshold=suggested,
    )
