"""
Paraproduct calculus on periodic grids.

For a Littlewood-Paley family with projections Δ_a (a = −1 is the zero frequency)
and partial sums S_m = Σ_{j ≤ m} Δ_j, a product splits exactly as

    f·g = Π₁(f, g) + Π₂(f, g) + Π₀(f, g) + Π₃(f, g)

* Π₁ = Σ_b ((S_{b−3} f)(Δ_b g)) ∗ w_b  with w_b = S_{b+2} − S_{b−3}   (g high)
* Π₂ = Σ_a ((Δ_a f)(S_{a−3} g)) ∗ w_a                                 (f high)
* Π₀ = Σ_a ((Δ_a f)(Ť_a g)) ∗ (S_{a+4} − S_{a−3}),  Ť_a = S_{a+2} − S_{a−3}
* Π₃ = Σ_a ((Δ_a f)(Ť_a g)) ∗ S_{a−3}

The output cutoffs equal 1 on the frequency support of each product (including
wrap-around on the grid), so the reconstruction is exact up to roundoff. Each
paraproduct is recorded as per-scale profile triples (u, v, w).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import (
    GridFunction,
    LPFamily,
    dilate,
    integer_frequencies,
    lp_partition,
    make_grid_function,
    quasi_norm,
)
from biparam_paraproducts.symbols import SeparableTerm, Symbol, lattice_lookup

logger = logging.getLogger(__name__)

SLOTS = ("u", "v", "w")

# Slot that receives D^{−α} by default: the high-frequency input
DEFAULT_TARGET = {1: "v", 2: "u"}

# The dilated family starts from a Gaussian of width L/64
DILATED_MIN_N = 256


@dataclass(frozen=True)
class ScaleSlots:
    """Frequency profiles (FFT order) of the two inputs and the output at one scale."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def get(self, slot: str) -> np.ndarray:
        return getattr(self, slot)


@dataclass(frozen=True)
class ParaproductSpec:
    """A one-parameter paraproduct: type index plus per-scale profile triples."""

    type_index: int
    n_samples: int
    domain_length: float
    slots: Dict[int, ScaleSlots]
    derivative_shifts: Tuple[Tuple[str, float], ...] = ()

    @property
    def scales(self) -> List[int]:
        return sorted(self.slots)

    def slot_kind(self, slot: str, scale: int) -> str:
        """'phi' when the profile contains frequency 0, else 'psi'."""
        return "phi" if self.slots[scale].get(slot)[0] != 0 else "psi"


@dataclass(frozen=True)
class BiParaproductSpec:
    """Π_{i,j} = Π_i ⊗ Π_j: one 1D spec per axis."""

    first: ParaproductSpec
    second: ParaproductSpec

    @property
    def type_index(self) -> Tuple[int, int]:
        return self.first.type_index, self.second.type_index


AnySpec = Union[ParaproductSpec, BiParaproductSpec]


def physical_magnitude(n: int, length: float) -> np.ndarray:
    """|ξ| = 2π|k|/L on the integer lattice (FFT order)."""
    return 2 * np.pi * np.abs(integer_frequencies(n)) / length


def build_paraproduct_spec(
    type_index: int, n: int, length: float = 1.0, lp: Optional[LPFamily] = None
) -> ParaproductSpec:
    """Profile triples of Π₀, Π₁, Π₂ or Π₃ on an N-point axis."""
    if type_index not in (0, 1, 2, 3):
        raise ValidationFailure(f"paraproduct type must be 0..3, got {type_index}")
    lp = lp or lp_partition(n)
    top = lp.max_scale
    S, delta = lp.partial_sum, lp.profile
    slots: Dict[int, ScaleSlots] = {}
    for a in range(-1, top + 1):
        if type_index == 1:
            if a < 2:
                continue
            slots[a] = ScaleSlots(u=S(a - 3), v=delta(a), w=S(a + 2) - S(a - 3))
        elif type_index == 2:
            if a < 2:
                continue
            slots[a] = ScaleSlots(u=delta(a), v=S(a - 3), w=S(a + 2) - S(a - 3))
        else:
            near = S(a + 2) - S(a - 3)
            out = lp.low_pass(a - 3)
            if type_index == 0:
                out = S(a + 4) - out
            slots[a] = ScaleSlots(u=delta(a), v=near, w=out)
    return ParaproductSpec(type_index, n, length, slots)


def build_biparameter_spec(
    type_pair: Tuple[int, int], n: int, length: float = 1.0
) -> BiParaproductSpec:
    lp = lp_partition(n)
    return BiParaproductSpec(
        first=build_paraproduct_spec(type_pair[0], n, length, lp),
        second=build_paraproduct_spec(type_pair[1], n, length, lp),
    )


def _check_inputs(spec: ParaproductSpec, f: GridFunction, g: GridFunction) -> None:
    f.require_same_geometry(g)
    if f.n_samples != spec.n_samples or not math.isclose(
        f.domain_length, spec.domain_length
    ):
        raise ValidationFailure(
            f"grid geometry mismatch: spec is for N={spec.n_samples}, "
            f"L={spec.domain_length}; inputs have N={f.n_samples}, L={f.domain_length}"
        )


def paraproduct(
    spec: ParaproductSpec, f: GridFunction, g: GridFunction
) -> GridFunction:
    """Σ_k ((f ∗ u_k)·(g ∗ v_k)) ∗ w_k on a 1D grid."""
    _check_inputs(spec, f, g)
    if f.dim != 1:
        raise ValidationFailure("paraproduct acts on 1D functions; use the 2D variant")
    total = np.zeros(f.shape, dtype=complex)
    for scale in spec.scales:
        s = spec.slots[scale]
        product = f.multiply_spectrum(s.u).samples * g.multiply_spectrum(s.v).samples
        total += f.like(product).multiply_spectrum(s.w).samples
    return f.like(total)


def biparameter_paraproduct(
    spec: BiParaproductSpec, f: GridFunction, g: GridFunction
) -> GridFunction:
    """Π_i ⊗ Π_j acting on 2D functions, one paraproduct per axis."""
    _check_inputs(spec.first, f, g)
    if f.dim != 2:
        raise ValidationFailure("biparameter_paraproduct acts on 2D functions")
    total = np.zeros(f.shape, dtype=complex)
    for a in spec.first.scales:
        s1 = spec.first.slots[a]
        for b in spec.second.scales:
            s2 = spec.second.slots[b]
            fu = f.multiply_spectrum(np.outer(s1.u, s2.u)).samples
            gv = g.multiply_spectrum(np.outer(s1.v, s2.v)).samples
            total += f.like(fu * gv).multiply_spectrum(np.outer(s1.w, s2.w)).samples
    return f.like(total)


def apply_paraproduct(spec: AnySpec, f: GridFunction, g: GridFunction) -> GridFunction:
    if isinstance(spec, BiParaproductSpec):
        return biparameter_paraproduct(spec, f, g)
    return paraproduct(spec, f, g)


def homogeneous_derivative(
    f: GridFunction, alpha: float, beta: Optional[float] = None
) -> GridFunction:
    """D^α (1D) or D₁^α D₂^β (2D): spectral multiplication by |ξ|^α, |ξ₁|^α|ξ₂|^β."""
    if not alpha > 0 or (beta is not None and not beta > 0):
        raise ValidationFailure("derivative orders must be positive")
    mag = physical_magnitude(f.n_samples, f.domain_length)
    if f.dim == 1:
        if beta is not None:
            raise ValidationFailure("a 1D derivative takes a single order α")
        return f.multiply_spectrum(mag**alpha)
    if beta is None:
        raise ValidationFailure("a 2D derivative needs orders (α, β)")
    return f.multiply_spectrum(np.outer(mag**alpha, mag**beta))


def partial_derivative(f: GridFunction, order: float, axis: int) -> GridFunction:
    """D_axis^order on a 2D function."""
    if not order > 0:
        raise ValidationFailure("derivative orders must be positive")
    if f.dim != 2 or axis not in (0, 1):
        raise ValidationFailure("partial_derivative needs a 2D function and axis 0/1")
    mag = physical_magnitude(f.n_samples, f.domain_length) ** order
    return f.multiply_spectrum(LPFamily.axis_multiplier(mag, 2, axis))


def _commute_1d(spec: ParaproductSpec, alpha: float, target: str) -> ParaproductSpec:
    if target not in ("u", "v"):
        raise ValidationFailure(f"target slot must be 'u' or 'v', got '{target}'")
    for scale in spec.scales:
        if spec.slot_kind(target, scale) == "phi":
            raise ValidationFailure(
                f"cannot apply D^(-α) to a Φ-type slot ('{target}' at scale {scale})"
            )
    mag = physical_magnitude(spec.n_samples, spec.domain_length)
    nonzero = mag > 0
    inverse = np.where(nonzero, np.where(nonzero, mag, 1.0) ** (-alpha), 0.0)
    slots = {}
    for scale, s in spec.slots.items():
        shifted = replace(s, **{target: s.get(target) * inverse, "w": s.w * mag**alpha})
        slots[scale] = shifted
    return replace(
        spec,
        slots=slots,
        derivative_shifts=spec.derivative_shifts + ((target, alpha),),
    )


def commute_derivative(
    spec: AnySpec,
    alpha: float,
    beta: Optional[float] = None,
    target: Optional[str] = None,
) -> AnySpec:
    """
    Move a homogeneous derivative through a paraproduct.

    1D: the returned Π′ satisfies D^α Π(f, g) = Π′(f, D^α g) (target ``v``, the
    default for type 1) or Π′(D^α f, g) (target ``u``, the default for type 2).
    2D Π_{1,2}: D₁^α D₂^β Π(f, g) = Π′(D₂^β f, D₁^α g).
    """
    if not alpha > 0 or (beta is not None and not beta > 0):
        raise ValidationFailure("derivative orders must be positive")
    if isinstance(spec, BiParaproductSpec):
        if beta is None:
            raise ValidationFailure("bi-parameter commutation needs (α, β)")
        first_target = DEFAULT_TARGET.get(spec.first.type_index, "v")
        second_target = DEFAULT_TARGET.get(spec.second.type_index, "u")
        return BiParaproductSpec(
            first=_commute_1d(spec.first, alpha, first_target),
            second=_commute_1d(spec.second, beta, second_target),
        )
    if beta is not None:
        raise ValidationFailure("one-parameter commutation takes a single order α")
    if target is None:
        if spec.type_index not in DEFAULT_TARGET:
            raise ValidationFailure(
                f"type {spec.type_index} has no default Ψ-type input slot; pass target"
            )
        target = DEFAULT_TARGET[spec.type_index]
    return _commute_1d(spec, alpha, target)


def induced_symbol(spec: AnySpec) -> Symbol:
    """m(ξ₁, ξ₂) = Σ_k u_k(ξ₁)·v_k(ξ₂)·w_k(ξ₁ + ξ₂), with w read modulo N."""
    if isinstance(spec, BiParaproductSpec):
        m_first = induced_symbol(spec.first)
        m_second = induced_symbol(spec.second)

        def _tensor(freqs: np.ndarray) -> np.ndarray:
            return m_first(freqs[..., 0:1]) * m_second(freqs[..., 1:2])

        return Symbol(
            name=f"paraproduct_{spec.type_index[0]}{spec.type_index[1]}",
            arity=2,
            freq_dim=2,
            evaluator=_tensor,
            sup_bound=m_first.sup_bound * m_second.sup_bound,
        )

    length = spec.domain_length
    terms = tuple(
        SeparableTerm(
            arg_factors=(lattice_lookup(s.u, length), lattice_lookup(s.v, length)),
            output_factor=lattice_lookup(s.w, length),
        )
        for s in (spec.slots[k] for k in spec.scales)
    )

    def _evaluate(freqs: np.ndarray) -> np.ndarray:
        total = np.zeros(freqs.shape[:-2], dtype=complex)
        for term in terms:
            xi, eta = freqs[..., 0, :], freqs[..., 1, :]
            total += (
                term.arg_factors[0](xi)
                * term.arg_factors[1](eta)
                * term.output_factor(xi + eta)
            )
        return total

    bound = sum(
        float(np.max(np.abs(s.u)) * np.max(np.abs(s.v)) * np.max(np.abs(s.w)))
        for s in spec.slots.values()
    )
    return Symbol(
        name=f"paraproduct_{spec.type_index}",
        arity=2,
        freq_dim=1,
        evaluator=_evaluate,
        sup_bound=bound,
        terms=terms,
    )


def product_decomposition(
    f: GridFunction, g: GridFunction
) -> Dict[Union[int, Tuple[int, int]], GridFunction]:
    """All Π_j(f, g) (1D) or Π_{i,j}(f, g) (2D), keyed by type index."""
    lp = lp_partition(f.n_samples)
    specs = {
        j: build_paraproduct_spec(j, f.n_samples, f.domain_length, lp) for j in range(4)
    }
    if f.dim == 1:
        return {j: paraproduct(spec, f, g) for j, spec in specs.items()}
    return {
        (i, j): biparameter_paraproduct(BiParaproductSpec(specs[i], specs[j]), f, g)
        for i in range(4)
        for j in range(4)
    }


# ---------------------------------------------------------------------------
# Kato-Ponce harness
# ---------------------------------------------------------------------------

KATO_PONCE_HEADER = [
    "family_member_id",
    "lhs",
    "rhs_term_1",
    "rhs_term_2",
    "rhs_term_3",
    "rhs_term_4",
    "ratio",
]


@dataclass
class KatoPonceRow:
    member_id: str
    lhs: float
    rhs_terms: List[float]

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms))

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return math.inf if self.lhs > 0 else 0.0

    def as_row(self) -> List[object]:
        terms = self.rhs_terms + [0.0] * (4 - len(self.rhs_terms))
        return [self.member_id, self.lhs, *terms, self.ratio]


@dataclass
class KatoPonceReport:
    alpha: float
    beta: Optional[float]
    r: float
    term_exponents: List[Tuple[float, float]]
    rows: List[KatoPonceRow] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max((row.ratio for row in self.rows), default=0.0)

    def table(self) -> List[List[object]]:
        return [row.as_row() for row in self.rows]


def validate_holder(p: float, q: float, r: float) -> None:
    """1 < p, q ≤ ∞, 0 < r < ∞ and 1/r = 1/p + 1/q."""
    if not (p > 1 and q > 1):
        raise ValidationFailure(f"exponents must satisfy 1 < p, q ≤ ∞ (p={p}, q={q})")
    if not (0 < r < math.inf):
        raise ValidationFailure(f"r must satisfy 0 < r < ∞ (r={r})")
    if not math.isclose(1 / r, 1 / p + 1 / q, rel_tol=1e-9, abs_tol=1e-12):
        raise ValidationFailure(
            f"Hölder relation 1/r = 1/p + 1/q violated (p={p}, q={q}, r={r})"
        )


def kato_ponce_report(
    family: Sequence[Tuple[str, GridFunction, GridFunction]],
    exponents: Union[Tuple[float, float, float], Sequence[Tuple[float, float]]],
    alpha: float,
    beta: Optional[float] = None,
    r: Optional[float] = None,
) -> KatoPonceReport:
    """
    Ratios LHS/RHS of the fractional Leibniz inequality over a family of pairs.

    1D: ‖D^α(fg)‖_r against ‖D^α f‖_{p₁}‖g‖_{q₁} + ‖f‖_{p₂}‖D^α g‖_{q₂}.
    2D: ‖D₁^αD₂^β(fg)‖_r against the four terms
    ‖D₁^αD₂^β f‖‖g‖ + ‖f‖‖D₁^αD₂^β g‖ + ‖D₁^α f‖‖D₂^β g‖ + ‖D₁^α g‖‖D₂^β f‖.

    ``exponents`` is either (p, q, r), used for every term, or one (p_j, q_j) per
    term together with ``r``.
    """
    if not family:
        raise ValidationFailure("Kato-Ponce family is empty")
    dim = family[0][1].dim
    n_terms = 2 if dim == 1 else 4
    first = list(exponents)
    if len(first) == 3 and not isinstance(first[0], (tuple, list)):
        p, q, r_value = (float(v) for v in first)  # type: ignore[arg-type]
        pairs = [(p, q)] * n_terms
    else:
        if r is None:
            raise ValidationFailure("per-term exponents need r")
        r_value = float(r)
        pairs = [(float(a), float(b)) for a, b in first]  # type: ignore[misc]
        if len(pairs) != n_terms:
            raise ValidationFailure(
                f"expected {n_terms} exponent pairs, got {len(pairs)}"
            )
    for p_j, q_j in pairs:
        validate_holder(p_j, q_j, r_value)
    if dim == 2 and beta is None:
        raise ValidationFailure("2D Kato-Ponce needs β")

    report = KatoPonceReport(alpha, beta, r_value, pairs)
    for member_id, f, g in family:
        f.require_same_geometry(g)
        if dim == 1:
            lhs = quasi_norm(homogeneous_derivative(f * g, alpha), r_value)
            df, dg = homogeneous_derivative(f, alpha), homogeneous_derivative(g, alpha)
            (p1, q1), (p2, q2) = pairs
            terms = [
                quasi_norm(df, p1) * quasi_norm(g, q1),
                quasi_norm(f, p2) * quasi_norm(dg, q2),
            ]
        else:
            assert beta is not None
            lhs = quasi_norm(homogeneous_derivative(f * g, alpha, beta), r_value)
            dfg = [homogeneous_derivative(h, alpha, beta) for h in (f, g)]
            d1f, d1g = (partial_derivative(h, alpha, 0) for h in (f, g))
            d2f, d2g = (partial_derivative(h, beta, 1) for h in (f, g))
            (p1, q1), (p2, q2), (p3, q3), (p4, q4) = pairs
            terms = [
                quasi_norm(dfg[0], p1) * quasi_norm(g, q1),
                quasi_norm(f, p2) * quasi_norm(dfg[1], q2),
                quasi_norm(d1f, p3) * quasi_norm(d2g, q3),
                quasi_norm(d1g, p4) * quasi_norm(d2f, q4),
            ]
        row = KatoPonceRow(member_id, lhs, terms)
        report.rows.append(row)
        logger.info(f"🔍 Kato-Ponce {member_id}: lhs={lhs:.4e} ratio={row.ratio:.4e}")
    logger.info(
        f"✅ Kato-Ponce max ratio {report.max_ratio:.4e} over {len(family)} pairs"
    )
    return report


def kato_ponce_family(
    kind: str,
    n: int,
    length: float = 1.0,
    dim: int = 1,
    seed: int = 0,
    count: int = 4,
) -> List[Tuple[str, GridFunction, GridFunction]]:
    """Standard input families: ``gaussian``, ``random`` or ``dilated``."""
    if kind == "gaussian":
        widths = [length / 32 * 2**i for i in range(count)]
        return [
            (
                f"gaussian_w{w:g}",
                make_grid_function(dim, n, length, "gaussian", width=w),
                make_grid_function(
                    dim, n, length, "gaussian", width=w, center=length / 2 + w / 2
                ),
            )
            for w in widths
        ]
    if kind == "random":
        return [
            (
                f"random_s{seed + i}",
                make_grid_function(
                    dim, n, length, "band_limited_random", seed=seed + 2 * i, real=True
                ),
                make_grid_function(
                    dim,
                    n,
                    length,
                    "band_limited_random",
                    seed=seed + 2 * i + 1,
                    real=True,
                ),
            )
            for i in range(count)
        ]
    if kind == "dilated":
        if n < DILATED_MIN_N:
            raise ValidationFailure(
                f"the dilated family needs N ≥ {DILATED_MIN_N} to resolve its "
                f"narrowest Gaussian, got N={n}"
            )
        width = length / 64
        f = make_grid_function(dim, n, length, "gaussian", width=width)
        g = make_grid_function(
            dim, n, length, "gaussian", width=width, center=length / 2 + width / 2
        )
        return [
            (f"dilated_l{lam}", dilate(f, lam), dilate(g, lam)) for lam in (1, 2, 4)
        ]
    raise ValidationFailure(f"unknown Kato-Ponce family '{kind}'")
