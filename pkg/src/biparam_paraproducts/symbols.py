"""
Multiplier symbols m(ξ, η, ...) and their verification.

A symbol evaluator takes physical frequencies of shape ``(..., arity, dim)``:
``freqs[..., i, 0]`` is the first-axis frequency of argument i and
``freqs[..., i, 1]`` its second-axis frequency. The two frequency *planes* of a
bi-parameter symbol are ``first`` = (ξ_f, ξ_g) (first-axis frequencies of both
arguments) and ``second`` = (η_f, η_g).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import radial_cutoff, smooth_step

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]
Factor = Callable[[np.ndarray], np.ndarray]

SYMBOL_NAMES = (
    "identity",
    "one_param_cm_demo",
    "two_param_tensor",
    "cone_restricted",
    "sgn_sgn",
    "derivative_sum",
    "sgn_difference",
    "random_bounded",
    "sampled",
)


@dataclass(frozen=True)
class SeparableTerm:
    """One term u(ξ)·v(η)·w(ξ+η) of a separable symbol."""

    arg_factors: Tuple[Factor, ...]
    output_factor: Factor


@dataclass(frozen=True)
class Symbol:
    """A frequency-domain multiplier of declared arity and per-argument dimension."""

    name: str
    arity: int
    freq_dim: int
    evaluator: Evaluator
    sup_bound: float
    params: Dict[str, Any] = field(default_factory=dict)
    terms: Optional[Tuple[SeparableTerm, ...]] = None
    # depends on the frequencies only through their sum ξ₁ + ... + ξ_n
    sum_only: bool = False

    def __call__(self, freqs: np.ndarray) -> np.ndarray:
        freqs = np.asarray(freqs, dtype=float)
        if freqs.shape[-2:] != (self.arity, self.freq_dim):
            raise ValidationFailure(
                f"symbol '{self.name}' expects frequencies of shape "
                f"(..., {self.arity}, {self.freq_dim}), got {freqs.shape}"
            )
        return self.evaluator(freqs)

    @property
    def is_separable(self) -> bool:
        return self.terms is not None


def _ones(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape[:-1])


def _sgn(x: np.ndarray) -> np.ndarray:
    return np.sign(x)


def cm_demo(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """ab/(a² + b²), homogeneous of degree 0, set to 0 at the origin."""
    den = a * a + b * b
    return np.where(den > 0, a * b / np.where(den > 0, den, 1.0), 0.0)


def lattice_lookup(table: np.ndarray, length: float) -> Factor:
    """Factor reading an FFT-ordered table at physical frequencies (wrapped mod N)."""
    n = table.shape[0]

    def _lookup(freq: np.ndarray) -> np.ndarray:
        idx = np.mod(np.rint(np.asarray(freq) * length).astype(np.int64), n)
        return table[tuple(idx[..., a] for a in range(idx.shape[-1]))]

    return _lookup


@dataclass(frozen=True)
class ConeCutoff:
    """Smooth double-cone cutoff in one frequency plane, a function of angle only."""

    plane: str
    index: int
    n_cones: int

    @property
    def center(self) -> float:
        return math.pi * self.index / self.n_cones

    def angle_values(self, angle: np.ndarray) -> np.ndarray:
        spacing = math.pi / self.n_cones
        raw = []
        for c in range(self.n_cones):
            d = np.mod(angle - math.pi * c / self.n_cones + math.pi / 2, math.pi)
            d = d - math.pi / 2
            raw.append(smooth_step(3.0 * np.abs(d) / spacing - 1.0))
        return raw[self.index] / sum(raw)

    def __call__(self, freqs: np.ndarray) -> np.ndarray:
        a, b = plane_coordinates(freqs, self.plane)
        return self.angle_values(np.arctan2(b, a))


def plane_coordinates(freqs: np.ndarray, plane: str) -> Tuple[np.ndarray, np.ndarray]:
    """(f-frequency, g-frequency) of one plane of a bilinear 2D symbol."""
    axis = {"first": 0, "second": 1}.get(plane)
    if axis is None:
        raise ValidationFailure(f"plane must be 'first' or 'second', got '{plane}'")
    if freqs.shape[-1] == 1:
        axis = 0
    return freqs[..., 0, axis], freqs[..., 1, axis]


def cone_partition(plane: str, n_cones: int = 4) -> List[ConeCutoff]:
    """Partition of unity of a frequency plane (minus the origin) by double cones."""
    if plane not in ("first", "second"):
        raise ValidationFailure(f"plane must be 'first' or 'second', got '{plane}'")
    if n_cones < 2 or n_cones % 2:
        raise ValidationFailure("n_cones must be an even integer ≥ 2")
    return [ConeCutoff(plane=plane, index=i, n_cones=n_cones) for i in range(n_cones)]


def spine_cone(plane: str, n_cones: int = 4) -> ConeCutoff:
    """C′ (first plane, spine on the g axis) or C″ (second plane, f axis)."""
    cones = cone_partition(plane, n_cones)
    return cones[n_cones // 2] if plane == "first" else cones[0]


def build_symbol(name: str, **params: Any) -> Symbol:
    """Construct a named symbol; every symbol accepts a ``scale`` factor."""
    scale = complex(params.get("scale", 1.0))
    if name not in SYMBOL_NAMES:
        raise ValidationFailure(
            f"unknown symbol '{name}' (expected one of {', '.join(SYMBOL_NAMES)})"
        )

    def _scaled(fn: Evaluator) -> Evaluator:
        if scale == 1:
            return fn
        return lambda freqs: scale * fn(freqs)

    if name == "identity":
        arity = int(params.get("arity", 2))
        dim = int(params.get("dim", 1))
        term = SeparableTerm(
            arg_factors=tuple(_ones for _ in range(arity)),
            output_factor=lambda x: scale * np.ones(x.shape[:-1]),
        )
        return Symbol(
            name,
            arity,
            dim,
            _scaled(lambda f: np.ones(f.shape[:-2])),
            abs(scale),
            params,
            (term,),
            sum_only=True,
        )

    if name == "derivative_sum":
        arity = int(params.get("arity", 2))
        dim = int(params.get("dim", 1))
        axis = int(params.get("axis", 0))
        if axis >= dim:
            raise ValidationFailure(f"axis {axis} out of range for dim {dim}")
        term = SeparableTerm(
            arg_factors=tuple(_ones for _ in range(arity)),
            output_factor=lambda x: scale * 2j * np.pi * x[..., axis],
        )
        evaluator = _scaled(lambda f: 2j * np.pi * f[..., axis].sum(axis=-1))
        return Symbol(
            name, arity, dim, evaluator, math.inf, params, (term,), sum_only=True
        )

    if name == "one_param_cm_demo":
        evaluator = _scaled(lambda f: cm_demo(f[..., 0, 0], f[..., 1, 0]))
        return Symbol(name, 2, 1, evaluator, 0.5 * abs(scale), params)

    if name == "sgn_difference":
        evaluator = _scaled(lambda f: _sgn(f[..., 0, 0] - f[..., 1, 0]))
        return Symbol(name, 2, 1, evaluator, abs(scale), params)

    if name == "two_param_tensor":

        def _tensor(f: np.ndarray) -> np.ndarray:
            first = cm_demo(f[..., 0, 0], f[..., 1, 0])
            return first * cm_demo(f[..., 0, 1], f[..., 1, 1])

        return Symbol(name, 2, 2, _scaled(_tensor), 0.25 * abs(scale), params)

    if name == "sgn_sgn":

        def _sgn_sgn(f: np.ndarray) -> np.ndarray:
            return _sgn(f[..., 0, 0] - f[..., 1, 0]) * _sgn(f[..., 0, 1] - f[..., 1, 1])

        return Symbol(name, 2, 2, _scaled(_sgn_sgn), abs(scale), params)

    if name == "cone_restricted":
        base_name = params.get("base", "two_param_tensor")
        if base_name == "cone_restricted":
            raise ValidationFailure("cone_restricted cannot wrap itself")
        base = build_symbol(base_name, arity=2, dim=2)
        if (base.arity, base.freq_dim) != (2, 2):
            raise ValidationFailure("cone_restricted needs a bilinear 2D base symbol")
        n_cones = int(params.get("n_cones", 4))
        c_first = spine_cone("first", n_cones)
        c_second = spine_cone("second", n_cones)
        evaluator = _scaled(lambda f: base(f) * c_first(f) * c_second(f))
        return Symbol(name, 2, 2, evaluator, base.sup_bound * abs(scale), params)

    if name == "random_bounded":
        arity = int(params.get("arity", 2))
        dim = int(params.get("dim", 1))
        n = int(params.get("n", 16))
        length = float(params.get("length", 1.0))
        rng = np.random.default_rng(params.get("seed", 0))
        shape = (n,) * (arity * dim)
        table = rng.uniform(-1, 1, shape) + 1j * rng.uniform(-1, 1, shape)
        table /= max(1.0, float(np.max(np.abs(table))))
        lookup = lattice_lookup(table, length)
        evaluator = _scaled(
            lambda f: lookup(f.reshape(f.shape[:-2] + (arity * dim,)))
        )
        return Symbol(name, arity, dim, evaluator, abs(scale), params)

    # sampled: bilinear 1D table stored as a 2D BPGF grid
    from biparam_paraproducts.artifacts import artifact_store

    table_fn = artifact_store.load_grid(Path(params["path"]))
    if table_fn.dim != 2:
        raise ValidationFailure("sampled symbols need a 2D BPGF table (bilinear, 1D)")
    table = table_fn.samples
    lookup = lattice_lookup(table, table_fn.domain_length)
    evaluator = _scaled(lambda f: lookup(f.reshape(f.shape[:-2] + (2,))))
    return Symbol(
        name, 2, 1, evaluator, float(np.max(np.abs(table))) * abs(scale), params
    )


@dataclass
class DecayReport:
    """Per multi-index sup of weighted finite-difference derivatives."""

    symbol_name: str
    mode: str
    orders_tested: List[Tuple[int, ...]]
    worst_constant: List[float]
    thresholds: List[float]
    passes: List[bool]

    @property
    def all_pass(self) -> bool:
        return all(self.passes)

    def rows(self) -> List[Tuple[str, float, bool]]:
        return [
            ("-".join(str(a) for a in order), const, ok)
            for order, const, ok in zip(
                self.orders_tested, self.worst_constant, self.passes
            )
        ]


def _to_freqs(points: np.ndarray, mode: str) -> np.ndarray:
    """Map variable vectors to the (..., arity, dim) frequency layout."""
    if mode == "one_param":
        return points.reshape(points.shape[:-1] + (2, 1))
    # variables (ξ_f, ξ_g, η_f, η_g)
    out = np.empty(points.shape[:-1] + (2, 2))
    out[..., 0, 0] = points[..., 0]
    out[..., 1, 0] = points[..., 1]
    out[..., 0, 1] = points[..., 2]
    out[..., 1, 1] = points[..., 3]
    return out


def _polar_samples(radii: Sequence[float], n_angles: int) -> np.ndarray:
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    r, a = np.meshgrid(np.asarray(radii, dtype=float), angles, indexing="ij")
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1).reshape(-1, 2)


def _difference(
    fn: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    order: Tuple[int, ...],
    h: float,
) -> np.ndarray:
    """Nested second-order central differences for the multi-index ``order``."""
    nonzero = [i for i, a in enumerate(order) if a > 0]
    if not nonzero:
        return fn(points)
    i = nonzero[0]
    lowered = list(order)
    lowered[i] -= 1
    step = np.zeros(points.shape[-1])
    step[i] = h
    forward = _difference(fn, points + step, tuple(lowered), h)
    backward = _difference(fn, points - step, tuple(lowered), h)
    return (forward - backward) / (2 * h)


def verify_decay(
    m: Symbol,
    mode: str = "one_param",
    max_order: int = 2,
    step: Optional[float] = None,
    exclusion_radius: float = 1.0,
    n_angles: int = 32,
    radius_levels: int = 6,
    threshold: float = 10.0,
) -> DecayReport:
    """
    Finite-difference check of the Mihlin-type decay conditions.

    one_param: sup |∂^β m(γ)|·|γ|^{|β|} over a polar sample set of the (ξ, η) plane.
    two_param: sup |∂^α_ξ ∂^β_η m|·|(ξ₁,η₁)|^{α₁+β₁}·|(ξ₂,η₂)|^{α₂+β₂}, sampling both
    planes. Points closer than ``exclusion_radius`` to the singular set are skipped.
    Derivatives use central differences refined once by Richardson extrapolation.
    Order β passes when its constant is at most ``threshold·4^{|β|}``.
    """
    if mode not in ("one_param", "two_param"):
        raise ValidationFailure(f"mode must be one_param or two_param, got '{mode}'")
    if mode == "one_param" and (m.arity, m.freq_dim) != (2, 1):
        raise ValidationFailure("one_param mode needs a bilinear 1D symbol")
    if mode == "two_param" and (m.arity, m.freq_dim) != (2, 2):
        raise ValidationFailure("two_param mode needs a bilinear 2D symbol")
    if n_angles % 8:
        raise ValidationFailure("n_angles must be a multiple of 8")
    h = exclusion_radius / 8 if step is None else float(step)
    if 2 * max_order * h > exclusion_radius:
        raise ValidationFailure(
            f"refinement insufficient: stencil reach {2 * max_order * h:.3g} exceeds "
            f"the exclusion radius {exclusion_radius:.3g}"
        )
    radii = exclusion_radius * 2.0 ** np.arange(radius_levels)

    if mode == "one_param":
        points = _polar_samples(radii, n_angles)
        n_vars = 2
    else:
        plane = _polar_samples(radii[: max(2, radius_levels // 2)], n_angles // 2)
        first = np.repeat(plane, len(plane), axis=0)
        second = np.tile(plane, (len(plane), 1))
        points = np.concatenate(
            [first[:, :1], first[:, 1:], second[:, :1], second[:, 1:]], axis=1
        )
        n_vars = 4

    def fn(x: np.ndarray) -> np.ndarray:
        return np.asarray(m(_to_freqs(x, mode)))

    orders, constants, limits, passes = [], [], [], []
    for order in itertools.product(range(max_order + 1), repeat=n_vars):
        coarse = _difference(fn, points, order, h)
        fine = _difference(fn, points, order, h / 2)
        derivative = (4 * fine - coarse) / 3
        if mode == "one_param":
            weight = np.hypot(points[:, 0], points[:, 1]) ** sum(order)
        else:
            weight = np.hypot(points[:, 0], points[:, 1]) ** (order[0] + order[1])
            second_radius = np.hypot(points[:, 2], points[:, 3])
            weight = weight * second_radius ** (order[2] + order[3])
        constant = float(np.max(np.abs(derivative) * weight))
        limit = threshold * 4.0 ** sum(order)
        orders.append(order)
        constants.append(constant)
        limits.append(limit)
        passes.append(constant <= limit)

    report = DecayReport(m.name, mode, orders, constants, limits, passes)
    status = "✅" if report.all_pass else "❌"
    logger.info(
        f"{status} Decay check for '{m.name}' ({mode}, orders ≤ {max_order}): "
        f"worst constant {max(constants):.3e}"
    )
    return report


def _bump(t: np.ndarray) -> np.ndarray:
    """exp(−1/(1 − t²)) on (−1, 1), zero outside."""
    inside = np.abs(t) < 1
    safe = np.where(inside, 1 - t * t, 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


def low_bump(a: np.ndarray) -> np.ndarray:
    """Low-frequency cutoff supported in [−1/4, 1/4]."""
    return _bump(4.0 * np.asarray(a))


def annular_bump(b: np.ndarray) -> np.ndarray:
    """High-frequency cutoff supported in 1/2 ≤ |b| ≤ 2."""
    r = np.abs(np.asarray(b))
    return radial_cutoff(r) - radial_cutoff(2 * r)


@dataclass
class LocalizedDecayProfile:
    """Weighted Fourier coefficients of one rescaled cutoff piece of a symbol."""

    k_first: int
    k_second: int
    decay_m: int
    coefficients: np.ndarray
    weighted_sup: float
    underflow: bool

    def rows(self, limit: int = 8) -> List[Tuple[int, int, int, int, float]]:
        """Coefficient magnitudes for lattice shifts with |n_i| ≤ limit."""
        g = self.coefficients.shape[0]
        lattice = np.rint(np.fft.fftfreq(g, d=1.0 / g)).astype(int)
        out = []
        for idx in itertools.product(range(g), repeat=4):
            n = tuple(int(lattice[i]) for i in idx)
            if max(abs(v) for v in n) <= limit:
                out.append(n + (float(abs(self.coefficients[idx])),))
        return out


def localized_decay_profile(
    m: Symbol, k_first: int, k_second: int, decay_m: int = 4, grid_points: int = 32
) -> LocalizedDecayProfile:
    """
    Sup over lattice shifts n of |c_n|·(1+|n′|)^M·(1+|n″|)^M for the piece
    m(2^{k′}a, 2^{k′}b; 2^{k″}c, 2^{k″}d)·φ̂(a)ψ̂(b)ψ̂(c)φ̂(d).

    In the first plane f carries the low cutoff and g the annular one; in the second
    plane the roles swap. φ variables are sampled on [−1/4, 1/4], ψ variables on
    [−2, 2], and c_n are the normalised DFT coefficients of the 4D sample box.
    """
    if (m.arity, m.freq_dim) != (2, 2):
        raise ValidationFailure("localized_decay_profile needs a bilinear 2D symbol")
    if not -60 <= k_first <= 60 or not -60 <= k_second <= 60:
        raise ValidationFailure("scales out of the representable range")
    g = int(grid_points)
    low = np.linspace(-0.25, 0.25, g, endpoint=False)
    high = np.linspace(-2.0, 2.0, g, endpoint=False)
    a, b, c, d = np.meshgrid(low, high, high, low, indexing="ij")
    freqs = np.empty(a.shape + (2, 2))
    freqs[..., 0, 0] = 2.0**k_first * a
    freqs[..., 1, 0] = 2.0**k_first * b
    freqs[..., 0, 1] = 2.0**k_second * c
    freqs[..., 1, 1] = 2.0**k_second * d
    piece = m(freqs) * low_bump(a) * annular_bump(b) * annular_bump(c) * low_bump(d)
    coefficients = np.fft.fftn(piece) / g**4

    lattice = np.abs(np.fft.fftfreq(g, d=1.0 / g))
    n0, n1, n2, n3 = np.meshgrid(lattice, lattice, lattice, lattice, indexing="ij")
    log_weight = decay_m * (np.log1p(np.hypot(n0, n1)) + np.log1p(np.hypot(n2, n3)))
    magnitude = np.abs(coefficients)
    nonzero = magnitude > 0
    with np.errstate(divide="ignore"):
        log_value = np.where(
            nonzero, np.log(np.where(nonzero, magnitude, 1.0)), -np.inf
        )
    log_weighted = log_value + log_weight
    peak = float(np.max(log_weighted)) if np.any(nonzero) else -math.inf
    tiny = np.finfo(float).tiny
    underflow = bool(
        peak > np.log(np.finfo(float).max)
        or np.any(nonzero & (magnitude < tiny))
    )
    weighted_sup = 0.0 if peak == -math.inf else float(np.exp(min(peak, 709.0)))
    if underflow:
        logger.warning(
            f"⚠️  Localized profile at M={decay_m} leaves the floating-point range"
        )
    return LocalizedDecayProfile(
        k_first, k_second, decay_m, coefficients, weighted_sup, underflow
    )
