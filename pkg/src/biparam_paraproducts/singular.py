"""
Singular bilinear and trilinear operators and the log-divergence of the chirp examples.

    B(f, g)(x)      = PV∫ f(x − t) g(x + t) dt/t
    B_d(f, g)(x, y) = PV∫∫ f(x − t₁, y − t₂) g(x + t₁, y + t₂) dt₁/t₁ dt₂/t₂
    V₂(f, g, h)(x)  = PV∫∫ f(x − t₁) g(x − t₁ − t₂) h(x − t₂) dt₁/t₁ dt₂/t₂

On the truncated chirps e^{ixy}·1_{[−N,N]²} the double transform collapses to
4i·e^{2ixy}·Φ(2ab) with a = N − |x|, b = N − |y| and Φ(T) = ∫₀^T Si(u)/u du, which
grows like (π/2)·ln T.
"""

import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, signal, special, stats

from biparam_paraproducts.errors import ToleranceFailure, ValidationFailure
from biparam_paraproducts.grid import GridFunction, evaluate_at, integer_frequencies
from biparam_paraproducts.multipliers import apply_multiplier, make_operator
from biparam_paraproducts.symbols import build_symbol

logger = logging.getLogger(__name__)

KERNELS = ("line", "periodic")
OPERATORS = ("bd", "v2", "control", "sine")

# Φ switches from direct quadrature to its large-T expansion here
PHI_CROSSOVER = 200.0
PHI_TOLERANCE = 1e-10

DEFAULT_POINTS_PER_WAVE = 16
GAUSS_NODES = 16

Function1D = Callable[[np.ndarray], np.ndarray]
Function2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PVQuadrature:
    """Symmetric midpoint rule ±(j + 1/2)h, j < count, for PV∫ F(t) K(t) dt."""

    step: float
    count: int
    kernel: str = "line"
    period: Optional[float] = None

    def __post_init__(self) -> None:
        if self.step <= 0 or self.count < 1:
            raise ValidationFailure("quadrature needs a positive step and node count")
        if self.kernel not in KERNELS:
            raise ValidationFailure(
                f"kernel must be one of {KERNELS}, got '{self.kernel}'"
            )
        if self.kernel == "periodic":
            if self.period is None or self.period <= 0:
                raise ValidationFailure("periodic kernel needs a positive period")
            if not math.isclose(self.step * self.count, self.period / 2):
                raise ValidationFailure(
                    "periodic nodes must cover exactly half a period"
                )

    @classmethod
    def line(cls, t_max: float, count: int) -> "PVQuadrature":
        return cls(step=t_max / count, count=count, kernel="line")

    @classmethod
    def periodic(cls, period: float, count: int) -> "PVQuadrature":
        return cls(
            step=period / (2 * count), count=count, kernel="periodic", period=period
        )

    @property
    def t_max(self) -> float:
        return self.step * self.count

    @property
    def nodes(self) -> np.ndarray:
        """Positive half of the node set."""
        return (np.arange(self.count) + 0.5) * self.step

    @property
    def weights(self) -> np.ndarray:
        t = self.nodes
        if self.kernel == "line":
            return self.step / t
        assert self.period is not None
        return self.step * (np.pi / self.period) / np.tan(np.pi * t / self.period)

    def integrate(self, integrand: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """
        Σ_j w_j (F(t_j) − F(−t_j)).

        F maps an array of nodes to values along the last axis.
        """
        t = self.nodes
        return np.sum(self.weights * (integrand(t) - integrand(-t)), axis=-1)


def _as_callable_1d(f: Union[GridFunction, Function1D]) -> Function1D:
    if isinstance(f, GridFunction):
        if f.dim != 1:
            raise ValidationFailure("expected a 1D grid function")
        return lambda x: evaluate_at(f, x)
    return f


def grid_interpolator(f: GridFunction) -> Function2D:
    """Exact trigonometric interpolation of a 2D grid function at scattered points."""
    if f.dim != 2:
        raise ValidationFailure("expected a 2D grid function")
    n = f.n_samples
    coeffs = np.fft.fft2(f.samples) / n**2
    k = integer_frequencies(n)
    omega = 2 * np.pi / f.domain_length
    nyquist = k == -(n // 2)

    def _phases(x: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * omega * np.outer(x, k))
        phase[:, nyquist] = np.cos(omega * np.outer(x, -k[nyquist]))
        return phase

    def _evaluate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.broadcast_arrays(
            np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        )
        ex, ey = _phases(x.ravel()), _phases(y.ravel())
        return np.sum((ex @ coeffs) * ey, axis=1).reshape(x.shape)

    return _evaluate


def _as_callable_2d(f: Union[GridFunction, Function2D]) -> Function2D:
    return grid_interpolator(f) if isinstance(f, GridFunction) else f


def bht_eval(
    f: Union[GridFunction, Function1D],
    g: Union[GridFunction, Function1D],
    x_points: np.ndarray,
    quad: PVQuadrature,
    wrap: bool = True,
) -> np.ndarray:
    """B(f, g) at the given points by symmetric PV quadrature."""
    x = np.asarray(x_points, dtype=float)
    if not wrap and isinstance(f, GridFunction):
        lo, hi = float(np.min(x)) - quad.t_max, float(np.max(x)) + quad.t_max
        if lo < 0 or hi >= f.domain_length:
            raise ValidationFailure(
                f"nodes reach [{lo:.4g}, {hi:.4g}] outside [0, {f.domain_length}) "
                "and wraparound is disabled"
            )
    ff, gg = _as_callable_1d(f), _as_callable_1d(g)
    flat = x.ravel()[:, None]

    def _integrand(t: np.ndarray) -> np.ndarray:
        return ff(flat - t) * gg(flat + t)

    return quad.integrate(_integrand).reshape(x.shape)


def double_bht_eval(
    f: Union[GridFunction, Function2D],
    g: Union[GridFunction, Function2D],
    xy_points: np.ndarray,
    quad: PVQuadrature,
    second: Optional[PVQuadrature] = None,
) -> np.ndarray:
    """B_d(f, g) at points of shape (P, 2) by tensor PV quadrature."""
    points = np.atleast_2d(np.asarray(xy_points, dtype=float))
    if points.shape[-1] != 2:
        raise ValidationFailure("double_bht_eval expects points of shape (P, 2)")
    second = second or quad
    ff, gg = _as_callable_2d(f), _as_callable_2d(g)
    t1, t2 = quad.nodes[:, None], second.nodes[None, :]
    weights = quad.weights[:, None] * second.weights[None, :]
    out = np.empty(points.shape[0], dtype=complex)
    for idx, (x, y) in enumerate(points):
        total = np.zeros(weights.shape, dtype=complex)
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                left = ff(x - s1 * t1, y - s2 * t2)
                total += s1 * s2 * left * gg(x + s1 * t1, y + s2 * t2)
        out[idx] = np.sum(weights * total)
    return out


def v2_eval(
    f1: Function1D,
    f2: Function1D,
    f3: Function1D,
    x_points: np.ndarray,
    quad: PVQuadrature,
) -> np.ndarray:
    """V₂(f₁, f₂, f₃) by tensor PV quadrature."""
    x = np.atleast_1d(np.asarray(x_points, dtype=float))
    t1, t2 = quad.nodes[:, None], quad.nodes[None, :]
    weights = quad.weights[:, None] * quad.weights[None, :]
    out = np.empty(x.shape, dtype=complex)
    for idx, xv in enumerate(x):
        total = np.zeros(weights.shape, dtype=complex)
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                a, b = s1 * t1, s2 * t2
                total += s1 * s2 * f1(xv - a) * f2(xv - a - b) * f3(xv - b)
        out[idx] = np.sum(weights * total)
    return out


def bht_spectral(f: GridFunction, g: GridFunction) -> GridFunction:
    """B(f, g) as the multiplier iπ·sgn(η − ξ)."""
    symbol = build_symbol("sgn_difference", scale=-1j * np.pi)
    return apply_multiplier(make_operator(symbol), f, g)


def double_bht_spectral(f: GridFunction, g: GridFunction) -> GridFunction:
    """B_d(f, g) as the multiplier −π²·sgn(η₁ − ξ₁)·sgn(η₂ − ξ₂)."""
    symbol = build_symbol("sgn_sgn", scale=-(np.pi**2))
    return apply_multiplier(make_operator(symbol), f, g)


# ---------------------------------------------------------------------------
# Chirps
# ---------------------------------------------------------------------------


def chirp_2d(n: float) -> Function2D:
    """e^{ixy}·1_{[−N,N]²}(x, y)."""

    def _chirp(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        inside = (np.abs(x) <= n) & (np.abs(y) <= n)
        return np.where(inside, np.exp(1j * x * y), 0.0)

    return _chirp


def chirp_1d(n: float, sign: int = 1) -> Function1D:
    """e^{±ix²}·1_{[−N,N]}(x)."""

    def _chirp(x: np.ndarray) -> np.ndarray:
        return np.where(np.abs(x) <= n, np.exp(sign * 1j * x * x), 0.0)

    return _chirp


def chirp_phase_residual(x: np.ndarray, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """(x − t₁)² − (x − t₁ − t₂)² + (x − t₂)² − (x² − 2t₁t₂)."""
    return (x - t1) ** 2 - (x - t1 - t2) ** 2 + (x - t2) ** 2 - (x**2 - 2 * t1 * t2)


def _node_count(extent: float, frequency: float, points_per_wave: int) -> int:
    """Midpoint nodes on [0, extent] resolving oscillations e^{i·frequency·t}."""
    return max(64, math.ceil(points_per_wave * extent * frequency / (2 * np.pi)))


def chirp_double_bht(
    n: float, x: float, y: float, points_per_wave: int = DEFAULT_POINTS_PER_WAVE
) -> complex:
    """
    B_d(f_N, f_N)(x, y) for the truncated chirp.

    The integrand reduces to e^{2ixy}·e^{2it₁t₂} on [−a, a] × [−b, b]; the tensor
    midpoint sum over t₂ is evaluated for every t₁ at once with a chirp-z transform.
    """
    a, b = n - abs(x), n - abs(y)
    if a <= 0 or b <= 0:
        return 0j
    m1 = _node_count(a, 2 * b, points_per_wave)
    m2 = _node_count(b, 2 * a, points_per_wave)
    h1, h2 = a / m1, b / m2
    t = (np.arange(m1) + 0.5) * h1
    s = (np.arange(m2) + 0.5) * h2
    theta = h1 * h2
    inner = signal.czt(1.0 / s, m=m1, w=np.exp(2j * theta), a=np.exp(-1j * theta))
    inner = inner * np.exp(1j * theta * (np.arange(m1) + 0.5))
    total = 4.0 * h1 * h2 * float(np.sum(inner.imag / t))
    return complex(1j * np.exp(2j * x * y) * total)


def chirp_v2(
    n: float, x: float, points_per_wave: int = DEFAULT_POINTS_PER_WAVE
) -> complex:
    """
    V₂(e^{ix²}, e^{−ix²}, e^{ix²}) truncated to [−N, N], at one point.

    The phase is x² − 2t₁t₂, so for each outer node t₁ the inner PV integral over
    the admissible t₂ interval [lo, hi] is
    Ci(|ω||hi|) − Ci(|ω||lo|) + i·sgn(ω)·(Si(|ω|hi) − Si(|ω|lo)) with ω = −2t₁.
    """
    t_max = n + abs(x)
    count = _node_count(t_max, 2 * t_max, points_per_wave)
    quad = PVQuadrature.line(t_max, count)

    def _inner(t1: np.ndarray) -> np.ndarray:
        lo = np.maximum(x - n, x - t1 - n)
        hi = np.minimum(x + n, x - t1 + n)
        valid = (np.abs(x - t1) <= n) & (hi > lo)
        omega = -2.0 * t1
        w = np.abs(omega)
        with np.errstate(divide="ignore", invalid="ignore"):
            si_hi, ci_hi = special.sici(w * np.abs(hi))
            si_lo, ci_lo = special.sici(w * np.abs(lo))
        sin_part = np.sign(omega) * (np.sign(hi) * si_hi - np.sign(lo) * si_lo)
        cos_part = ci_hi - ci_lo
        value = np.where(valid, cos_part + 1j * sin_part, 0.0)
        return np.nan_to_num(value, nan=0.0, posinf=0.0, neginf=0.0)

    return complex(np.exp(1j * x * x) * quad.integrate(_inner))


# ---------------------------------------------------------------------------
# Sine integral oracle
# ---------------------------------------------------------------------------


def _si_over_u(u: float) -> float:
    return 1.0 if u < 1e-8 else float(special.sici(u)[0]) / u


def _tail(t: float) -> float:
    """R(T) = ∫_T^∞ (f(u)cos u + g(u)sin u)/u du with Si = π/2 − f·cos − g·sin."""

    def _aux_f(u: float) -> float:
        si, ci = special.sici(u)
        return float(np.sin(u) * ci + np.cos(u) * (np.pi / 2 - si)) / u

    def _aux_g(u: float) -> float:
        si, ci = special.sici(u)
        return float(-np.cos(u) * ci + np.sin(u) * (np.pi / 2 - si)) / u

    cos_part, _ = integrate.quad(_aux_f, t, np.inf, weight="cos", wvar=1.0, limlst=200)
    sin_part, _ = integrate.quad(_aux_g, t, np.inf, weight="sin", wvar=1.0, limlst=200)
    return float(cos_part + sin_part)


def _phi_direct(t: float) -> float:
    value, error = integrate.quad(_si_over_u, 0.0, t, limit=2000, epsabs=PHI_TOLERANCE)
    if error > 1e-8:
        raise ToleranceFailure(f"Φ({t}) quadrature error {error:.2e} above tolerance")
    return float(value)


@functools.lru_cache(maxsize=1)
def phi_constant() -> float:
    """c₀ in Φ(T) = (π/2)·ln T + c₀ + R(T)."""
    c0 = _phi_direct(PHI_CROSSOVER) - (np.pi / 2) * math.log(PHI_CROSSOVER) - _tail(
        PHI_CROSSOVER
    )
    logger.info(f"🔍 Φ asymptotic constant c₀ = {c0:.12f}")
    return c0


def phi_integral(t: float) -> float:
    """Φ(T) = ∫₀^T Si(u)/u du."""
    if t < 0:
        raise ValidationFailure("Φ is evaluated for T ≥ 0")
    if t <= PHI_CROSSOVER:
        return _phi_direct(t)
    return (np.pi / 2) * math.log(t) + phi_constant() + _tail(t)


@dataclass(frozen=True)
class SineIntegralOracle:
    """Si through scipy.special.sici and Φ through quadrature plus its expansion."""

    crossover: float = PHI_CROSSOVER
    tolerance: float = PHI_TOLERANCE

    def si(self, x: np.ndarray) -> np.ndarray:
        return special.sici(x)[0]

    def phi(self, t: float) -> float:
        return phi_integral(t)


def sine_integral_direct(
    n: float, nodes: int = GAUSS_NODES, tolerance: float = 1e-9, max_doublings: int = 4
) -> float:
    """∫₀^N∫₀^N sin(xy)/(xy) by tensor Gauss-Legendre panels, doubled until stable."""
    base_x, base_w = np.polynomial.legendre.leggauss(nodes)

    def _evaluate(panels: int) -> float:
        edges = np.linspace(0.0, n, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        x = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
        w = (half[:, None] * base_w[None, :]).ravel()
        total = 0.0
        for start in range(0, x.size, 2048):
            block = x[start : start + 2048]
            kernel = np.sinc(np.outer(block, x) / np.pi)
            total += float(w[start : start + 2048] @ kernel @ w)
        return total

    panels = max(4, math.ceil(n * n / (2 * np.pi)))
    previous = _evaluate(panels)
    for _ in range(max_doublings):
        panels *= 2
        current = _evaluate(panels)
        if abs(current - previous) <= tolerance * max(1.0, abs(current)):
            return current
        previous = current
    raise ToleranceFailure(f"2D quadrature for S({n}) did not converge")


def sine_integral_S(n: float, cross_check: bool = False) -> float:
    """S(N) = ∫₀^N∫₀^N sin(xy)/(xy) dx dy = Φ(N²)."""
    if n <= 0:
        raise ValidationFailure("S(N) needs N > 0")
    value = phi_integral(n * n)
    if cross_check:
        direct = sine_integral_direct(n)
        if abs(direct - value) > 1e-6:
            logger.error(
                f"❌ S({n}) mismatch: Φ path {value:.12f}, 2D path {direct:.12f}"
            )
            raise ToleranceFailure(f"S({n}) disagrees between Φ(N²) and 2D quadrature")
        logger.info(f"✅ S({n}) = {value:.10f} confirmed by 2D quadrature")
    return value


# ---------------------------------------------------------------------------
# Growth certificate
# ---------------------------------------------------------------------------


@dataclass
class LogFit:
    slope: float
    intercept: float
    stderr: float
    t_statistic: float


def fit_log_growth(n_values: Sequence[float], values: Sequence[float]) -> LogFit:
    """Least-squares fit values ≈ a + b·ln N."""
    if len(n_values) != len(values) or len(n_values) < 3:
        raise ValidationFailure("fit needs at least three (N, value) pairs")
    result = stats.linregress(np.log(np.asarray(n_values, dtype=float)), values)
    stderr = float(result.stderr)
    slope = float(result.slope)
    if stderr > 0:
        t_stat = slope / stderr
    else:
        t_stat = 0.0 if slope == 0 else math.copysign(math.inf, slope)
    return LogFit(slope, float(result.intercept), stderr, t_stat)


GROWTH_HEADER = ["N", "value", "ratio", "lnN"]


@dataclass
class GrowthTable:
    operator: str
    exponents: Tuple[float, ...]
    rows: List[Tuple[int, float, float, float]] = field(default_factory=list)
    fit: Optional[LogFit] = None

    def is_flat(self) -> bool:
        """Slope within two standard errors of zero (plus round-off on the ratios)."""
        if self.fit is None:
            return False
        scale = float(np.mean([abs(r[2]) for r in self.rows])) if self.rows else 0.0
        return abs(self.fit.slope) <= 2 * self.fit.stderr + 1e-9 * scale


def _check_exponents(operator: str, exponents: Sequence[float]) -> None:
    expected = 4 if operator == "v2" else 3
    if len(exponents) != expected:
        raise ValidationFailure(f"{operator} takes {expected} exponents")
    *inputs, r = exponents
    if any(p <= 0 for p in exponents):
        raise ValidationFailure("exponents must be positive")
    if not math.isclose(1 / r, sum(1 / p for p in inputs), rel_tol=1e-9):
        raise ValidationFailure("Hölder relation 1/r = 1/p + 1/q violated")


def _local_norm(values: np.ndarray, r: float, measure: float) -> float:
    return float((np.mean(np.abs(values) ** r) * measure) ** (1 / r))


def _growth_row(
    operator: str,
    n: int,
    exponents: Sequence[float],
    samples: int,
    points_per_wave: int,
) -> Tuple[int, float, float, float]:
    log_n = math.log(n)
    if operator == "sine":
        value = sine_integral_S(n)
        return n, value, value / log_n, log_n
    half = n / 1000
    grid = np.linspace(-half, half, samples)
    if operator == "v2":
        p, q, s, r = exponents
        cache: Dict[float, complex] = {}
        values = np.array(
            [cache.setdefault(abs(x), chirp_v2(n, x, points_per_wave)) for x in grid]
        )
        local = _local_norm(values, r, 2 * half)
        norms = (2 * n) ** (1 / p) * (2 * n) ** (1 / q) * (2 * n) ** (1 / s)
    else:
        p, q, r = exponents
        xs, ys = np.meshgrid(grid, grid, indexing="ij")
        if operator == "control":
            values = np.abs(chirp_2d(n)(xs, ys)) ** 2
        else:
            cache2: Dict[Tuple[float, float], complex] = {}
            values = np.array(
                [
                    abs(
                        cache2.setdefault(
                            (abs(x), abs(y)), chirp_double_bht(n, x, y, points_per_wave)
                        )
                    )
                    for x, y in zip(xs.ravel(), ys.ravel())
                ]
            )
        local = _local_norm(values, r, (2 * half) ** 2)
        norms = (2 * n) ** (2 / p) * (2 * n) ** (2 / q)
    value = float(np.mean(np.abs(values)))
    return n, value, local / norms, log_n


def divergence_certificate(
    operator: str,
    n_values: Sequence[int],
    exponents: Sequence[float] = (2.0, 2.0, 1.0),
    samples: int = 3,
    points_per_wave: int = DEFAULT_POINTS_PER_WAVE,
    threads: int = 1,
) -> GrowthTable:
    """
    Local L^r ratio of the operator on its chirp inputs over the square
    [−N/1000, N/1000]^d, fitted against a + b·ln N.

    ``control`` is the plain product f_N·g_N and must come out flat; ``sine`` fits
    S(N) itself.
    """
    if operator not in OPERATORS:
        raise ValidationFailure(
            f"operator must be one of {OPERATORS}, got '{operator}'"
        )
    if len(n_values) < 3:
        raise ValidationFailure("a growth fit needs at least three N values")
    if any(b <= a for a, b in zip(n_values, n_values[1:])) or min(n_values) < 2:
        raise ValidationFailure("N values must be increasing and at least 2")
    if operator != "sine":
        _check_exponents(operator, exponents)

    def _row(n: int) -> Tuple[int, float, float, float]:
        return _growth_row(operator, n, exponents, samples, points_per_wave)

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                rows = list(executor.map(_row, n_values))
        else:
            rows = [_row(n) for n in n_values]
    except ToleranceFailure as e:
        logger.error(f"❌ Failed to build growth table for {operator}: {e}")
        raise

    table = GrowthTable(operator, tuple(exponents), rows)
    value_index = 1 if operator == "sine" else 2
    column = [row[value_index] for row in rows]
    table.fit = fit_log_growth([row[0] for row in rows], column)
    logger.info(
        f"✅ {operator} growth: slope {table.fit.slope:.4e} ± {table.fit.stderr:.2e} "
        f"(t = {table.fit.t_statistic:.2f})"
    )
    return table
