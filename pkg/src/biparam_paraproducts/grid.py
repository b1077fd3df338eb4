"""
Periodic grid functions on [0, L)^d (d = 1, 2) with exact spectral calculus.

Conventions
-----------
* Samples sit at x_i = i·L/N, i = 0..N-1, so the cell measure is (L/N)^d.
* The Fourier transform is the unitary DFT (``norm="ortho"``), so forward followed
  by inverse is the identity and Parseval holds without extra factors.
* Integer frequency indices k follow :func:`numpy.fft.fftfreq` ordering; the physical
  frequency is k/L cycles per unit length. Dyadic annuli (Littlewood-Paley supports)
  are measured in integer index units |k|.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from biparam_paraproducts.errors import ToleranceFailure, ValidationFailure

logger = logging.getLogger(__name__)

GENERATORS = (
    "gaussian",
    "band_limited_random",
    "chirp_xy",
    "chirp_x2",
    "indicator_rect",
    "constant",
)

PARTITION_TOLERANCE = 1e-14


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def integer_frequencies(n: int) -> np.ndarray:
    """
    Integer frequency indices in FFT order, covering [−N/2, N/2).

    The Nyquist index is reported as −N/2, as :func:`numpy.fft.fftfreq` does.
    Interpolation treats that mode symmetrically (a cosine), so the choice of sign
    only matters to multipliers that are odd in the frequency.
    """
    return np.fft.fftfreq(n, d=1.0 / n)


def fold_frequencies(k: np.ndarray, n: int) -> np.ndarray:
    """Reduce integer frequencies modulo N into the range of integer_frequencies."""
    half = n // 2
    return np.mod(np.asarray(k) + half, n) - half


@dataclass(eq=False)
class GridFunction:
    """Complex samples on a periodic 1D/2D grid with a cached spectrum."""

    dim: int
    n_samples: int
    samples: np.ndarray
    domain_length: float = 1.0
    spectral: bool = False
    spectrum_cache: Optional[np.ndarray] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValidationFailure(f"dim must be 1 or 2, got {self.dim}")
        if not is_power_of_two(self.n_samples) or self.n_samples < 8:
            raise ValidationFailure(
                f"N={self.n_samples} must be a power of two ≥ 8"
            )
        if self.domain_length <= 0:
            raise ValidationFailure("domain_length must be positive")
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != self.shape:
            raise ValidationFailure(
                f"samples have shape {self.samples.shape}, expected {self.shape}"
            )

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_samples,) * self.dim

    @property
    def spacing(self) -> float:
        return self.domain_length / self.n_samples

    @property
    def cell_measure(self) -> float:
        return float(self.spacing**self.dim)

    def coordinates(self) -> np.ndarray:
        """Sample positions along one axis."""
        return np.arange(self.n_samples) * self.spacing

    def spectrum(self) -> np.ndarray:
        """Unitary DFT of the samples (cached)."""
        if self.spectrum_cache is None:
            self.spectrum_cache = np.fft.fftn(self.samples, norm="ortho")
        return self.spectrum_cache

    def like(self, samples: np.ndarray) -> "GridFunction":
        """New function on the same grid."""
        return GridFunction(
            dim=self.dim,
            n_samples=self.n_samples,
            samples=samples,
            domain_length=self.domain_length,
        )

    def same_geometry(self, other: "GridFunction") -> bool:
        return (
            self.dim == other.dim
            and self.n_samples == other.n_samples
            and math.isclose(self.domain_length, other.domain_length)
        )

    def require_same_geometry(self, *others: "GridFunction") -> None:
        for other in others:
            if not self.same_geometry(other):
                raise ValidationFailure(
                    "grid geometry mismatch: "
                    f"(dim={self.dim}, N={self.n_samples}, L={self.domain_length}) vs "
                    f"(dim={other.dim}, N={other.n_samples}, L={other.domain_length})"
                )

    def multiply_spectrum(self, multiplier: np.ndarray) -> "GridFunction":
        """Apply a Fourier multiplier given on the integer frequency grid."""
        return self.like(np.fft.ifftn(self.spectrum() * multiplier, norm="ortho"))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self.require_same_geometry(other)
        return self.like(self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self.require_same_geometry(other)
        return self.like(self.samples - other.samples)

    def __mul__(self, other: Union["GridFunction", complex, float]) -> "GridFunction":
        if isinstance(other, GridFunction):
            self.require_same_geometry(other)
            return self.like(self.samples * other.samples)
        return self.like(self.samples * other)

    __rmul__ = __mul__


def outer(f: GridFunction, g: GridFunction) -> GridFunction:
    """Tensor product f⊗g of two 1D functions."""
    if f.dim != 1 or g.dim != 1:
        raise ValidationFailure("tensor product needs two 1D functions")
    f.require_same_geometry(g)
    return GridFunction(
        dim=2,
        n_samples=f.n_samples,
        samples=np.outer(f.samples, g.samples),
        domain_length=f.domain_length,
    )


def make_grid_function(
    dim: int, n: int, length: float = 1.0, generator: str = "gaussian", **params: Any
) -> GridFunction:
    """Build a test function from a named generator family."""
    if not is_power_of_two(n):
        raise ValidationFailure(f"N={n} is not a power of two")
    if generator not in GENERATORS:
        raise ValidationFailure(
            f"unknown generator '{generator}' (expected one of {', '.join(GENERATORS)})"
        )
    x = np.arange(n) * (length / n)
    axes = np.meshgrid(*([x] * dim), indexing="ij")

    if generator == "constant":
        samples = np.full((n,) * dim, complex(params.get("c", 1.0)))

    elif generator == "gaussian":
        width = float(params.get("width", length / 16))
        center = params.get("center", length / 2)
        centers = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
        r2 = sum((a - c) ** 2 for a, c in zip(axes, centers))
        samples = np.exp(-r2 / (2 * width**2)).astype(complex)

    elif generator == "band_limited_random":
        rng = np.random.default_rng(params.get("seed", 0))
        bandwidth = int(params.get("bandwidth", n // 8))
        k = np.abs(integer_frequencies(n))
        mask = np.ones((n,) * dim, dtype=bool)
        for axis in range(dim):
            shape = [1] * dim
            shape[axis] = n
            mask = mask & (k <= bandwidth).reshape(shape)
        if params.get("zero_mean", False):
            mask.flat[0] = False
        spectrum = rng.standard_normal(mask.shape) + 1j * rng.standard_normal(
            mask.shape
        )
        samples = np.fft.ifftn(np.where(mask, spectrum, 0.0))
        if params.get("real", False):
            samples = samples.real.astype(complex)
        peak = np.max(np.abs(samples))
        if peak > 0:
            samples = samples / peak

    elif generator == "chirp_xy":
        if dim != 2:
            raise ValidationFailure("chirp_xy needs a 2D grid")
        n_cut = float(params.get("n_cut", length / 4))
        u, v = (a - length / 2 for a in axes)
        inside = (np.abs(u) <= n_cut) & (np.abs(v) <= n_cut)
        samples = np.where(inside, np.exp(1j * u * v), 0.0)

    elif generator == "chirp_x2":
        if dim != 1:
            raise ValidationFailure("chirp_x2 needs a 1D grid")
        n_cut = float(params.get("n_cut", length / 4))
        sign = float(params.get("sign", 1.0))
        u = axes[0] - length / 2
        samples = np.where(np.abs(u) <= n_cut, np.exp(1j * sign * u**2), 0.0)

    else:  # indicator_rect
        lo = np.broadcast_to(np.asarray(params.get("lo", 0.25), dtype=float), (dim,))
        hi = np.broadcast_to(np.asarray(params.get("hi", 0.75), dtype=float), (dim,))
        inside = np.ones((n,) * dim, dtype=bool)
        for a, a_lo, a_hi in zip(axes, lo, hi):
            inside &= (a >= a_lo * length) & (a < a_hi * length)
        samples = inside.astype(complex)

    return GridFunction(dim=dim, n_samples=n, samples=samples, domain_length=length)


def fourier_transform(f: GridFunction, direction: str = "forward") -> GridFunction:
    """Unitary DFT; ``forward`` returns the spectrum, ``inverse`` the samples."""
    if direction == "forward":
        out = f.like(f.spectrum())
        out.spectral = True
        return out
    if direction == "inverse":
        return f.like(np.fft.ifftn(f.samples, norm="ortho"))
    raise ValidationFailure(
        f"direction must be 'forward' or 'inverse', got {direction}"
    )


def quasi_norm(f: GridFunction, mode: Union[float, str] = 2.0) -> float:
    """Riemann-sum L^p quasi-norm for p ∈ (0, ∞], or the weak-L¹ quasi-norm."""
    values = np.abs(f.samples).ravel()
    if mode == "weak_L1":
        return weak_l1(values, f.cell_measure)
    p = float(mode)
    if not p > 0:
        raise ValidationFailure(f"quasi-norm exponent must be positive, got {p}")
    if values.size == 0:
        return 0.0
    if math.isinf(p):
        return float(values.max())
    return float((np.sum(values**p) * f.cell_measure) ** (1.0 / p))


def weak_l1(values: np.ndarray, cell_measure: float) -> float:
    """max_i |g|_(i)·(i·cell) over magnitudes sorted descending."""
    g = np.sort(np.abs(np.asarray(values)).ravel())[::-1]
    if g.size == 0:
        return 0.0
    ranks = np.arange(1, g.size + 1)
    return float(np.max(g * ranks * cell_measure))


def translate(f: GridFunction, shift: Union[int, Sequence[int]]) -> GridFunction:
    """τ_h f(x) = f(x − h) for a grid shift h (in cells)."""
    shifts = tuple(np.broadcast_to(np.asarray(shift, dtype=int), (f.dim,)))
    return f.like(np.roll(f.samples, shifts, axis=tuple(range(f.dim))))


def dilate(f: GridFunction, factor: float) -> GridFunction:
    """D_λ f(x) = f(c + (x − c)/λ) about the domain centre c, by cubic resampling."""
    if factor <= 0:
        raise ValidationFailure("dilation factor must be positive")
    n = f.n_samples
    idx = n / 2 + (np.arange(n) - n / 2) / factor
    coords = np.array(np.meshgrid(*([idx] * f.dim), indexing="ij"))

    def _resample(part: np.ndarray) -> np.ndarray:
        return ndimage.map_coordinates(part, coords, order=3, mode="grid-wrap")

    return f.like(_resample(f.samples.real) + 1j * _resample(f.samples.imag))


def evaluate_at(f: GridFunction, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Exact trigonometric interpolation of a 1D function at arbitrary points."""
    if f.dim != 1:
        raise ValidationFailure("evaluate_at supports 1D functions only")
    n = f.n_samples
    coeffs = np.fft.fft(f.samples) / n
    k = integer_frequencies(n)
    nyquist = n // 2
    regular = k != -nyquist
    points = np.asarray(points, dtype=float)
    flat = points.ravel()
    out = np.empty(flat.shape, dtype=complex)
    omega = 2 * np.pi / f.domain_length
    for start in range(0, flat.size, chunk):
        xs = flat[start : start + chunk]
        phase = np.exp(1j * omega * np.outer(xs, k[regular]))
        values = phase @ coeffs[regular]
        values += coeffs[nyquist] * np.cos(omega * nyquist * xs)
        out[start : start + chunk] = values
    return out.reshape(points.shape)


def dyadic_maximal_1d(f: GridFunction) -> GridFunction:
    """Dyadic Hardy-Littlewood maximal function of |f| on a 1D grid."""
    if f.dim != 1:
        raise ValidationFailure("dyadic_maximal_1d needs a 1D function")
    values = np.abs(f.samples)
    n = f.n_samples
    best = values.copy()
    block = n
    while block >= 1:
        means = values.reshape(-1, block).mean(axis=1)
        best = np.maximum(best, np.repeat(means, block))
        block //= 2
    return f.like(best)


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C^∞ step: 1 for t ≤ 0, 0 for t ≥ 1, built from h(s) = exp(−1/s)."""
    t = np.asarray(t, dtype=float)

    def _h(s: np.ndarray) -> np.ndarray:
        positive = s > 0
        return np.where(positive, np.exp(-1.0 / np.where(positive, s, 1.0)), 0.0)

    a = _h(1.0 - t)
    b = _h(t)
    return a / (a + b)


def radial_cutoff(r: np.ndarray) -> np.ndarray:
    """θ(r): 1 for r ≤ 1, 0 for r ≥ 2."""
    return smooth_step(np.asarray(r, dtype=float) - 1.0)


@dataclass(eq=False)
class LPFamily:
    """Littlewood-Paley partition of the integer frequencies of an N-point axis."""

    n_samples: int
    scales: List[int]
    profiles: Dict[int, np.ndarray]
    low_pass_profile: np.ndarray
    partition_certificate: float
    _cumulative: Dict[int, np.ndarray] = field(
        default_factory=dict, repr=False, compare=False
    )

    @property
    def max_scale(self) -> int:
        return max(self.scales)

    def profile(self, k: int) -> np.ndarray:
        """ψ̂_k in FFT order; k = −1 is the low-pass φ̂₀."""
        if k == -1:
            return self.low_pass_profile
        if k in self.profiles:
            return self.profiles[k]
        return np.zeros(self.n_samples)

    def partial_sum(self, m: int) -> np.ndarray:
        """S_m = Σ_{j=−1}^{m} ψ̂_j (zero for m < −1)."""
        if m < -1:
            return np.zeros(self.n_samples)
        m = min(m, self.max_scale)
        if m not in self._cumulative:
            total = np.zeros(self.n_samples)
            for j in range(-1, m + 1):
                total = total + self.profile(j)
            self._cumulative[m] = total
        return self._cumulative[m]

    def low_pass(self, m: int) -> np.ndarray:
        """Low-pass cutoff S_{max(m, −1)}, always containing frequency 0."""
        return self.partial_sum(max(m, -1))

    def apply(
        self, f: GridFunction, k: int, axis: Optional[int] = None
    ) -> GridFunction:
        """f ∗ ψ_k, along one axis of a 2D function when ``axis`` is given."""
        return f.multiply_spectrum(self.axis_multiplier(self.profile(k), f.dim, axis))

    @staticmethod
    def axis_multiplier(
        profile: np.ndarray, dim: int, axis: Optional[int]
    ) -> np.ndarray:
        if dim == 1:
            return profile
        if axis is None:
            raise ValidationFailure("axis is required for 2D functions")
        shape = [1, 1]
        shape[axis] = profile.size
        return profile.reshape(shape)

    def spatial_profile(self, k: int, length: float = 1.0) -> GridFunction:
        """The kernel ψ_k on the grid, peak at x = 0."""
        n = self.n_samples
        kernel = np.fft.ifft(self.profile(k)) * n / length
        return GridFunction(dim=1, n_samples=n, samples=kernel, domain_length=length)


def lp_partition(n: int, scale_range: Optional[Sequence[int]] = None) -> LPFamily:
    """
    Dyadic partition of unity on the integer lattice of an N-point axis.

    ψ̂_k(r) = θ(r/2^k) − θ(r/2^{k−1}) for k = 0..K with K = log2 N − 1, and the
    low-pass φ̂₀ is the indicator of frequency 0. The profiles are divided by their
    total so the partition holds to roundoff.
    """
    if not is_power_of_two(n) or n < 8:
        raise ValidationFailure(f"N={n} must be a power of two ≥ 8")
    top = int(math.log2(n)) - 1
    scales = list(range(0, top + 1)) if scale_range is None else sorted(scale_range)
    missing = sorted(set(range(0, top + 1)) - set(scales))
    if missing:
        raise ValidationFailure(
            f"scale_range too narrow to cover the Nyquist band (missing {missing})"
        )
    r = np.abs(integer_frequencies(n))
    low = (r == 0).astype(float)
    raw = {}
    for k in scales:
        band = radial_cutoff(r / 2.0**k) - radial_cutoff(r / 2.0 ** (k - 1))
        raw[k] = np.where(r == 0, 0.0, band)
    total = low + sum(raw.values())
    profiles = {k: v / total for k, v in raw.items()}
    recon = sum(profiles.values())
    certificate = float(np.max(np.abs(recon[r > 0] - 1.0)))
    if certificate > PARTITION_TOLERANCE:
        raise ToleranceFailure(
            f"Littlewood-Paley partition deviates from 1 by {certificate:.3e}"
        )
    logger.info(f"🔍 LP partition N={n}: scales 0..{top}, certificate {certificate:.2e}")
    return LPFamily(
        n_samples=n,
        scales=scales,
        profiles=profiles,
        low_pass_profile=low,
        partition_certificate=certificate,
    )
