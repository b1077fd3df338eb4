"""n-linear multipliers T_m and trilinear forms Λ_m by exact frequency summation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import (
    GridFunction,
    fold_frequencies,
    integer_frequencies,
    quasi_norm,
)
from biparam_paraproducts.symbols import Symbol

logger = logging.getLogger(__name__)

STRATEGIES = ("full_sum", "separable_fast")

# Upper bound on frequency tuples materialised per chunk
CHUNK_TUPLES = 1 << 18


@dataclass(frozen=True)
class MultilinearOperator:
    """T_m for a symbol m, with the evaluation strategy fixed at construction."""

    symbol: Symbol
    strategy: str = "full_sum"
    threads: int = 1

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValidationFailure(f"unknown evaluation strategy '{self.strategy}'")
        if self.strategy == "separable_fast" and not self.symbol.is_separable:
            raise ValidationFailure(
                f"symbol '{self.symbol.name}' declares no separable structure"
            )
        if self.threads < 1:
            raise ValidationFailure("threads must be ≥ 1")

    @property
    def arity(self) -> int:
        return self.symbol.arity

    @property
    def freq_dim(self) -> int:
        return self.symbol.freq_dim


def make_operator(
    symbol: Symbol, strategy: Optional[str] = None, threads: int = 1
) -> MultilinearOperator:
    """Pick separable_fast when the symbol allows it, unless a strategy is forced."""
    if strategy is None:
        strategy = "separable_fast" if symbol.is_separable else "full_sum"
    return MultilinearOperator(symbol=symbol, strategy=strategy, threads=threads)


def _check_args(op: MultilinearOperator, args: Sequence[GridFunction]) -> None:
    if len(args) != op.arity:
        raise ValidationFailure(
            f"arity mismatch: symbol '{op.symbol.name}' takes {op.arity} arguments, "
            f"got {len(args)}"
        )
    first = args[0]
    first.require_same_geometry(*args[1:])
    if first.dim != op.freq_dim:
        raise ValidationFailure(
            f"symbol '{op.symbol.name}' acts on {op.freq_dim}D functions, "
            f"got {first.dim}D"
        )


def _frequency_table(f: GridFunction) -> np.ndarray:
    """Integer frequencies of every flat index, shape (N^d, d)."""
    k = integer_frequencies(f.n_samples)
    grids = np.meshgrid(*([k] * f.dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _physical_grid(f: GridFunction) -> np.ndarray:
    """Physical frequencies on the grid, shape (N,)*d + (d,)."""
    k = integer_frequencies(f.n_samples) / f.domain_length
    return np.stack(np.meshgrid(*([k] * f.dim), indexing="ij"), axis=-1)


def _tuple_chunks(size: int, arity: int) -> List[Tuple[int, int]]:
    rest = size ** (arity - 1)
    block = max(1, CHUNK_TUPLES // max(rest, 1))
    return [(start, min(start + block, size)) for start in range(0, size, block)]


def _full_sum_chunk(
    op: MultilinearOperator,
    coeffs: List[np.ndarray],
    ktable: np.ndarray,
    f: GridFunction,
    bounds: Tuple[int, int],
) -> Tuple[np.ndarray, np.ndarray]:
    """Symbol-weighted coefficient products and wrapped output indices for a chunk."""
    size, dim, arity = ktable.shape[0], f.dim, op.arity
    first = np.arange(*bounds)
    if arity == 1:
        index = [first]
    else:
        rest = np.indices((size,) * (arity - 1)).reshape(arity - 1, -1)
        index = [np.repeat(first, rest.shape[1])]
        index += [np.tile(r, first.size) for r in rest]
    ks = np.stack([ktable[i] for i in index], axis=-2)  # (T, arity, dim)
    if op.symbol.sum_only:
        # evaluate at the output frequency the grid actually represents
        raw = ks.sum(axis=-2)
        ks[..., 0, :] += fold_frequencies(raw, f.n_samples) - raw
    weight = op.symbol(ks / f.domain_length)
    for j, i in enumerate(index):
        weight = weight * coeffs[j][i]
    wrapped = np.mod(ks.sum(axis=-2), f.n_samples).astype(np.int64)
    out_index = np.ravel_multi_index(tuple(wrapped[:, a] for a in range(dim)), f.shape)
    return out_index, weight


def _output_coefficients(
    op: MultilinearOperator, args: Sequence[GridFunction]
) -> np.ndarray:
    """Fourier coefficients C(Ξ) of T_m(args), with f = Σ c_k e^{2πikx/L}."""
    f = args[0]
    size = f.n_samples**f.dim
    coeffs = [np.fft.fftn(a.samples).ravel() / size for a in args]

    if op.strategy == "separable_fast":
        freqs = _physical_grid(f)
        total = np.zeros(f.shape, dtype=complex)
        for term in op.symbol.terms or ():
            product = np.ones(f.shape, dtype=complex)
            for factor, a in zip(term.arg_factors, args):
                product *= np.fft.ifftn(np.fft.fftn(a.samples) * factor(freqs))
            total += np.fft.fftn(product) * term.output_factor(freqs)
        return total.ravel() / size

    ktable = _frequency_table(f)
    chunks = _tuple_chunks(size, op.arity)

    def _reduce(bounds: Tuple[int, int]) -> np.ndarray:
        out_index, weight = _full_sum_chunk(op, coeffs, ktable, f, bounds)
        return np.bincount(out_index, weights=weight.real, minlength=size) + 1j * (
            np.bincount(out_index, weights=weight.imag, minlength=size)
        )

    if op.threads > 1:
        with ThreadPoolExecutor(max_workers=op.threads) as executor:
            partials = list(executor.map(_reduce, chunks))
    else:
        partials = [_reduce(b) for b in chunks]
    total = np.zeros(size, dtype=complex)
    for part in partials:
        total += part
    return total


def apply_multiplier(op: MultilinearOperator, *args: GridFunction) -> GridFunction:
    """
    Evaluate T_m(f₁, ..., f_n).

    The output coefficient at Ξ is Σ m(ξ₁, ..., ξ_n)·Π ĉ_j(ξ_j) over tuples whose sum
    is Ξ modulo N (per axis); frequencies are passed to the symbol in physical units.
    """
    _check_args(op, args)
    f = args[0]
    coefficients = _output_coefficients(op, args).reshape(f.shape)
    return f.like(np.fft.ifftn(coefficients) * f.n_samples**f.dim)


def trilinear_form(
    op: MultilinearOperator,
    f1: GridFunction,
    f2: GridFunction,
    f3: GridFunction,
    side: str = "sample",
) -> complex:
    """
    Λ_m(f₁, f₂, f₃) = ∫ T_m(f₁, f₂)·f₃.

    ``sample`` integrates by Riemann sum; ``frequency`` pairs the output coefficients
    with those of f₃ on the zero-sum lattice ξ + η + γ ≡ 0.
    """
    if op.arity != 2:
        raise ValidationFailure("trilinear_form needs a bilinear operator")
    _check_args(op, (f1, f2))
    f1.require_same_geometry(f3)
    if side == "sample":
        product = apply_multiplier(op, f1, f2).samples * f3.samples
        return complex(np.sum(product) * f1.cell_measure)
    if side == "frequency":
        size = f1.n_samples**f1.dim
        c_out = _output_coefficients(op, (f1, f2)).reshape(f1.shape)
        c3 = np.fft.fftn(f3.samples) / size
        neg = np.mod(-np.arange(f1.n_samples), f1.n_samples)
        negated = c3[np.ix_(*([neg] * f1.dim))]
        return complex(np.sum(c_out * negated) * f1.domain_length**f1.dim)
    raise ValidationFailure(f"side must be 'sample' or 'frequency', got '{side}'")


def form_bound_ratio(
    op: MultilinearOperator,
    f1: GridFunction,
    f2: GridFunction,
    f3: GridFunction,
    exponents: Tuple[float, float, float],
) -> float:
    """Empirical |Λ| / (‖f₁‖_p‖f₂‖_q‖f₃‖_s), logged for the record."""
    p, q, s = exponents
    lam = abs(trilinear_form(op, f1, f2, f3))
    denom = quasi_norm(f1, p) * quasi_norm(f2, q) * quasi_norm(f3, s)
    ratio = 0.0 if denom == 0 else lam / denom
    logger.info(f"🔍 Form bound for '{op.symbol.name}' at {exponents}: {ratio:.4e}")
    return ratio
