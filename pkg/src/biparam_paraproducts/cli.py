"""
Command-line driver: one subcommand per experiment, each writing a CSV table, a
``<stem>_summary.csv``, a ``<stem>_manifest.txt`` and optionally a gnuplot script.

Exit codes: 0 success, 2 invalid configuration or precondition, 3 a numeric
certificate outside its tolerance.
"""

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from biparam_paraproducts import __version__
from biparam_paraproducts.artifacts import SUMMARY_HEADER, artifact_store
from biparam_paraproducts.config import (
    SUBCOMMANDS,
    ExperimentConfig,
    build_config,
    read_config_file,
)
from biparam_paraproducts.errors import (
    BiparamError,
    ToleranceFailure,
    ValidationFailure,
)
from biparam_paraproducts.grid import GridFunction, make_grid_function
from biparam_paraproducts.maximal_square import mm_maximal, pointwise_majorization
from biparam_paraproducts.paraproducts import (
    KATO_PONCE_HEADER,
    kato_ponce_family,
    kato_ponce_report,
)
from biparam_paraproducts.singular import (
    GROWTH_HEADER,
    PVQuadrature,
    bht_eval,
    bht_spectral,
    divergence_certificate,
)
from biparam_paraproducts.stratification import (
    journe_maximal,
    stratify_levels,
    weak_type_driver,
)
from biparam_paraproducts.symbols import build_symbol, verify_decay
from biparam_paraproducts.tiles import (
    FIRST_AXIS_BANDS,
    BiTileSystem,
    TileSystem,
    random_coefficient_table,
    size_energy_estimate,
    stopping_decompose,
    tile_coefficients,
    tile_criteria,
)

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "BIPARAM_LOG_LEVEL"

Metric = Tuple[str, Any, bool]


@dataclass
class ExperimentResult:
    """Everything one subcommand produces before it is written to disk."""

    header: List[str]
    rows: List[Sequence[Any]]
    metrics: List[Metric] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)
    plot: Optional[Tuple[str, List[str]]] = None

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.metrics)


def _random_function(
    config: ExperimentConfig, n: int, seed: int, dim: int
) -> GridFunction:
    return make_grid_function(
        dim, n, config.domain_length, "band_limited_random", seed=seed, real=True
    )


def run_check_symbol(config: ExperimentConfig) -> ExperimentResult:
    params: Dict[str, Any] = {}
    if config.symbol == "random_bounded":
        params = {"n": config.n_values[0], "seed": config.seed}
    symbol = build_symbol(config.symbol, **params)
    report = verify_decay(symbol, config.mode, max_order=config.max_order)
    rows = [list(row) for row in report.rows()]
    metrics: List[Metric] = [
        ("worst_constant", max(report.worst_constant, default=0.0), report.all_pass)
    ]
    return ExperimentResult(["order", "constant", "passed"], rows, metrics)


def run_kato_ponce(config: ExperimentConfig) -> ExperimentResult:
    family = kato_ponce_family(
        config.family,
        config.n_values[0],
        config.domain_length,
        config.dim,
        config.seed,
        config.corpus_size,
    )
    beta = config.beta if config.dim == 2 else None
    report = kato_ponce_report(family, config.exponents, config.alpha, beta)
    ratios = [row.ratio for row in report.rows]
    finite = all(math.isfinite(r) for r in ratios)
    metrics: List[Metric] = [("max_ratio", report.max_ratio, finite)]
    if config.family == "dilated" and min(ratios) > 0:
        spread = max(ratios) / min(ratios) - 1
        metrics.append(("dilation_spread", spread, spread <= 0.02))
    return ExperimentResult(list(KATO_PONCE_HEADER), report.table(), metrics)


def run_squarefns(config: ExperimentConfig) -> ExperimentResult:
    rows: List[Sequence[Any]] = []
    worst = math.inf
    for n in config.n_values:
        systems = [BiTileSystem(n, config.domain_length, j) for j in (1, 2, 3)]
        for i in range(config.corpus_size):
            seed = config.seed + 3 * i
            tables = [
                random_coefficient_table(s, seed=seed + idx)
                for idx, s in enumerate(systems)
            ]
            cert = pointwise_majorization(*tables)
            cell = (config.domain_length / n) ** 2
            rows.append(
                [
                    n,
                    i,
                    cert.min_slack,
                    float(np.sum(cert.lhs) * cell),
                    float(np.sum(cert.rhs) * cell),
                    cert.passes,
                ]
            )
            worst = min(worst, cert.min_slack / max(cert.tolerance, 1e-300))
    passed = all(bool(row[-1]) for row in rows)
    return ExperimentResult(
        ["N", "instance", "min_slack", "lhs_integral", "rhs_integral", "passed"],
        rows,
        [("worst_scaled_slack", worst, passed)],
    )


def run_tiles_stopping(config: ExperimentConfig) -> ExperimentResult:
    rows: List[Sequence[Any]] = []
    c_stop = 0.0
    residual_ok = True
    for n in config.n_values:
        for i in range(config.corpus_size):
            j = 1 + i % 3
            system = TileSystem(n, config.domain_length, FIRST_AXIS_BANDS[j], j)
            f = _random_function(config, n, config.seed + i, 1)
            table = tile_coefficients(f, system, source_id=f"f{i}")
            decomposition = stopping_decompose(table)
            c_stop = max(c_stop, *decomposition.c_stop.values(), 0.0)
            if decomposition.residual and decomposition.thresholds:
                last = max(decomposition.thresholds)
                left = tile_criteria(table, set(decomposition.residual), j)
                residual_ok &= max(left.values()) <= decomposition.thresholds[last]
            rows.extend(
                [n, i, j, *row] for row in decomposition.rows(config.domain_length)
            )
    metrics: List[Metric] = [
        ("c_stop", c_stop, True),
        ("residual_size_bound", residual_ok, residual_ok),
    ]
    return ExperimentResult(
        ["N", "instance", "j", "stratum", "tree", "start", "end", "members"],
        rows,
        metrics,
    )


def run_tiles_use_bound(config: ExperimentConfig) -> ExperimentResult:
    rows: List[Sequence[Any]] = []
    ratios: List[float] = []
    for n in config.n_values:
        for i in range(config.corpus_size):
            tables = []
            for j in (1, 2, 3):
                system = TileSystem(n, config.domain_length, FIRST_AXIS_BANDS[j], j)
                f = _random_function(config, n, config.seed + 3 * i + j, 1)
                tables.append(tile_coefficients(f, system, source_id=f"f{j}_{i}"))
            lhs, rhs, ratio = size_energy_estimate(tables, thetas=config.theta)
            rows.append([n, i, lhs, rhs, ratio])
            if ratio > 0:
                ratios.append(ratio)
    c_use = max(ratios, default=0.0)
    bounded = math.isfinite(c_use)
    spread = c_use / min(ratios) if ratios else 0.0
    if not bounded:
        spread = math.inf
    metrics: List[Metric] = [
        ("c_use", c_use, bounded),
        ("ratio_spread", spread, spread < 100),
    ]
    return ExperimentResult(["N", "instance", "lhs", "rhs", "ratio"], rows, metrics)


def run_stratify(config: ExperimentConfig) -> ExperimentResult:
    n = config.n_values[0]
    if config.dim == 1:
        f1 = _random_function(config, n, config.seed, 1)
        f2 = _random_function(config, n, config.seed + 1, 1)
        e3 = np.zeros(n, dtype=bool)
        cells = int(round(n / config.domain_length))
        if not 0 < cells <= n:
            raise ValidationFailure("the 1D driver needs a domain of length at least 1")
        e3[(n - cells) // 2 : (n - cells) // 2 + cells] = True
        report = weak_type_driver(f1, f2, e3, config.threshold)
        rows = [
            [row.d, row.count, *row.sizes, *row.energies, row.form_sum, row.f3_decay]
            for row in report.rows
        ]
        header = ["d", "count", "size1", "size2", "size3"]
        header += ["energy1", "energy2", "energy3", "form_sum", "f3_decay"]
        metrics: List[Metric] = [
            ("u_measure", report.u_measure, report.u_measure <= 2 / config.threshold),
            ("e3_prime_measure", report.e3_prime_measure, True),
            ("total", report.total, report.total <= report.c_total),
            ("c_total", report.c_total, True),
            ("f3_decay_constant", report.f3_decay_constant, True),
        ]
        return ExperimentResult(header, rows, metrics)

    rows = []
    min_overlap = 1.0
    passed = True
    for i in range(config.corpus_size):
        tables = []
        for j in (1, 2, 3):
            f = _random_function(config, n, config.seed + 3 * i + j, 2)
            system = BiTileSystem(n, config.domain_length, j)
            tables.append(tile_coefficients(f, system))
        result = stratify_levels(
            *tables, threshold=config.threshold, n_start=config.n_start
        )
        for levels, members in sorted(result.strata.items()):
            rows.append([i, *levels, len(members)])
        min_overlap = min(min_overlap, result.min_overlap)
        passed &= result.certificate_passes
    return ExperimentResult(
        ["instance", "n1", "n2", "n3", "count"],
        rows,
        [("min_overlap", min_overlap, passed)],
    )


def random_dyadic_union(
    n: int, rng: np.random.Generator, max_rectangles: int = 8
) -> Tuple[np.ndarray, List[Tuple[int, int, int, int]]]:
    """Union of up to ``max_rectangles`` random dyadic rectangles and their keys."""
    omega = np.zeros((n, n), dtype=bool)
    keys = []
    for _ in range(int(rng.integers(1, max_rectangles + 1))):
        k1, k2 = (int(v) for v in rng.integers(1, 5, size=2))
        l1, l2 = int(rng.integers(0, 2**k1)), int(rng.integers(0, 2**k2))
        w1, w2 = n >> k1, n >> k2
        omega[l1 * w1 : (l1 + 1) * w1, l2 * w2 : (l2 + 1) * w2] = True
        keys.append((k1, l1, k2, l2))
    return omega, keys


def run_journe(config: ExperimentConfig) -> ExperimentResult:
    n = config.n_values[0]
    rng = np.random.default_rng(config.seed)
    rows: List[Sequence[Any]] = []
    worst = 0.0
    for i in range(config.corpus_size):
        omega, keys = random_dyadic_union(n, rng)
        indicator = GridFunction(
            dim=2,
            n_samples=n,
            samples=omega.astype(complex),
            domain_length=config.domain_length,
        )
        omega_tilde = mm_maximal(indicator).samples.real > 0.5
        tiles = list(keys)
        for k1, l1, k2, l2 in keys:
            tiles += [
                (k1 + 1, 2 * l1 + a, k2 + 1, 2 * l2 + b) for a in (0, 1) for b in (0, 1)
            ]
        report = journe_maximal(
            tiles, omega, omega_tilde, config.epsilon, config.domain_length
        )
        for d, area in sorted(report.classes.items()):
            ratio = area / (2 ** (config.epsilon * d) * report.omega_measure)
            rows.append([i, d, area, ratio])
        worst = max(worst, report.constant)
    return ExperimentResult(
        ["instance", "d", "area", "ratio"], rows, [("c_journe", worst, worst <= 20.0)]
    )


def run_counterexample(config: ExperimentConfig) -> ExperimentResult:
    if config.op == "v2":
        if config.s is None:
            raise ValidationFailure("the v2 counterexample needs a third exponent s")
        exponents: Tuple[float, ...] = (config.p, config.q, config.s, config.r)
    else:
        exponents = config.exponents
    table = divergence_certificate(
        config.op, config.n_values, exponents, threads=config.threads
    )
    fit = table.fit
    assert fit is not None
    if config.op == "control":
        passed = table.is_flat()
    elif config.op == "sine":
        passed = abs(fit.slope - math.pi) <= 0.05 * math.pi
    else:
        passed = fit.slope > 0 and fit.t_statistic > 5
    metrics: List[Metric] = [
        ("slope", fit.slope, passed),
        ("stderr", fit.stderr, True),
        ("t_statistic", fit.t_statistic, True),
    ]
    notes = {
        "fit.slope": f"{fit.slope:.12e}",
        "fit.intercept": f"{fit.intercept:.12e}",
        "fit.stderr": f"{fit.stderr:.12e}",
    }
    y_column = "value" if config.op == "sine" else "ratio"
    return ExperimentResult(
        list(GROWTH_HEADER),
        [list(row) for row in table.rows],
        metrics,
        notes,
        plot=("lnN", [y_column]),
    )


def run_bht_crosscheck(config: ExperimentConfig) -> ExperimentResult:
    rows: List[Sequence[Any]] = []
    worst = 0.0
    for n in config.n_values:
        f = _random_function(config, n, config.seed, 1)
        g = _random_function(config, n, config.seed + 1, 1)
        x = f.coordinates()
        quad = PVQuadrature.periodic(config.domain_length, n)
        time_side = bht_eval(f, g, x, quad)
        freq_side = bht_spectral(f, g).samples
        diff = np.abs(time_side - freq_side)
        worst = max(worst, float(np.max(diff)))
        for xi, a, b, e in zip(x, time_side, freq_side, diff):
            rows.append([n, xi, a.real, a.imag, b.real, b.imag, e])
    return ExperimentResult(
        ["N", "x", "re_time", "im_time", "re_freq", "im_freq", "abs_diff"],
        rows,
        [("max_abs_diff", worst, worst <= 1e-6)],
    )


HANDLERS: Dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "check-symbol": run_check_symbol,
    "kato-ponce": run_kato_ponce,
    "squarefns": run_squarefns,
    "tiles-stopping": run_tiles_stopping,
    "tiles-use-bound": run_tiles_use_bound,
    "stratify": run_stratify,
    "journe": run_journe,
    "counterexample": run_counterexample,
    "bht-crosscheck": run_bht_crosscheck,
}


def companion_paths(csv_path: Path) -> Tuple[Path, Path, Path]:
    """Summary, manifest and plot-script paths next to a CSV."""
    stem = csv_path.with_suffix("")
    return (
        Path(f"{stem}_summary.csv"),
        Path(f"{stem}_manifest.txt"),
        csv_path.with_suffix(".gp"),
    )


def run(config: ExperimentConfig) -> int:
    """Run one experiment, write its artifacts and return the exit code."""
    if config.subcommand == "report":
        raise ValidationFailure("use run_report for the report subcommand")
    started = time.perf_counter()
    result = HANDLERS[config.subcommand](config)
    csv_path = config.output_path()
    summary_path, manifest_path, plot_path = companion_paths(csv_path)
    artifact_store.write_table(csv_path, result.header, result.rows)
    artifact_store.write_summary(summary_path, config.subcommand, result.metrics)
    if config.plot and result.plot is not None:
        artifact_store.write_plot_script(
            csv_path, result.plot[0], result.plot[1], config.subcommand
        )
    else:
        artifact_store.remove(plot_path)
    notes = dict(result.notes)
    notes["passed"] = result.passed
    artifact_store.write_manifest(
        manifest_path,
        config.echo(),
        __version__,
        time.perf_counter() - started,
        notes,
    )
    if not result.passed:
        failed = [name for name, _, ok in result.metrics if not ok]
        raise ToleranceFailure(f"{config.subcommand}: certificate(s) failed: {failed}")
    logger.info(f"✅ {config.subcommand} finished, results in {csv_path}")
    return 0


def run_report(paths: Sequence[Path], out: Path) -> int:
    """Merge per-run summaries into one table with a leading ``source`` column."""
    rows: List[List[str]] = []
    for path in paths:
        header, body = artifact_store.read_table(path)
        for expected, found in zip(SUMMARY_HEADER, header):
            if expected != found:
                raise ValidationFailure(
                    f"{path}: column '{found}' where '{expected}' was expected"
                )
        if len(header) != len(SUMMARY_HEADER):
            extra = header[len(SUMMARY_HEADER) :] or ["<missing>"]
            raise ValidationFailure(f"{path}: unexpected column '{extra[0]}'")
        rows += [[Path(path).name, *row] for row in body]
    artifact_store.write_table(out, ["source", *SUMMARY_HEADER], rows)
    logger.info(f"✅ Merged {len(paths)} summaries into {out}")
    return 0


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value configuration file")
    parser.add_argument("--n", dest="n_values", help="N, a comma list, or lo..hi")
    parser.add_argument("--length", dest="domain_length", help="period L")
    parser.add_argument("--seed", type=int)
    for name in ("p", "q", "s", "r", "alpha", "beta", "threshold", "epsilon"):
        parser.add_argument(f"--{name}", help="number, fraction or inf")
    parser.add_argument("--decay-m", dest="decay_m", type=int)
    parser.add_argument("--n-start", dest="n_start", type=int)
    parser.add_argument("--theta", help="three comma-separated weights")
    parser.add_argument("--corpus-size", dest="corpus_size", type=int)
    parser.add_argument("--dim", type=int)
    parser.add_argument("--op")
    parser.add_argument("--symbol")
    parser.add_argument("--mode")
    parser.add_argument("--max-order", dest="max_order", type=int)
    parser.add_argument("--family")
    parser.add_argument("--out")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--plot", action="store_true", default=None)
    parser.add_argument("--log-level", dest="log_level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biparam", description="Numerical checks for bi-parameter paraproducts"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        child = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common_options(child)
        if name == "report":
            child.add_argument("paths", nargs="*", type=Path, help="summary CSV files")
    return parser


def _configure_logging(level: Optional[str]) -> None:
    name = (level or os.environ.get(LOG_LEVEL_ENV) or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the command-line driver."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    logger.info(f"Starting biparam {args.subcommand}...")
    values = {
        key: value
        for key, value in vars(args).items()
        if key not in ("subcommand", "config", "paths", "log_level")
    }
    try:
        file_values = read_config_file(args.config) if args.config else None
        config = build_config(args.subcommand, file_values, values)
        if args.subcommand == "report":
            return run_report(args.paths, config.output_path())
        return run(config)
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return ValidationFailure.exit_code
    except BiparamError as e:
        logger.error(f"❌ {args.subcommand} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"❌ Failed to access artifacts: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
