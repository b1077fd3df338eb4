"""Experiment configuration: validated model, key=value files and environment."""

import logging
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from biparam_paraproducts.errors import ValidationFailure

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

SUBCOMMANDS = (
    "check-symbol",
    "kato-ponce",
    "squarefns",
    "tiles-stopping",
    "tiles-use-bound",
    "stratify",
    "journe",
    "counterexample",
    "bht-crosscheck",
    "report",
)

# Environment variable -> config field
ENV_OVERRIDES = {
    "BIPARAM_THREADS": "threads",
    "BIPARAM_SEED": "seed",
    "BIPARAM_OUT_DIR": "out_dir",
}

LIST_FIELDS = {"n_values", "theta"}

# Smallest grid the Littlewood-Paley partition supports
MIN_GRID_SIZE = 8


def parse_number(text: str) -> float:
    """Parse a float, allowing fractions such as ``2/3`` and ``inf``."""
    text = text.strip()
    if text.lower() in ("inf", "infinity", "∞"):
        return math.inf
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as e:
        raise ValidationFailure(f"Cannot parse number '{text}': {e}") from e


def parse_n_spec(text: str) -> List[int]:
    """Parse ``64``, ``16,32,64`` or the doubling ladder ``16..512``."""
    text = text.strip()
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        lo, hi = int(lo_text), int(hi_text)
        if lo <= 0 or hi < lo:
            raise ValidationFailure(f"Invalid N range '{text}'")
        values = []
        n = lo
        while n <= hi:
            values.append(n)
            n *= 2
        return values
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ValidationFailure(f"Invalid N list '{text}': {e}") from e


class ExperimentConfig(BaseModel):
    """Configuration for one experiment run."""

    subcommand: str = Field(default="check-symbol", description="Experiment to run")
    n_values: List[int] = Field(
        default_factory=lambda: [64], description="Grid sizes N (samples per axis)"
    )
    domain_length: float = Field(default=1.0, gt=0, description="Period L")
    seed: int = Field(default=0, ge=0, description="Random seed")
    p: float = Field(default=2.0, description="Exponent of the first input")
    q: float = Field(default=2.0, description="Exponent of the second input")
    s: Optional[float] = Field(
        default=None, description="Exponent of the third input (trilinear runs)"
    )
    r: float = Field(default=1.0, gt=0, description="Output exponent")
    alpha: float = Field(default=1.0, gt=0, description="First derivative order")
    beta: float = Field(default=1.0, gt=0, description="Second derivative order")
    threshold: float = Field(default=8.0, gt=0, description="Level-set threshold C")
    epsilon: float = Field(default=0.5, gt=0, description="Journé loss exponent")
    decay_m: int = Field(default=10, ge=1, description="Envelope decay exponent M")
    n_start: int = Field(default=4, ge=0, description="Ground level of the SS ladder")
    theta: List[float] = Field(
        default_factory=lambda: [1 / 3, 1 / 3, 1 / 3],
        description="Interpolation weights θ₁, θ₂, θ₃",
    )
    corpus_size: int = Field(default=4, ge=1, description="Random instances per run")
    dim: int = Field(default=1, description="Dimension for dimension-generic runs")
    op: str = Field(default="bd", description="Counterexample operator")
    symbol: str = Field(default="one_param_cm_demo", description="Symbol name")
    mode: str = Field(default="one_param", description="Decay check mode")
    max_order: int = Field(
        default=2, ge=0, le=4, description="Highest derivative order"
    )
    family: str = Field(default="gaussian", description="Kato-Ponce input family")
    out: str = Field(default="results.csv", description="Output CSV file name")
    out_dir: str = Field(default=".", description="Directory for artifacts")
    threads: int = Field(default=1, ge=1, description="Worker threads")
    plot: bool = Field(default=False, description="Emit a plot script")

    @field_validator("subcommand")
    @classmethod
    def _known_subcommand(cls, value: str) -> str:
        if value not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand '{value}'")
        return value

    @field_validator("n_values")
    @classmethod
    def _powers_of_two(cls, values: List[int]) -> List[int]:
        for n in values:
            if n < 1 or n & (n - 1):
                raise ValueError(f"N={n} is not a power of two")
            if n < MIN_GRID_SIZE:
                raise ValueError(f"N={n} is below the smallest grid ({MIN_GRID_SIZE})")
        return values

    @field_validator("dim")
    @classmethod
    def _dim(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        return value

    @field_validator("op")
    @classmethod
    def _op(cls, value: str) -> str:
        if value not in ("bd", "v2", "control", "sine"):
            raise ValueError(f"unknown counterexample operator '{value}'")
        return value

    @field_validator("p", "q", "s")
    @classmethod
    def _input_exponent(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 1:
            raise ValueError("input exponents must satisfy 1 < p ≤ ∞")
        return value

    @model_validator(mode="after")
    def _holder_relation(self) -> "ExperimentConfig":
        total = 1 / self.p + 1 / self.q + (1 / self.s if self.s is not None else 0.0)
        if not math.isclose(1 / self.r, total, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(
                "Hölder relation 1/r = 1/p + 1/q violated "
                f"(1/r={1 / self.r:.6g}, sum={total:.6g})"
            )
        if len(self.theta) != 3 or not math.isclose(sum(self.theta), 1.0):
            raise ValueError("theta needs three weights summing to 1")
        if any(not 0 <= t < 1 for t in self.theta):
            raise ValueError("each theta weight must lie in [0, 1)")
        return self

    @property
    def exponents(self) -> Tuple[float, float, float]:
        return self.p, self.q, self.r

    def output_path(self) -> Path:
        return Path(self.out_dir) / self.out

    def echo(self) -> Dict[str, Any]:
        """Configuration as a flat mapping for the run manifest."""
        return self.model_dump()


def read_config_file(path: Path) -> Dict[str, str]:
    """Read a key=value configuration file."""
    values: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValidationFailure(
                        f"{path}:{lineno}: expected key=value, got '{line}'"
                    )
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
        logger.info(f"✅ Loaded {len(values)} settings from {path}")
        return values
    except OSError as e:
        logger.error(f"❌ Failed to read config file {path}: {e}")
        raise


def environment_overrides(
    environ: Optional[Mapping[str, str]] = None,
) -> Dict[str, str]:
    """Collect overrides from BIPARAM_* environment variables."""
    env = os.environ if environ is None else environ
    return {field: env[var] for var, field in ENV_OVERRIDES.items() if env.get(var)}


def _coerce(key: str, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    if key == "n_values":
        return parse_n_spec(value)
    if key == "theta":
        return [parse_number(part) for part in value.split(",")]
    if key in ("p", "q", "s", "r", "alpha", "beta", "threshold", "epsilon"):
        return parse_number(value)
    if key == "domain_length":
        return parse_number(value)
    if key == "plot":
        return value.lower() in ("1", "true", "yes", "on")
    return value


def build_config(
    subcommand: str,
    file_values: Optional[Mapping[str, str]] = None,
    cli_values: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Merge defaults, config file, environment and flags (in rising precedence)."""
    merged: Dict[str, Any] = {"subcommand": subcommand}
    for layer in (file_values or {}, environment_overrides(environ), cli_values or {}):
        for key, value in layer.items():
            if value is None:
                continue
            merged[key] = _coerce(key, value)
    return ExperimentConfig(**merged)
