"""
Artifact storage for experiment runs: BPGF grid files, CSV tables, manifests,
run-length encoded masks and plot scripts.
"""

import csv
import logging
import os
import struct
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import GridFunction

logger = logging.getLogger(__name__)

# BPGF header: magic, dim, N, L (little-endian)
BPGF_MAGIC = b"BPGF"
BPGF_HEADER = struct.Struct("<4sIId")

SUMMARY_HEADER = ["experiment", "metric", "value", "passed"]


def format_cell(value: Any) -> str:
    """Fixed formatting so identical runs produce identical bytes."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    return str(value)


class ArtifactStore:
    """Reads and writes every file an experiment produces."""

    def save_grid(self, f: GridFunction, path: Path) -> Path:
        """Write a GridFunction in the BPGF binary format."""
        path = Path(path)
        try:
            header = BPGF_HEADER.pack(
                BPGF_MAGIC, f.dim, f.n_samples, float(f.domain_length)
            )
            samples = np.ascontiguousarray(f.samples, dtype="<c16").ravel()
            interleaved = np.empty(2 * samples.size, dtype="<f8")
            interleaved[0::2] = samples.real
            interleaved[1::2] = samples.imag
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(interleaved.tobytes())
            logger.info(f"✅ Saved BPGF grid to {path}")
            return path
        except OSError as e:
            logger.error(f"❌ Failed to save grid to {path}: {e}")
            raise

    def load_grid(self, path: Path) -> GridFunction:
        """Read a GridFunction from a BPGF file."""
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as e:
            logger.error(f"❌ Failed to load grid from {path}: {e}")
            raise
        if len(raw) < BPGF_HEADER.size:
            raise ValidationFailure(f"{path} is too short to be a BPGF file")
        magic, dim, n, length = BPGF_HEADER.unpack_from(raw)
        if magic != BPGF_MAGIC:
            raise ValidationFailure(f"{path} has bad magic {magic!r}")
        data = np.frombuffer(raw, dtype="<f8", offset=BPGF_HEADER.size)
        expected = 2 * n**dim
        if data.size != expected:
            raise ValidationFailure(
                f"{path} holds {data.size} doubles, expected {expected}"
            )
        samples = (data[0::2] + 1j * data[1::2]).reshape((n,) * dim)
        logger.info(f"✅ Loaded BPGF grid from {path} (dim={dim}, N={n})")
        return GridFunction(dim=dim, n_samples=n, samples=samples, domain_length=length)

    def write_grid_csv(self, f: GridFunction, path: Path) -> Path:
        """Export samples as (index, re, im) rows in flat C order."""
        flat = f.samples.ravel()
        rows = [(i, v.real, v.imag) for i, v in enumerate(flat)]
        return self.write_table(path, ["index", "re", "im"], rows)

    def write_table(
        self, path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> Path:
        """Write a CSV table with fixed float formatting."""
        path = Path(path)
        try:
            if path.parent and not path.parent.exists():
                path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                count = 0
                for row in rows:
                    writer.writerow([format_cell(v) for v in row])
                    count += 1
            logger.info(f"✅ Wrote {count} rows to {path}")
            return path
        except OSError as e:
            logger.error(f"❌ Failed to write table {path}: {e}")
            raise

    def read_table(self, path: Path) -> Tuple[List[str], List[List[str]]]:
        """Read a CSV table back as header and string rows."""
        path = Path(path)
        try:
            with open(path, "r", newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                rows = list(reader)
        except OSError as e:
            logger.error(f"❌ Failed to read table {path}: {e}")
            raise
        if not rows:
            raise ValidationFailure(f"{path} is empty")
        return rows[0], rows[1:]

    def write_summary(
        self, path: Path, experiment: str, metrics: Iterable[Tuple[str, Any, bool]]
    ) -> Path:
        """Write the per-run summary table (experiment, metric, value, passed)."""
        rows = [(experiment, name, value, passed) for name, value, passed in metrics]
        return self.write_table(path, SUMMARY_HEADER, rows)

    def write_manifest(
        self,
        path: Path,
        config: Mapping[str, Any],
        version: str,
        wall_time: float,
        notes: Optional[Mapping[str, Any]] = None,
    ) -> Path:
        """Write the plain-text run manifest."""
        path = Path(path)
        lines = [f"version = {version}", f"wall_time_s = {wall_time:.3f}"]
        lines += [f"config.{key} = {value}" for key, value in sorted(config.items())]
        if notes:
            lines += [f"{key} = {value}" for key, value in notes.items()]
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
            logger.info(f"✅ Wrote run manifest {path}")
            return path
        except OSError as e:
            logger.error(f"❌ Failed to write manifest {path}: {e}")
            raise

    def write_mask_rle(self, path: Path, mask: np.ndarray) -> Path:
        """Export a boolean grid as run-length encoded rows (row, start, length)."""
        mask = np.atleast_2d(np.asarray(mask, dtype=bool))
        rows = []
        for r, line in enumerate(mask):
            padded = np.concatenate(([False], line, [False])).astype(np.int8)
            edges = np.flatnonzero(np.diff(padded))
            for start, stop in zip(edges[0::2], edges[1::2]):
                rows.append((r, int(start), int(stop - start)))
        return self.write_table(path, ["row", "start", "length"], rows)

    def read_mask_rle(self, path: Path, shape: Tuple[int, ...]) -> np.ndarray:
        """Rebuild a boolean grid from its run-length encoding."""
        _, rows = self.read_table(path)
        mask = np.zeros(shape, dtype=bool).reshape(-1, shape[-1])
        for r, start, length in rows:
            mask[int(r), int(start) : int(start) + int(length)] = True
        return mask.reshape(shape)

    def write_plot_script(
        self, csv_path: Path, x_column: str, y_columns: Sequence[str], title: str
    ) -> Path:
        """Emit a gnuplot script that plots columns of the given CSV."""
        csv_path = Path(csv_path)
        header, _ = self.read_table(csv_path)
        missing = [c for c in (x_column, *y_columns) if c not in header]
        if missing:
            raise ValidationFailure(f"{csv_path} has no column(s) {', '.join(missing)}")
        x_idx = header.index(x_column) + 1
        plots = ", ".join(
            f"'{csv_path.name}' using {x_idx}:{header.index(c) + 1} "
            f"with linespoints title '{c}'"
            for c in y_columns
        )
        script = "\n".join(
            [
                "set datafile separator ','",
                "set key autotitle columnhead",
                f"set title '{title}'",
                f"set xlabel '{x_column}'",
                "set terminal pngcairo size 900,600",
                f"set output '{csv_path.stem}.png'",
                f"plot {plots}",
                "",
            ]
        )
        gp_path = csv_path.with_suffix(".gp")
        try:
            with open(gp_path, "w", encoding="utf-8") as fh:
                fh.write(script)
            logger.info(f"✅ Wrote plot script {gp_path}")
            return gp_path
        except OSError as e:
            logger.error(f"❌ Failed to write plot script {gp_path}: {e}")
            raise

    def remove(self, path: Path) -> None:
        """Delete an artifact if it exists."""
        try:
            if os.path.isfile(path):
                os.remove(path)
                logger.info(f"🗑️ Removed artifact {path}")
        except OSError as e:
            logger.warning(f"⚠️  Could not remove {path}: {e}")


# Global artifact store instance
artifact_store = ArtifactStore()
