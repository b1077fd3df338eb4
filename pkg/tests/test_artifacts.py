"""Tests for artifact storage."""

import numpy as np
import pytest

from biparam_paraproducts.artifacts import (
    BPGF_HEADER,
    SUMMARY_HEADER,
    ArtifactStore,
    format_cell,
)
from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import make_grid_function


@pytest.fixture
def store():
    return ArtifactStore()


class TestGridFiles:
    """Tests for the BPGF binary format."""

    def test_save_and_load(self, store, tmp_path):
        """Test that a 2D complex grid survives the file format."""
        f = make_grid_function(2, 8, 2.5, "band_limited_random", seed=1)
        path = store.save_grid(f, tmp_path / "f.bpgf")
        loaded = store.load_grid(path)
        assert (loaded.dim, loaded.n_samples) == (2, 8)
        assert loaded.domain_length == 2.5
        assert np.array_equal(loaded.samples, f.samples)

    def test_layout(self, store, tmp_path):
        """Test the header and interleaved little-endian payload."""
        f = make_grid_function(1, 8, 1.0, "constant", c=1 + 2j)
        path = store.save_grid(f, tmp_path / "c.bpgf")
        raw = path.read_bytes()
        assert raw[:4] == b"BPGF"
        assert len(raw) == BPGF_HEADER.size + 16 * 8
        payload = np.frombuffer(raw, dtype="<f8", offset=BPGF_HEADER.size)
        assert payload[:2].tolist() == [1.0, 2.0]

    def test_bad_magic(self, store, tmp_path):
        """Test that foreign files are refused."""
        path = tmp_path / "x.bpgf"
        path.write_bytes(b"NOPE" + bytes(BPGF_HEADER.size))
        with pytest.raises(ValidationFailure, match="bad magic"):
            store.load_grid(path)

    def test_truncated_payload(self, store, tmp_path):
        """Test that a short payload is refused."""
        f = make_grid_function(1, 8, 1.0, "constant")
        path = store.save_grid(f, tmp_path / "c.bpgf")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValidationFailure, match="expected 16"):
            store.load_grid(path)

    def test_missing_file(self, store, tmp_path):
        """Test that I/O errors propagate."""
        with pytest.raises(OSError):
            store.load_grid(tmp_path / "absent.bpgf")


class TestTables:
    """Tests for CSV tables, summaries and manifests."""

    def test_format_cell(self):
        """Test the fixed cell formatting."""
        assert format_cell(True) == "true"
        assert format_cell(np.int64(7)) == "7"
        assert format_cell(0.5) == "5.000000000000e-01"
        assert format_cell("bd") == "bd"

    def test_write_and_read(self, store, tmp_path):
        """Test a table written into a new directory."""
        path = store.write_table(tmp_path / "sub" / "t.csv", ["a", "b"], [(1, 0.25)])
        header, rows = store.read_table(path)
        assert header == ["a", "b"]
        assert rows == [["1", "2.500000000000e-01"]]

    def test_empty_table(self, store, tmp_path):
        """Test that a file without a header is refused."""
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValidationFailure):
            store.read_table(path)

    def test_summary(self, store, tmp_path):
        """Test the summary columns."""
        path = store.write_summary(tmp_path / "s.csv", "journe", [("c", 2.0, False)])
        header, rows = store.read_table(path)
        assert header == SUMMARY_HEADER
        assert rows == [["journe", "c", "2.000000000000e+00", "false"]]

    def test_manifest(self, store, tmp_path):
        """Test the sorted config echo and the notes."""
        path = store.write_manifest(
            tmp_path / "m.txt", {"seed": 3, "n_values": [16]}, "0.1.0", 1.5, {"k": "v"}
        )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == [
            "version = 0.1.0",
            "wall_time_s = 1.500",
            "config.n_values = [16]",
            "config.seed = 3",
            "k = v",
        ]

    def test_grid_csv(self, store, tmp_path):
        """Test the flat (index, re, im) export."""
        f = make_grid_function(2, 8, 1.0, "constant", c=1j)
        _, rows = store.read_table(store.write_grid_csv(f, tmp_path / "g.csv"))
        assert len(rows) == 64
        assert rows[5] == ["5", "0.000000000000e+00", "1.000000000000e+00"]


class TestMasks:
    """Tests for run-length encoded masks."""

    def test_round_trip(self, store, tmp_path):
        """Test a 2D mask with several runs per row."""
        mask = np.zeros((4, 8), dtype=bool)
        mask[0, 1:3] = True
        mask[0, 5:8] = True
        mask[3, :] = True
        path = store.write_mask_rle(tmp_path / "m.csv", mask)
        _, rows = store.read_table(path)
        assert rows == [["0", "1", "2"], ["0", "5", "3"], ["3", "0", "8"]]
        assert np.array_equal(store.read_mask_rle(path, mask.shape), mask)


class TestPlotScripts:
    """Tests for gnuplot script emission."""

    def test_script(self, store, tmp_path):
        """Test the column references of the plot line."""
        csv_path = store.write_table(tmp_path / "g.csv", ["N", "ratio", "lnN"], [])
        gp = store.write_plot_script(csv_path, "lnN", ["ratio"], "control")
        text = gp.read_text(encoding="utf-8")
        assert gp == tmp_path / "g.gp"
        assert "plot 'g.csv' using 3:2 with linespoints title 'ratio'" in text
        assert "set output 'g.png'" in text

    def test_missing_column(self, store, tmp_path):
        """Test that unknown columns are refused."""
        csv_path = store.write_table(tmp_path / "g.csv", ["N", "ratio"], [])
        with pytest.raises(ValidationFailure, match="lnN"):
            store.write_plot_script(csv_path, "lnN", ["ratio"], "control")

    def test_remove(self, store, tmp_path):
        """Test that removal deletes files and ignores absent ones."""
        path = tmp_path / "old.gp"
        path.write_text("plot x", encoding="utf-8")
        store.remove(path)
        store.remove(path)
        assert not path.exists()
