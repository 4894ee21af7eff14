"""
Tests for the reference-sweep reproduction script.
"""

from unittest.mock import patch

import pandas as pd
import pytest

from damctl.control import Regime, SweepRow
from reproduce_table import reproduce_table


class TestReproduceTable:
    """Tests for reproduce_table()."""

    def test_writes_comparison_csv(self, tmp_path):
        """Every tabulated j2 is reproduced within the tolerance."""
        path = tmp_path / "sweep.csv"

        table = reproduce_table(str(path))

        frame = pd.read_csv(path)
        assert len(table) == 19
        assert list(frame.columns) == ["j2", "regime", "C", "reference_C", "within_tol"]
        assert frame["within_tol"].all()
        assert frame["C"].iloc[0] == pytest.approx(0.2, abs=0.01)

    def test_flags_rows_out_of_tolerance(self, tmp_path):
        """Rows far from the tabulated value are marked."""
        rows = [SweepRow(1.06, Regime.UPPER, 0.5, 2.4)]

        with (
            patch("reproduce_table.sweep_j2", return_value=rows),
            patch("reproduce_table.threshold_j2", return_value=1.333),
        ):
            table = reproduce_table(str(tmp_path / "sweep.csv"))

        assert table == [
            {"j2": 1.06, "regime": "upper", "C": 0.5, "reference_C": 0.2, "within_tol": False}
        ]
