import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pandas as pd

from grating_interferometer.storage.csv_sink import (
    CsvSink,
    read_config_echo,
    read_table,
    write_run_sidecar,
)

CONFIG_YAML = "beam:\n  energy: 10 keV\ngeometry:\n  grating_period: 1e-07 m\n"


class TestCsvSink(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.path = self.tmp / "nested" / "scan.csv"
        self.rows = pd.DataFrame({"shift_m": [0.0, 5e-9, 1e-8], "flux": [0.1, 1.0 / 3.0, 0.25]})

    def tearDown(self):
        self._tmp.cleanup()

    def test_creates_directory(self):
        CsvSink(self.path, ["shift_m", "flux"])
        self.assertTrue(self.path.parent.is_dir())

    def test_header_precedes_table(self):
        CsvSink(self.path, ["shift_m", "flux"]).write(self.rows, {"command": "scan", "seed": 3}, CONFIG_YAML)
        lines = self.path.read_text(encoding="utf-8").splitlines()
        self.assertTrue(lines[0].startswith("# tool: grating-interferometer "))
        self.assertEqual(lines[1], "# command: scan")
        self.assertEqual(lines[2], "# seed: 3")
        self.assertEqual(lines[3], "# config:")
        self.assertEqual(lines[4], "#   beam:")
        self.assertIn("shift_m,flux", lines)

    def test_floats_round_trip_exactly(self):
        CsvSink(self.path, ["shift_m", "flux"]).write(self.rows, {"contrast": 0.1 + 0.2})
        metadata, table = read_table(self.path)
        self.assertEqual(float(metadata["contrast"]), 0.1 + 0.2)
        self.assertEqual(table["flux"].tolist(), self.rows["flux"].tolist())
        self.assertIn("0.33333333333333331", self.path.read_text(encoding="utf-8"))

    def test_columns_follow_declared_order(self):
        CsvSink(self.path, ["flux", "shift_m", "fit"]).write(self.rows.to_dict("records"), {})
        _, table = read_table(self.path)
        self.assertEqual(list(table.columns), ["flux", "shift_m", "fit"])
        self.assertTrue(table["fit"].isna().all())

    def test_rewrite_is_byte_identical(self):
        sink = CsvSink(self.path, ["shift_m", "flux"])
        sink.write(self.rows, {"seed": 0}, CONFIG_YAML)
        first = self.path.read_bytes()
        sink.write(self.rows, {"seed": 0}, CONFIG_YAML)
        self.assertEqual(self.path.read_bytes(), first)

    def test_config_echo_round_trip(self):
        CsvSink(self.path, ["shift_m", "flux"]).write(self.rows, {"seed": 0}, CONFIG_YAML)
        self.assertEqual(read_config_echo(self.path), CONFIG_YAML)
        metadata, _ = read_table(self.path)
        self.assertNotIn("beam", metadata)

    def test_failed_write_keeps_old_file_and_no_temp(self):
        sink = CsvSink(self.path, ["shift_m", "flux"])
        sink.write(self.rows, {"seed": 0})
        before = self.path.read_bytes()
        with patch("grating_interferometer.storage.csv_sink.os.replace", side_effect=OSError("disk full")):
            with self.assertRaises(OSError):
                sink.write(self.rows, {"seed": 1})
        self.assertEqual(self.path.read_bytes(), before)
        self.assertEqual([p.name for p in self.path.parent.iterdir()], ["scan.csv"])

    def test_run_sidecar(self):
        sidecar = write_run_sidecar(self.path, {"wall_time_s": 1.5, "command": "scan"})
        self.assertEqual(sidecar.name, "scan.run.json")
        self.assertEqual(json.loads(sidecar.read_text(encoding="utf-8"))["wall_time_s"], 1.5)


if __name__ == "__main__":
    unittest.main()
