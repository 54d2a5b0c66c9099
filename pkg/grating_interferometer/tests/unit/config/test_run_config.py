"""Tests for the run configuration loader."""

import tempfile
import textwrap
import unittest
from pathlib import Path

import numpy as np

from grating_interferometer.config.run_config import (
    DEFAULT_RUN_CONFIG,
    RunConfig,
    load_run_config,
    parse_run_config,
)
from grating_interferometer.errors import ConfigError


class TestRunConfig(unittest.TestCase):
    """Parsing, strictness and echo of run configurations."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.config_path = Path(self.temp_dir.name) / "run.yaml"

    def tearDown(self):
        self.temp_dir.cleanup()

    def _write(self, text: str) -> Path:
        self.config_path.write_text(textwrap.dedent(text), encoding="utf-8")
        return self.config_path

    def test_default_file_matches_apparatus(self):
        config = load_run_config(DEFAULT_RUN_CONFIG)
        geometry = config.to_geometry()
        self.assertEqual(geometry.leg_lengths, (0.24, 0.03, 0.0254, 0.0254, 0.27))
        self.assertEqual(geometry.grating_period, 100e-9)
        self.assertEqual(geometry.beam.kinetic_energy, 10e3)
        self.assertEqual(config.beam.sweep(), [6e3, 8e3, 10e3])
        self.assertEqual(config.engine.kind, "both")

    def test_missing_sections_take_defaults(self):
        config = load_run_config(self._write("beam:\n  energy: 6 keV\n"))
        self.assertEqual(config.beam.energy, 6e3)
        self.assertEqual(config.geometry.grating_period, 100e-9)
        self.assertEqual(config.classical.n_source_samples, 501)
        self.assertEqual(config.beam.sweep(), [6e3])

    def test_unknown_key_names_key_and_line(self):
        path = self._write(
            """\
            geometry:
              grating_period: 100 nm
              colimator_width: 1.5 um
            """
        )
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertEqual(ctx.exception.key, "geometry.colimator_width")
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("geometry.colimator_width (line 3)", str(ctx.exception))

    def test_unknown_section_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self._write("detector:\n  width: 5 um\n"))
        self.assertEqual(ctx.exception.key, "detector")
        self.assertEqual(ctx.exception.line, 1)

    def test_bare_number_rejected_for_dimensional_key(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self._write("beam:\n  energy: 10000\n"))
        self.assertEqual(ctx.exception.key, "beam.energy")
        self.assertEqual(ctx.exception.line, 2)

    def test_list_item_error_points_at_item(self):
        path = self._write(
            """\
            beam:
              energies:
                - 6 keV
                - 8 kev
            """
        )
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertEqual(ctx.exception.key, "beam.energies.1")
        self.assertEqual(ctx.exception.line, 4)

    def test_empty_file_is_a_schema_error(self):
        with self.assertRaises(ConfigError):
            load_run_config(self._write(""))
        with self.assertRaises(ConfigError):
            load_run_config(self._write("# only a comment\n"))

    def test_non_mapping_top_level_rejected(self):
        with self.assertRaises(ConfigError):
            load_run_config(self._write("- 1\n- 2\n"))

    def test_yaml_syntax_error_has_line(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self._write("beam:\n  energy: [10 keV\n"))
        self.assertIsNotNone(ctx.exception.line)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_run_config(Path(self.temp_dir.name) / "absent.yaml")

    def test_open_fraction_bounds(self):
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self._write("geometry:\n  open_fraction: 1.0\n"))
        self.assertEqual(ctx.exception.key, "geometry.open_fraction")

    def test_echo_round_trips_to_equal_config(self):
        config = load_run_config(DEFAULT_RUN_CONFIG)
        echoed = parse_run_config(config.to_yaml())
        self.assertEqual(echoed, config)
        self.assertIn("grating_period: 1e-07 m", config.to_yaml())

    def test_shift_grid_and_positions(self):
        config = RunConfig()
        shifts = config.scan.shifts()
        self.assertEqual(shifts.size, 31)
        self.assertAlmostEqual(shifts[-1], 150e-9, delta=1e-18)
        np.testing.assert_allclose(np.diff(shifts), 5e-9, rtol=1e-9)
        positions = config.scan.positions()
        self.assertEqual(positions.size, 25)
        self.assertAlmostEqual(positions[12], 0.0, delta=1e-18)

    def test_period_bounds_default_to_quarter_and_double_period(self):
        self.assertEqual(RunConfig().period_bounds(), (25e-9, 200e-9))

    def test_talbot_z_max_defaults_to_two_talbot_lengths(self):
        self.assertAlmostEqual(RunConfig().talbot_z_max(), 2 * 8.1936e-4, delta=2e-6)

    def test_with_overrides_replaces_only_named_fields(self):
        config = RunConfig().with_overrides(runtime={"seed": 7})
        self.assertEqual(config.runtime.seed, 7)
        self.assertEqual(config.runtime.workers, 1)


if __name__ == "__main__":
    unittest.main()
