import pytest

from grating_interferometer.config.units import format_quantity, parse_quantity


@pytest.mark.unit
@pytest.mark.parametrize(
    ("text", "family", "expected"),
    [
        ("2.54 cm", "length", 0.0254),
        ("100 nm", "length", 100e-9),
        ("1.5 um", "length", 1.5e-6),
        ("1.5 µm", "length", 1.5e-6),
        ("24cm", "length", 0.24),
        ("10 keV", "energy", 10e3),
        ("0 eV", "energy", 0.0),
        ("200 /s", "rate", 200.0),
        ("250 ms", "time", 0.25),
        ("-25 nm", "length", -25e-9),
        ("1e-3 m", "length", 1e-3),
    ],
)
def test_parse_quantity(text, family, expected):
    assert parse_quantity(text, family) == expected


@pytest.mark.unit
def test_decimal_conversion_gives_nearest_float():
    # 2.54 * 0.01 in binary floating point is not the float nearest 0.0254
    assert parse_quantity("2.54 cm", "length") == 0.0254
    assert parse_quantity("0.1 nm", "length") == 1e-10


@pytest.mark.unit
@pytest.mark.parametrize("value", [10, 1.5, "10", True, None, "10 furlongs", "keV", "1.2.3 nm"])
def test_parse_quantity_rejects_bare_or_unknown(value):
    with pytest.raises(ValueError):
        parse_quantity(value, "energy" if value == "keV" else "length")


@pytest.mark.unit
def test_energy_unit_is_not_a_length():
    with pytest.raises(ValueError, match="unknown length unit"):
        parse_quantity("10 keV", "length")


@pytest.mark.unit
@pytest.mark.parametrize("value", [0.0254, 1.2204714e-11, 5e-9, 3.0e-6, 123456.789])
def test_format_quantity_round_trips(value):
    assert parse_quantity(format_quantity(value, "length"), "length") == value
