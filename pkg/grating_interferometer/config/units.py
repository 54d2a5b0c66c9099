"""Parsing and formatting of unit-suffixed quantities used in run configs.

Values such as ``"2.54 cm"`` or ``"10 keV"`` are converted to SI (energies to
electron-volts) through ``decimal.Decimal`` so that the resulting float is the
one nearest to the exact decimal value.
"""

import re
from decimal import Decimal, InvalidOperation
from typing import Annotated, Any, Callable, Dict

from pydantic import BeforeValidator

LENGTH_UNITS: Dict[str, Decimal] = {
    "m": Decimal("1"),
    "cm": Decimal("1e-2"),
    "mm": Decimal("1e-3"),
    "um": Decimal("1e-6"),
    "µm": Decimal("1e-6"),
    "nm": Decimal("1e-9"),
    "pm": Decimal("1e-12"),
}

ENERGY_UNITS: Dict[str, Decimal] = {
    "eV": Decimal("1"),
    "keV": Decimal("1e3"),
    "MeV": Decimal("1e6"),
}

TIME_UNITS: Dict[str, Decimal] = {
    "s": Decimal("1"),
    "ms": Decimal("1e-3"),
    "us": Decimal("1e-6"),
    "µs": Decimal("1e-6"),
}

RATE_UNITS: Dict[str, Decimal] = {
    "/s": Decimal("1"),
    "Hz": Decimal("1"),
    "kHz": Decimal("1e3"),
}

# SI unit each family is echoed in
CANONICAL_UNIT = {"length": "m", "energy": "eV", "time": "s", "rate": "/s"}

_QUANTITY_RE = re.compile(
    r"^\s*(?P<value>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)\s*(?P<unit>\S+)\s*$"
)

_FAMILIES = {
    "length": LENGTH_UNITS,
    "energy": ENERGY_UNITS,
    "time": TIME_UNITS,
    "rate": RATE_UNITS,
}


def parse_quantity(text: Any, family: str) -> float:
    """
    Convert a unit-suffixed string to a float in the family's SI unit.

    Args:
        text: Value such as ``"1.5 um"``. Bare numbers are rejected.
        family: One of ``length``, ``energy``, ``time``, ``rate``.

    Returns:
        The value in metres, electron-volts, seconds or counts per second.

    Raises:
        ValueError: If the text has no recognised unit for the family.
    """
    units = _FAMILIES[family]
    if isinstance(text, bool) or not isinstance(text, str):
        raise ValueError(
            f"expected a {family} with a unit suffix ({', '.join(units)}), got {text!r}"
        )
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise ValueError(f"cannot parse {family} {text!r}; expected e.g. '10 {CANONICAL_UNIT[family]}'")
    unit = match.group("unit")
    if unit not in units:
        raise ValueError(
            f"unknown {family} unit {unit!r} in {text!r}; allowed: {', '.join(units)}"
        )
    try:
        value = Decimal(match.group("value")) * units[unit]
    except InvalidOperation as e:
        raise ValueError(f"invalid number in {text!r}") from e
    return float(value)


def format_quantity(value: float, family: str) -> str:
    """Render an SI value so that ``parse_quantity`` returns it unchanged."""
    return f"{value!r} {CANONICAL_UNIT[family]}"


def _parser(family: str) -> Callable[[Any], float]:
    def _parse(value: Any) -> float:
        return parse_quantity(value, family)

    return _parse


Length = Annotated[float, BeforeValidator(_parser("length"))]
Energy = Annotated[float, BeforeValidator(_parser("energy"))]
Duration = Annotated[float, BeforeValidator(_parser("time"))]
Rate = Annotated[float, BeforeValidator(_parser("rate"))]
