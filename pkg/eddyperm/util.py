"""File, TOML and unit helpers."""

from decimal import Decimal
from pathlib import Path
import os
import tomli


def toml_load(file: os.PathLike) -> dict:
    """Load TOML file as a dictionary."""
    return tomli.loads(file_load(file))


def file_load(file: os.PathLike) -> str:
    """Loads *file* and returns the contents as a string."""
    with open(file, "r", encoding="utf-8") as f:
        d = f.read()
    return d


def file_dump(file: os.PathLike, d: str, clear: bool = True):
    """Saves the string *d* to *file*.

    Will overwrite the file if *clear* is True, otherwise will append to it. Missing
    parent folders are created.
    """
    Path(file).parent.mkdir(parents=True, exist_ok=True)
    with open(file, "w" if clear else "a", encoding="utf-8", newline="\n") as f:
        f.write(d)


def shift_decimal(value: float, exponent: int) -> float:
    """Multiply *value* by 10**exponent in decimal arithmetic.

    Unit conversions (mm to m and back) go through the shortest decimal representation
    so that short decimals like 11.4 survive a round trip unchanged.
    """
    return float(Decimal(repr(float(value))).scaleb(exponent))
