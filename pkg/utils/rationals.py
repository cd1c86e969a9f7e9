import re
from fractions import Fraction
from numbers import Rational
from typing import List, Union

RationalLike = Union[int, Fraction, str, float]

_RATIONAL_TEXT = re.compile(r'^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?(/[+-]?\d+)?$')


def clean_number_text(text: str) -> str:
    """Normalize user-typed numeric text (unicode minus, spaces)"""
    text = text.replace("−", "-")
    return re.sub(r'\s+', '', text)


def parse_rational(value: RationalLike) -> Fraction:
    """Convert a literal to an exact Fraction.

    Strings may be integers, decimals ("0.1" -> 1/10, no binary rounding) or
    "p/q". Floats are converted from their exact binary encoding.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a rational number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"not a finite number: {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        text = clean_number_text(value)
        if not _RATIONAL_TEXT.match(text):
            raise ValueError(f"not a rational number: {value!r}")
        try:
            return Fraction(text)
        except ZeroDivisionError:
            raise ValueError(f"zero denominator: {value!r}")
        except ValueError:
            raise ValueError(f"not a rational number: {value!r}")
    raise ValueError(f"not a rational number: {value!r}")


def format_rational(value: Fraction) -> str:
    """Canonical "p/q" text, q omitted when 1"""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_rational_list(text: str) -> List[Fraction]:
    """Parse a comma separated list such as "3,-1/2,0.25" """
    text = clean_number_text(text)
    if not text:
        return []
    return [parse_rational(part) for part in text.split(",")]
