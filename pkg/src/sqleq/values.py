"""Concrete value domain and scalar operations.

Values are plain Python objects: ``None`` for NULL, ``int``, ``str``, and
:class:`Date`. Every cast and string/date operation here is total —
ill-typed or out-of-range inputs yield NULL (``None``) rather than raising —
except :func:`julian_day`, which demands a valid date by contract.

Three-valued logic: predicate-level helpers return ``True``/``False``/``None``
where ``None`` is SQL's *unknown*. Callers collapse unknown to false at
row-decision points only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

MIN_YEAR = 0
MAX_YEAR = 9999

_INT_RE = re.compile(r"-?[0-9]+\Z")
_ISO_DATE_RE = re.compile(r"([0-9]{1,4})-([0-9]{2})-([0-9]{2})\Z")


@dataclass(frozen=True, order=True)
class Date:
    """A calendar date; field order gives chronological comparison."""

    year: int
    month: int
    day: int

    def iso(self) -> str:
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"


Value = None | int | str | Date


def is_leap_year(y: int) -> bool:
    return y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)


def days_in_month(y: int, m: int) -> int:
    if m == 2:
        return 29 if is_leap_year(y) else 28
    return 30 if m in (4, 6, 9, 11) else 31


def is_valid_date(y: int, m: int, d: int) -> bool:
    return (
        MIN_YEAR <= y <= MAX_YEAR
        and 1 <= m <= 12
        and 1 <= d <= days_in_month(y, m)
    )


class DomainError(Exception):
    """Raised when an operation's domain precondition is violated."""


# ---------------------------------------------------------------------------
# Integer helpers

def fdiv(x: int, y: int) -> Value:
    """Floor division; division by zero is NULL."""
    if y == 0:
        return None
    return x // y


def fmod(x: int, y: int) -> Value:
    if y == 0:
        return None
    return x % y


# ---------------------------------------------------------------------------
# Casts

def str_to_int(s: str) -> int:
    """Digits-only (optionally '-'-signed) strings parse; all else is 0."""
    if _INT_RE.match(s) and s != "-":
        return int(s)
    return 0


def int_to_str(v: int) -> str:
    return str(v)


def date_to_int(d: Date) -> int:
    return d.year * 10_000 + d.month * 100 + d.day


def int_to_date(v: int) -> Value:
    y, rem = divmod(v, 10_000)
    m, d = divmod(rem, 100)
    if is_valid_date(y, m, d):
        return Date(y, m, d)
    return None


def date_to_str(d: Date) -> str:
    # Month/day are zero-padded; the year prints as-is.
    return f"{d.year}-{d.month:02d}-{d.day:02d}"


def str_to_date(s: str) -> Value:
    m = _ISO_DATE_RE.match(s)
    if m:
        y, mo, dy = int(m.group(1)), int(m.group(2)), int(m.group(3))
        return Date(y, mo, dy) if is_valid_date(y, mo, dy) else None
    return int_to_date(str_to_int(s))


def cast_to_int(v: Value) -> Value:
    if v is None:
        return None
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return str_to_int(v)
    return date_to_int(v)


def cast_to_str(v: Value) -> Value:
    if v is None:
        return None
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return int_to_str(v)
    return date_to_str(v)


def cast_to_date(v: Value) -> Value:
    if v is None:
        return None
    if isinstance(v, Date):
        return v
    if isinstance(v, int):
        return int_to_date(v)
    return str_to_date(v)


# ---------------------------------------------------------------------------
# String / date operations

def substr(s: Value, start: Value, length: Value) -> Value:
    """1-indexed substring; negative start counts from the end.

    Non-positive length yields "". A NULL subject, or a start/length that is
    not an integer (NULL, string, date), yields NULL.
    """
    if s is None:
        return None
    s = cast_to_str(s)
    if not isinstance(start, int) or not isinstance(length, int):
        return None
    if length <= 0:
        return ""
    n = len(s)
    if start > 0:
        v = start - 1
    elif start < 0:
        v = n + start
    else:
        v = -1
    end = min(n, v + length)
    return s[max(v, 0):max(end, 0)]


def strftime_component(fmt: str, v: Value) -> Value:
    """Select the year/month/day component of a date-castable value as an int."""
    if v is None:
        return None
    d = cast_to_date(v)
    if d is None:
        return None
    if fmt == "%Y":
        return d.year
    if fmt in ("%M", "%m"):
        return d.month
    if fmt == "%d":
        return d.day
    raise DomainError(f"unsupported strftime format {fmt!r}")


def julian_day(v: Value) -> int:
    """Julian day number of a date, scaled by 2 so the .5 offset stays integral.

    The true julian day of date d is ``julian_day(d) / 2`` (always *.5).
    """
    if not isinstance(v, Date):
        raise DomainError(f"julian_day requires a Date, got {v!r}")
    y, m, d = v.year, v.month, v.day
    if m <= 2:
        y -= 1
        m += 12
    c = 2 - y // 100 + y // 400
    a1 = (36525 * (y + 4716)) // 100
    a2 = (306001 * (m + 1)) // 10_000
    # a1 + a2 + d + c - 1524.5, doubled.
    return 2 * (a1 + a2 + d + c) - 3049


def julian_to_float(scaled: int) -> float:
    return scaled / 2.0


def next_day(d: Date) -> Value:
    if d.day < days_in_month(d.year, d.month):
        return Date(d.year, d.month, d.day + 1)
    if d.month < 12:
        return Date(d.year, d.month + 1, 1)
    if d.year < MAX_YEAR:
        return Date(d.year + 1, 1, 1)
    return None


def like_match(pattern: str, v: Value) -> Value:
    """SQL LIKE with '%' (any sequence) and '_' (any one char); case-sensitive."""
    if v is None or pattern is None:
        return None
    s = cast_to_str(v)
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.fullmatch("".join(parts), s, re.DOTALL) is not None


def prefix_of(prefix: str, v: Value) -> Value:
    if v is None or prefix is None:
        return None
    return cast_to_str(v).startswith(prefix)


def suffix_of(suffix: str, v: Value) -> Value:
    if v is None or suffix is None:
        return None
    return cast_to_str(v).endswith(suffix)


# ---------------------------------------------------------------------------
# Three-valued logic

def kleene_not(a: bool | None) -> bool | None:
    return None if a is None else not a


def kleene_and(a: bool | None, b: bool | None) -> bool | None:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def kleene_or(a: bool | None, b: bool | None) -> bool | None:
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def is_true(a: bool | None) -> bool:
    """Collapse unknown to false — the row-decision rule."""
    return a is True


def truth_of(v: Value) -> bool | None:
    """Boolean coercion of a value used in predicate position."""
    if v is None:
        return None
    return cast_to_int(v) != 0


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compare_values(op: str, a: Value, b: Value) -> bool | None:
    """Three-valued comparison with cross-type coercion.

    Coercions: int⊙str casts the string to int; date⊙str casts the string to
    date (an unparsable string compares as unknown); int⊙date casts the date
    to its 8-digit integer form.
    """
    if a is None or b is None:
        return None
    if isinstance(a, int) and isinstance(b, str):
        b = str_to_int(b)
    elif isinstance(a, str) and isinstance(b, int):
        a = str_to_int(a)
    elif isinstance(a, Date) and isinstance(b, str):
        b = str_to_date(b)
        if b is None:
            return None
    elif isinstance(a, str) and isinstance(b, Date):
        a = str_to_date(a)
        if a is None:
            return None
    elif isinstance(a, Date) and isinstance(b, int):
        a = date_to_int(a)
    elif isinstance(a, int) and isinstance(b, Date):
        b = date_to_int(b)
    return _CMP[op](a, b)
