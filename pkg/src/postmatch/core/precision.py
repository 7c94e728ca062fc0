"""Extended precision scalars on the unit interval.

All quantile-space recursions run on gmpy2 ``mpfr`` numbers.  The helpers
here convert user input to ``mpfr`` at a chosen precision, format values as
decimal strings that round-trip exactly, and implement the precision policy
for long sessions.
"""

import math
from contextlib import contextmanager
from fractions import Fraction
from numbers import Integral

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionExhausted

DEFAULT_PRECISION = 128
GUARD_BITS = 32

_LOG10_2 = math.log10(2.0)


@contextmanager
def working_precision(bits):
    """Run a block with the gmpy2 context precision set to `bits`."""
    with gmpy2.context(gmpy2.get_context(), precision=int(bits)) as ctx:
        yield ctx


def current_precision():
    return gmpy2.get_context().precision


def to_mp(x, precision=None):
    """Convert a number to ``mpfr``.

    Floats are read through their shortest decimal representation, so
    ``to_mp(0.2)`` is the correctly rounded value of 1/5 rather than the
    binary double nearest to it.  Strings are parsed as decimals.

    Parameters
    ----------
    x : float, int, str, Fraction or mpfr
    precision : int, optional
        Target precision in bits; defaults to the current context.
    """
    if precision is None:
        precision = current_precision()
    if isinstance(x, UnitValue):
        x = x.value
    if isinstance(x, type(mpfr(0))):
        return mpfr(x, precision)
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, Integral):
        return mpfr(int(x), precision)
    if isinstance(x, Fraction):
        with working_precision(precision):
            return mpfr(x.numerator) / mpfr(x.denominator)
    if isinstance(x, str):
        return mpfr(x.strip(), precision)
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return mpfr(x, precision)
    return mpfr(repr(x), precision)


def format_mp(x):
    """Decimal string that parses back to the identical ``mpfr``.

    The number of significant digits is chosen from the value's own
    precision so that correctly rounded parsing at that precision recovers
    the bits exactly.
    """
    if not isinstance(x, type(mpfr(0))):
        x = to_mp(x)
    if gmpy2.is_nan(x):
        return "nan"
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    digits = int(math.ceil(x.precision * _LOG10_2)) + 2
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant[0] == "-":
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    if len(mant) == 1:
        return f"{sign}{mant}e{exp - 1}"
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1}"


def parse_mp(text, precision):
    """Inverse of :func:`format_mp` at a known precision."""
    return mpfr(text.strip(), int(precision))


def required_precision(n, rate, base=DEFAULT_PRECISION):
    """Bits needed to resolve intervals of width ``2**(-n*rate)``.

    Returns ``max(base, 2*(ceil(n*rate) + 32))``.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    need = 2 * (int(math.ceil(n * rate)) + GUARD_BITS)
    return max(int(base), need)


def check_horizon(n, rate, precision):
    """Refuse sessions whose target resolution exceeds the precision."""
    if n * rate > precision / 2 - GUARD_BITS:
        raise PrecisionExhausted(
            f"horizon n={n} at rate {rate:.4g} needs "
            f"{required_precision(n, rate)} bits, have {precision}")


def _coerce(other, precision):
    if isinstance(other, UnitValue):
        return other.value, other.precision
    return to_mp(other, precision), precision


class UnitValue:
    """Extended precision real constrained to ``[0, 1]``.

    Parameters
    ----------
    value : mpfr, float, int, str or Fraction
        The number.  Strings are parsed as decimals.
    precision : int
        Mantissa bits.

    Notes
    -----
    Arithmetic between two values is carried out at the larger of the two
    precisions.  A result outside ``[0, 1]`` raises ``ValueError``; use the
    raw ``value`` attribute for unrestricted intermediate arithmetic.
    """

    __slots__ = ("value", "precision")

    def __init__(self, value, precision=DEFAULT_PRECISION):
        precision = int(precision)
        if precision < 2:
            raise ValueError("precision must be at least 2 bits")
        v = to_mp(value, precision)
        if gmpy2.is_nan(v) or v < 0 or v > 1:
            raise ValueError(f"UnitValue out of [0, 1]: {v}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "precision", precision)

    def __setattr__(self, name, val):
        raise AttributeError("UnitValue is immutable")

    @classmethod
    def _raw(cls, v, precision):
        out = object.__new__(cls)
        if gmpy2.is_nan(v) or v < 0 or v > 1:
            raise ValueError(f"UnitValue out of [0, 1]: {v}")
        object.__setattr__(out, "value", v)
        object.__setattr__(out, "precision", precision)
        return out

    def _binary(self, other, op):
        ov, op_prec = _coerce(other, self.precision)
        prec = max(self.precision, op_prec)
        with working_precision(prec):
            v = op(mpfr(self.value), mpfr(ov))
        return UnitValue._raw(v, prec)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def complement(self):
        """Return ``1 - self`` exactly representable at the same precision."""
        with working_precision(self.precision):
            return UnitValue._raw(1 - self.value, self.precision)

    def _cmp_value(self, other):
        if isinstance(other, UnitValue):
            return other.value
        return to_mp(other, self.precision)

    def __eq__(self, other):
        try:
            return self.value == self._cmp_value(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __hash__(self):
        return hash(self.value)

    def __float__(self):
        return float(self.value)

    def __str__(self):
        return format_mp(self.value)

    def __repr__(self):
        return f"UnitValue('{format_mp(self.value)}', precision={self.precision})"


def as_unit(x, precision=DEFAULT_PRECISION):
    """Return `x` as a :class:`UnitValue` (identity for UnitValue input)."""
    if isinstance(x, UnitValue):
        return x
    return UnitValue(x, precision)


def raw_value(x, precision=None):
    """Underlying ``mpfr`` of a UnitValue or number."""
    if isinstance(x, UnitValue):
        return x.value if precision is None else mpfr(x.value, precision)
    return to_mp(x, precision)
