"""Special functions used by the p-value formulas."""

import math

from scipy.special import gammaincc

from ..errors import RejectedInputError


def erfc(x: float) -> float:
    """Complementary error function."""
    return math.erfc(x)


def igamc(a: float, x: float) -> float:
    """Regularised upper incomplete gamma function ``Q(a, x)``, ``a > 0, x >= 0``."""
    if not a > 0 or not x >= 0:
        raise RejectedInputError(f"igamc needs a > 0 and x >= 0, got a={a}, x={x}")
    return float(gammaincc(a, x))


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))
