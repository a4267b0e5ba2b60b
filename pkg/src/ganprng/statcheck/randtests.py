"""
Eight statistical tests from NIST SP 800-22 rev. 1a.

Every test takes a bit sequence (``BitStream``, 0/1 array or ``"0101"`` string)
and returns a :class:`TestInstanceResult`.  The serial test yields two results,
one per p-value.  Formulas and constants follow the NIST reference
implementation (sts-2.1.2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..bitstream import BitStream
from ..errors import RejectedInputError
from .special import erfc, igamc, normal_cdf

DEFAULT_ALPHA = 0.01


@dataclass
class TestInstanceResult:
    name: str
    p_value: float
    alpha: float = DEFAULT_ALPHA
    instance: int = 0
    statistic: float | None = None
    details: dict = field(default_factory=dict, repr=False)
    passed: bool = field(init=False)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        self.p_value = float(min(1.0, max(0.0, self.p_value)))
        self.passed = self.p_value >= self.alpha


def as_bits(bits) -> np.ndarray:
    """Coerce input to a flat ``uint8`` array of 0/1."""
    if isinstance(bits, BitStream):
        return bits.bits
    if isinstance(bits, str):
        return BitStream.from_string(bits).bits
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise RejectedInputError("bit arrays may only contain 0 and 1")
    return arr


def _nonempty(bits) -> np.ndarray:
    b = as_bits(bits)
    if b.size == 0:
        raise RejectedInputError("empty bit sequence")
    return b


# ----------------------------------------------------------------------------
# Frequency family
# ----------------------------------------------------------------------------


def monobit(bits, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    """Frequency (monobit) test: balance of ones and zeros."""
    b = _nonempty(bits)
    n = b.size
    s = 2 * int(b.sum(dtype=np.int64)) - n
    p = erfc(abs(s) / math.sqrt(2.0 * n))
    return TestInstanceResult("monobit", p, alpha, statistic=s)


def block_frequency(bits, M: int = 128, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    """Frequency within blocks of ``M`` bits."""
    b = _nonempty(bits)
    if M < 2 or M > b.size:
        raise RejectedInputError(f"block size M={M} must be in [2, n={b.size}]")
    N = b.size // M
    proportions = b[: N * M].reshape(N, M).mean(axis=1)
    chi2 = 4.0 * M * float(((proportions - 0.5) ** 2).sum())
    p = igamc(N / 2.0, chi2 / 2.0)
    return TestInstanceResult("block_frequency", p, alpha, statistic=chi2,
                              details={"blocks": N})


# ----------------------------------------------------------------------------
# Run structure
# ----------------------------------------------------------------------------


def count_runs(b: np.ndarray) -> int:
    return 1 + int(np.count_nonzero(b[1:] != b[:-1]))


def runs(bits, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    """Runs test. Returns p = 0 when the monobit prerequisite fails."""
    b = _nonempty(bits)
    n = b.size
    pi = float(b.mean())
    v = count_runs(b)
    # short constant strings slip past the prerequisite but have pi(1 - pi) = 0
    if not abs(pi - 0.5) < 2.0 / math.sqrt(n) or pi in (0.0, 1.0):
        return TestInstanceResult("runs", 0.0, alpha, statistic=v,
                                  details={"prerequisite_failed": True})
    p = erfc(abs(v - 2.0 * n * pi * (1 - pi)) / (2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)))
    return TestInstanceResult("runs", p, alpha, statistic=v)


# (block length, category lower bound, category upper bound, class probabilities)
_LONGEST_RUN_REGIMES = {
    8: (1, 4, (0.21484375, 0.3671875, 0.23046875, 0.1875)),
    128: (4, 9, (0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847)),
    10_000: (10, 16, (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
}


def longest_run_regime(n: int) -> int:
    if n < 128:
        raise RejectedInputError(f"longest-run test needs n >= 128, got {n}")
    if n < 6272:
        return 8
    if n < 750_000:
        return 128
    return 10_000


def longest_runs_in_blocks(blocks: np.ndarray) -> np.ndarray:
    """Longest run of ones in each row of a 2-D 0/1 array."""
    blocks = np.asarray(blocks, dtype=np.int64)
    current = np.zeros(blocks.shape[0], dtype=np.int64)
    longest = np.zeros_like(current)
    for col in blocks.T:
        current = (current + 1) * col
        np.maximum(longest, current, out=longest)
    return longest


def longest_run_of_ones(bits, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    b = _nonempty(bits)
    M = longest_run_regime(b.size)
    lo, hi, probs = _LONGEST_RUN_REGIMES[M]
    N = b.size // M
    longest = longest_runs_in_blocks(b[: N * M].reshape(N, M))
    counts = np.bincount(np.clip(longest, lo, hi) - lo, minlength=len(probs))
    expected = N * np.asarray(probs)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    p = igamc((len(probs) - 1) / 2.0, chi2 / 2.0)
    return TestInstanceResult("longest_run", p, alpha, statistic=chi2,
                              details={"M": M, "blocks": N, "counts": counts.tolist()})


def max_excursion(b: np.ndarray, reverse: bool = False) -> int:
    walk = 2 * b.astype(np.int64) - 1
    if reverse:
        walk = walk[::-1]
    return int(np.abs(np.cumsum(walk)).max())


def _c_div(a: int, b: int) -> int:
    """Integer division truncating toward zero, as in C."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def cusum_pvalue(n: int, z: int) -> float:
    root = math.sqrt(n)
    sum1 = 0.0
    for k in range(_c_div(_c_div(-n, z) + 1, 4), _c_div(_c_div(n, z) - 1, 4) + 1):
        sum1 += normal_cdf((4 * k + 1) * z / root) - normal_cdf((4 * k - 1) * z / root)
    sum2 = 0.0
    for k in range(_c_div(_c_div(-n, z) - 3, 4), _c_div(_c_div(n, z) - 1, 4) + 1):
        sum2 += normal_cdf((4 * k + 3) * z / root) - normal_cdf((4 * k + 1) * z / root)
    return 1.0 - sum1 + sum2


def cumulative_sums(bits, mode: str = "forward", alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    if mode not in ("forward", "reverse"):
        raise RejectedInputError("mode must be 'forward' or 'reverse'")
    b = _nonempty(bits)
    z = max_excursion(b, reverse=mode == "reverse")
    return TestInstanceResult(f"cusum_{mode}", cusum_pvalue(b.size, z), alpha, statistic=z)


# ----------------------------------------------------------------------------
# Pattern / entropy family
# ----------------------------------------------------------------------------

_MAX_PATTERN = 24


def pattern_counts(b: np.ndarray, m: int) -> np.ndarray:
    """Counts of all overlapping ``m``-bit patterns, wrapping around the end.

    Index ``i`` counts the pattern whose MSB-first binary value is ``i``.  The
    counts sum to ``len(b)``.
    """
    if m == 0:
        return np.array([b.size], dtype=np.int64)
    extended = np.concatenate([b, b[: m - 1]]).astype(np.int64)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    values = sliding_window_view(extended, m) @ weights
    return np.bincount(values, minlength=1 << m)


def psi_squared(b: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = pattern_counts(b, m).astype(np.float64)
    n = b.size
    return float((1 << m) / n * (counts @ counts) - n)


def serial(bits, m: int = 16, alpha: float = DEFAULT_ALPHA) -> tuple[TestInstanceResult, TestInstanceResult]:
    b = _nonempty(bits)
    if m < 2 or m > min(b.size, _MAX_PATTERN):
        raise RejectedInputError(f"serial block length m={m} invalid for n={b.size}")
    psi = [psi_squared(b, m - j) for j in range(3)]
    # both deltas are non-negative exactly; clamp cancellation noise
    del1 = max(psi[0] - psi[1], 0.0)
    del2 = max(psi[0] - 2.0 * psi[1] + psi[2], 0.0)
    p1 = igamc(2.0 ** (m - 2), del1 / 2.0)
    p2 = igamc(2.0 ** (m - 3), del2 / 2.0)
    details = {"m": m, "psi_squared": psi}
    return (
        TestInstanceResult("serial_1", p1, alpha, statistic=del1, details=details),
        TestInstanceResult("serial_2", p2, alpha, statistic=del2, details=details),
    )


def phi(b: np.ndarray, m: int) -> float:
    """``sum(pi * ln(pi))`` over the cyclic ``m``-bit pattern frequencies."""
    counts = pattern_counts(b, m)
    pi = counts[counts > 0] / b.size
    return float((pi * np.log(pi)).sum())


def approximate_entropy(bits, m: int = 10, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    b = _nonempty(bits)
    if m < 1 or m + 1 > min(b.size, _MAX_PATTERN):
        raise RejectedInputError(f"approximate entropy block length m={m} invalid for n={b.size}")
    apen = phi(b, m) - phi(b, m + 1)
    chi2 = 2.0 * b.size * (math.log(2.0) - apen)
    p = igamc(2.0 ** (m - 1), max(chi2, 0.0) / 2.0)
    return TestInstanceResult("approximate_entropy", p, alpha, statistic=chi2,
                              details={"m": m, "apen": apen})


# ----------------------------------------------------------------------------
# Spectral
# ----------------------------------------------------------------------------


def dft_magnitudes(b: np.ndarray) -> np.ndarray:
    """Moduli of the first ``n // 2`` DFT coefficients of the +/-1 sequence."""
    x = 2.0 * b.astype(np.float64) - 1.0
    return np.abs(np.fft.fft(x)[: b.size // 2])


def dft_spectral(bits, alpha: float = DEFAULT_ALPHA) -> TestInstanceResult:
    b = _nonempty(bits)
    n = b.size
    if n < 2:
        raise RejectedInputError("spectral test needs at least 2 bits")
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n1 = int(np.count_nonzero(dft_magnitudes(b) < threshold))
    n0 = 0.95 * n / 2.0
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    p = erfc(abs(d) / math.sqrt(2.0))
    return TestInstanceResult("dft_spectral", p, alpha, statistic=d, details={"peaks_below": n1})
