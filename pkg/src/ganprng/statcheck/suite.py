"""
Running the tests over many instances and aggregating verdicts.

A stream is cut into ``instances_per_test`` consecutive blocks of
``bits_per_instance`` bits.  Every test runs on every block.  A test then fails
overall if its pass proportion is below :func:`proportion_threshold` or if the
distribution of its instance p-values fails :func:`uniformity_pvalue` at
``uniformity_alpha``.

Report counters, named as in the results tables of the original experiments:

``T``    distinct tests          ``T_I``  total test instances
``F_I``  failed instances        ``F_I%`` failed instance percentage
``F_p``  tests failing uniformity
``F_T``  tests failing overall   ``F_%``  failed test percentage
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..bitstream import BitStream
from ..errors import ParseError, RejectedInputError
from . import randtests as rt
from .special import igamc

FAMILIES = (
    "monobit",
    "block_frequency",
    "runs",
    "longest_run",
    "cumulative_sums",
    "serial",
    "approximate_entropy",
    "dft_spectral",
)

# distinct test name -> family
TEST_FAMILY = {
    "monobit": "monobit",
    "block_frequency": "block_frequency",
    "runs": "runs",
    "longest_run": "longest_run",
    "cusum_forward": "cumulative_sums",
    "cusum_reverse": "cumulative_sums",
    "serial_1": "serial",
    "serial_2": "serial",
    "approximate_entropy": "approximate_entropy",
    "dft_spectral": "dft_spectral",
}

REPORT_VERSION = 1


@dataclass
class SuiteConfig:
    bits_per_instance: int = 1_000_000
    instances_per_test: int = 10
    alpha: float = 0.01
    uniformity_alpha: float = 0.0001
    block_frequency_m: int = 128
    serial_m: int = 16
    approximate_entropy_m: int = 10
    families: tuple = FAMILIES

    def __post_init__(self):
        self.families = tuple(self.families)
        if not 0 < self.alpha < 1 or not 0 < self.uniformity_alpha < 1:
            raise RejectedInputError("alpha values must lie in (0, 1)")
        if self.instances_per_test < 1:
            raise RejectedInputError("instances_per_test must be positive")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise RejectedInputError(f"unknown test families {sorted(unknown)}")
        minimum = self.minimum_bits()
        if self.bits_per_instance < minimum:
            raise RejectedInputError(
                f"bits_per_instance must be at least {minimum} for the selected tests"
            )

    def minimum_bits(self) -> int:
        need = {
            "monobit": 1,
            "block_frequency": self.block_frequency_m,
            "runs": 1,
            "longest_run": 128,
            "cumulative_sums": 1,
            "serial": self.serial_m,
            "approximate_entropy": self.approximate_entropy_m + 1,
            "dft_spectral": 2,
        }
        return max(need[f] for f in self.families)

    @property
    def required_bits(self) -> int:
        return self.bits_per_instance * self.instances_per_test

    @classmethod
    def desk(cls, **overrides) -> "SuiteConfig":
        """10 instances of 100,000 bits, with pattern lengths scaled to match."""
        base = dict(bits_per_instance=100_000, serial_m=12, approximate_entropy_m=8)
        return cls(**{**base, **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["families"] = list(self.families)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        return cls(**d)


def proportion_threshold(m: int, alpha: float) -> float:
    """Lowest acceptable pass proportion over ``m`` instances (3-sigma rule)."""
    if m < 1:
        raise RejectedInputError("need at least one instance")
    p_hat = 1.0 - alpha
    return p_hat - 3.0 * math.sqrt(p_hat * (1.0 - p_hat) / m)


def uniformity_pvalue(pvalues) -> float:
    """Chi-square uniformity of p-values over 10 equal bins of [0, 1]; 1.0 goes to the top bin."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        raise RejectedInputError("need at least one p-value")
    bins = np.minimum((p * 10).astype(np.int64), 9)
    counts = np.bincount(bins, minlength=10)
    expected = p.size / 10.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    return igamc(4.5, chi2 / 2.0)


def run_instance(bits, cfg: SuiteConfig, instance: int = 0) -> list[rt.TestInstanceResult]:
    """Every configured test on one block of bits."""
    b = rt.as_bits(bits)
    a = cfg.alpha
    out = []
    for family in cfg.families:
        if family == "monobit":
            out.append(rt.monobit(b, a))
        elif family == "block_frequency":
            out.append(rt.block_frequency(b, cfg.block_frequency_m, a))
        elif family == "runs":
            out.append(rt.runs(b, a))
        elif family == "longest_run":
            out.append(rt.longest_run_of_ones(b, a))
        elif family == "cumulative_sums":
            out.append(rt.cumulative_sums(b, "forward", a))
            out.append(rt.cumulative_sums(b, "reverse", a))
        elif family == "serial":
            out.extend(rt.serial(b, cfg.serial_m, a))
        elif family == "approximate_entropy":
            out.append(rt.approximate_entropy(b, cfg.approximate_entropy_m, a))
        elif family == "dft_spectral":
            out.append(rt.dft_spectral(b, a))
    for r in out:
        r.instance = instance
    return out


@dataclass
class TestSummary:
    name: str
    family: str
    p_values: list
    passes: int
    instances: int
    proportion_threshold: float
    proportion_passed: bool
    uniformity_p: float
    uniformity_passed: bool

    __test__ = False

    @property
    def failed(self) -> bool:
        return not (self.proportion_passed and self.uniformity_passed)

    @property
    def failed_instances(self) -> int:
        return self.instances - self.passes


@dataclass
class SuiteReport:
    config: SuiteConfig
    tests: list = field(default_factory=list)
    source: str = ""

    @property
    def T(self) -> int:
        return len(self.tests)

    @property
    def T_I(self) -> int:
        return sum(t.instances for t in self.tests)

    @property
    def F_I(self) -> int:
        return sum(t.failed_instances for t in self.tests)

    @property
    def F_I_pct(self) -> float:
        return 100.0 * self.F_I / self.T_I if self.T_I else 0.0

    @property
    def F_p(self) -> int:
        return sum(not t.uniformity_passed for t in self.tests)

    @property
    def F_T(self) -> int:
        return sum(t.failed for t in self.tests)

    @property
    def F_pct(self) -> float:
        return 100.0 * self.F_T / self.T if self.T else 0.0

    def test(self, name: str) -> TestSummary:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    def failed_families(self) -> list[str]:
        """Families with at least one failed distinct test."""
        return sorted({t.family for t in self.tests if t.failed})

    def summary(self) -> dict:
        m = self.config.instances_per_test
        threshold = proportion_threshold(m, self.config.alpha)
        return {
            "T": self.T,
            "T_I": self.T_I,
            "F_I": self.F_I,
            "F_I_pct": round(self.F_I_pct, 6),
            "F_p": self.F_p,
            "F_T": self.F_T,
            "F_pct": round(self.F_pct, 6),
            "proportion_threshold": threshold,
            # the 3-sigma bound as applied, and the truncated count sts prints
            "min_passes_applied": math.ceil(threshold * m - 1e-12),
            "min_passes_sts_display": int(threshold * m),
        }

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "source": self.source,
            "config": self.config.to_dict(),
            "summary": self.summary(),
            "tests": [asdict(t) for t in self.tests],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteReport":
        if not isinstance(d, dict) or d.get("version") != REPORT_VERSION:
            version = d.get("version") if isinstance(d, dict) else None
            raise ParseError(f"not a version {REPORT_VERSION} suite report (version {version})")
        try:
            return cls(
                config=SuiteConfig.from_dict(d["config"]),
                tests=[TestSummary(**t) for t in d["tests"]],
                source=d.get("source", ""),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed suite report: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save_json(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load_json(cls, path) -> "SuiteReport":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path} is not JSON: {exc.msg}", offset=exc.pos) from exc
        return cls.from_dict(doc)

    def to_text(self) -> str:
        s = self.summary()
        cfg = self.config
        lines = [
            f"source: {self.source or '-'}",
            f"{cfg.instances_per_test} instances x {cfg.bits_per_instance} bits, "
            f"alpha={cfg.alpha}, uniformity alpha={cfg.uniformity_alpha}",
            f"minimum passes: {s['min_passes_applied']}/{cfg.instances_per_test} "
            f"(3-sigma bound {s['proportion_threshold']:.4f}; sts displays "
            f"{s['min_passes_sts_display']})",
            "",
            f"{'test':<22}{'passed':>8}{'uniform P':>12}  verdict",
        ]
        for t in self.tests:
            verdict = "FAIL" if t.failed else "pass"
            lines.append(
                f"{t.name:<22}{t.passes:>4}/{t.instances:<3}{t.uniformity_p:>12.6f}  {verdict}"
            )
        lines += [
            "",
            f"{'T':>4}{'T_I':>7}{'F_I':>7}{'F_I%':>9}{'F_p':>6}{'F_T':>6}{'F_%':>9}",
            f"{s['T']:>4}{s['T_I']:>7}{s['F_I']:>7}{s['F_I_pct']:>9.1f}"
            f"{s['F_p']:>6}{s['F_T']:>6}{s['F_pct']:>9.1f}",
        ]
        return "\n".join(lines) + "\n"


def aggregate(results: list[list[rt.TestInstanceResult]], cfg: SuiteConfig,
              source: str = "") -> SuiteReport:
    """Fold per-instance results (one list per instance) into a report."""
    m = len(results)
    threshold = proportion_threshold(m, cfg.alpha)
    names = [r.name for r in results[0]]
    tests = []
    for j, name in enumerate(names):
        column = [inst[j] for inst in results]
        pvals = [r.p_value for r in column]
        passes = sum(r.passed for r in column)
        uni = uniformity_pvalue(pvals)
        tests.append(TestSummary(
            name=name,
            family=TEST_FAMILY[name],
            p_values=pvals,
            passes=passes,
            instances=m,
            proportion_threshold=threshold,
            proportion_passed=passes / m >= threshold,
            uniformity_p=uni,
            uniformity_passed=uni >= cfg.uniformity_alpha,
        ))
    return SuiteReport(cfg, tests, source)


def run_suite(stream, cfg: SuiteConfig | None = None) -> SuiteReport:
    cfg = cfg or SuiteConfig()
    bits = rt.as_bits(stream)
    if bits.size < cfg.required_bits:
        raise RejectedInputError(
            f"suite needs {cfg.required_bits} bits "
            f"({cfg.instances_per_test} x {cfg.bits_per_instance}), got {bits.size}"
        )
    n = cfg.bits_per_instance
    results = [
        run_instance(bits[i * n : (i + 1) * n], cfg, i)
        for i in range(cfg.instances_per_test)
    ]
    source = stream.provenance if isinstance(stream, BitStream) else ""
    return aggregate(results, cfg, source)


def compare_reports(before: SuiteReport, after: SuiteReport) -> dict:
    """Change in the failure metrics from ``before`` to ``after``."""
    if before.config.to_dict() != after.config.to_dict():
        raise RejectedInputError("reports were produced with different suite configurations")
    b, a = before.summary(), after.summary()
    return {
        "delta_F_I_pct": a["F_I_pct"] - b["F_I_pct"],
        "delta_F_p": a["F_p"] - b["F_p"],
        "delta_F_T": a["F_T"] - b["F_T"],
        "delta_F_pct": a["F_pct"] - b["F_pct"],
        "before": b,
        "after": a,
    }


def comparison_text(delta: dict) -> str:
    return (
        f"{'dF_I%':>9}{'dF_p':>7}{'dF_T':>7}{'dF_%':>9}\n"
        f"{delta['delta_F_I_pct']:>9.1f}{delta['delta_F_p']:>7}"
        f"{delta['delta_F_T']:>7}{delta['delta_F_pct']:>9.1f}\n"
    )
