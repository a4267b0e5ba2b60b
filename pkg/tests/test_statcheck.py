import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from ganprng import statcheck as sc
from ganprng.bitstream import BitStream
from ganprng.errors import RejectedInputError
from ganprng.statcheck import randtests as rt
from ganprng.statcheck import suite
from oracles import (brute_block_chi2, brute_dft, brute_excursion, brute_longest, brute_patterns,
                     brute_phi, brute_runs, oracle_erfc, oracle_igamc, random_strings)
from oracles import cusum_pvalue as oracle_cusum

E100 = (
    "11001001000011111101101010100010001000010110100011"
    "00001000110100110001001100011001100010100010111000"
)
L128 = (
    "11001100000101010110110001001100111000000000001001001101010100010001"
    "001111010110100000001101011111001100111001101101100010110010"
)


# ---------------------------------------------------------------- special functions


def test_erfc_examples():
    assert sc.erfc(0.0) == 1.0
    assert sc.erfc(1.0) == pytest.approx(0.15729921, abs=1e-8)


@pytest.mark.parametrize("x", np.linspace(-10, 10, 41))
def test_erfc_against_oracle(x):
    assert abs(sc.erfc(x) - oracle_erfc(x)) < 1e-10
    assert sc.erfc(-x) == pytest.approx(2 - sc.erfc(x), abs=1e-15)


@pytest.mark.parametrize("a, x", [(1.5, 0.5), (1, 1), (0.5, 3.0), (4.5, 2.0), (5, 12.5),
                                  (64, 70.0), (2048, 2000.0), (0.1, 0.01)])
def test_igamc_against_oracle(a, x):
    assert abs(sc.igamc(a, x) - oracle_igamc(a, x)) < 1e-10


def test_igamc_examples():
    assert sc.igamc(1.5, 0.0) == 1.0
    assert sc.igamc(1, 1) == pytest.approx(math.exp(-1), abs=1e-15)
    assert sc.igamc(1.5, 0.5) == pytest.approx(0.80125196, abs=1e-8)


@pytest.mark.parametrize("a, x", [(0, 1), (-1, 1), (1, -0.5)])
def test_igamc_domain(a, x):
    with pytest.raises(RejectedInputError):
        sc.igamc(a, x)


@given(st.floats(0.1, 50), st.floats(0, 50), st.floats(0, 5))
def test_igamc_monotone_in_x(a, x, dx):
    assert sc.igamc(a, x + dx) <= sc.igamc(a, x) + 1e-15


# ---------------------------------------------------------------- worked examples


def test_monobit_examples():
    assert sc.monobit("0101010101").p_value == 1.0
    assert sc.monobit("1011010101").p_value == pytest.approx(oracle_erfc(2 / math.sqrt(20)), abs=1e-12)
    assert sc.monobit("1011010101").p_value == pytest.approx(0.527089, abs=1e-6)
    ones = sc.monobit("1111111111")
    assert ones.p_value == pytest.approx(0.001565, abs=1e-6)
    assert not ones.passed
    assert sc.monobit(E100).p_value == pytest.approx(0.109599, abs=1e-6)


def test_block_frequency_examples():
    r = sc.block_frequency("0110011010", 3)
    assert r.statistic == pytest.approx(1.0)
    assert r.p_value == pytest.approx(oracle_igamc(1.5, 0.5), abs=1e-12)
    assert r.p_value == pytest.approx(0.801252, abs=1e-6)
    assert sc.block_frequency("0110" * 25, 4).p_value == 1.0
    r = sc.block_frequency("1" * 100, 10)
    assert r.statistic == pytest.approx(100.0)
    assert r.p_value < 1e-10
    assert sc.block_frequency(E100, 10).p_value == pytest.approx(0.706438, abs=1e-6)
    with pytest.raises(RejectedInputError):
        sc.block_frequency("0101", 5)


def test_runs_examples():
    r = sc.runs("1001101011")
    assert r.statistic == 7
    expected = oracle_erfc(abs(7 - 2 * 10 * 0.6 * 0.4) / (2 * math.sqrt(20) * 0.6 * 0.4))
    assert r.p_value == pytest.approx(expected, abs=1e-12)
    assert r.p_value == pytest.approx(0.147232, abs=1e-6)
    assert sc.runs("01" * 500).p_value < 1e-10
    ones = sc.runs("1" * 100)
    assert ones.p_value == 0.0 and not ones.passed
    assert sc.runs(E100).p_value == pytest.approx(0.500798, abs=1e-6)


def test_longest_run_examples():
    r = sc.longest_run_of_ones(L128)
    assert r.details["counts"] == [4, 9, 3, 0]
    assert r.p_value == pytest.approx(0.180598, abs=2e-5)
    zeros = sc.longest_run_of_ones("0" * 1024)
    assert zeros.details["counts"][0] == 128
    assert zeros.p_value < 1e-10
    with pytest.raises(RejectedInputError):
        sc.longest_run_of_ones("1" * 127)


@pytest.mark.parametrize("n, M", [(128, 8), (6271, 8), (6272, 128), (749_999, 128), (750_000, 10_000)])
def test_longest_run_regimes(n, M):
    assert rt.longest_run_regime(n) == M


def test_longest_run_blocks_against_scan():
    rng = np.random.default_rng(1)
    blocks = rng.integers(0, 2, size=(1000, 128))
    fast = rt.longest_runs_in_blocks(blocks)
    slow = [brute_longest("".join(map(str, row))) for row in blocks]
    np.testing.assert_array_equal(fast, slow)
    r = sc.longest_run_of_ones(blocks.ravel())
    assert sum(r.details["counts"]) == r.details["blocks"]


def test_cusum_examples():
    r = sc.cumulative_sums("1011010111")
    assert r.statistic == brute_excursion("1011010111") == 4
    assert r.p_value == pytest.approx(0.4116586, abs=1e-7)
    assert sc.cumulative_sums(E100).p_value == pytest.approx(0.219194, abs=1e-6)
    assert sc.cumulative_sums(E100, "reverse").p_value == pytest.approx(0.114866, abs=1e-6)
    alternating = sc.cumulative_sums("10" * 5000)
    assert alternating.statistic == 1 and alternating.p_value > 0.999
    palindrome = "1101001011" + "1101001011"[::-1]
    assert (sc.cumulative_sums(palindrome, "reverse").p_value
            == sc.cumulative_sums(palindrome, "forward").p_value)
    with pytest.raises(RejectedInputError):
        sc.cumulative_sums("0101", "sideways")


def test_cusum_formula_against_normal_oracle():
    for n, z in [(100, 16), (1000, 30), (10, 4), (1000, 97)]:
        assert rt.cusum_pvalue(n, z) == pytest.approx(oracle_cusum(n, z), abs=1e-9)


def test_serial_examples():
    p1, p2 = sc.serial("0011011101", 3)
    assert p1.p_value == pytest.approx(0.808792, abs=1e-6)
    assert p2.p_value == pytest.approx(0.670320, abs=1e-6)
    assert rt.pattern_counts(rt.as_bits("0011011101"), 3).tolist() == brute_patterns("0011011101", 3)
    # de Bruijn B(2, 4): every 4-bit pattern once cyclically
    debruijn = "0000100110101111"
    assert set(rt.pattern_counts(rt.as_bits(debruijn), 4)) == {1}
    p1, p2 = sc.serial(debruijn * 64, 4)
    assert p1.statistic == 0.0 and p1.p_value == 1.0
    with pytest.raises(RejectedInputError):
        sc.serial("0101", 8)


def test_approximate_entropy_examples():
    assert sc.approximate_entropy("0100110101", 3).p_value == pytest.approx(0.261961, abs=1e-6)
    assert sc.approximate_entropy(E100, 2).p_value == pytest.approx(0.235301, abs=1e-6)
    const = sc.approximate_entropy("1" * 1000, 2)
    assert const.details["apen"] == 0.0 and const.p_value < 1e-10
    s = "011010011100"
    assert rt.phi(rt.as_bits(s), 2) == pytest.approx(brute_phi(s, 2), abs=1e-12)
    with pytest.raises(RejectedInputError):
        sc.approximate_entropy("01", 2)


def test_dft_examples():
    b = "1001010011"
    np.testing.assert_allclose(rt.dft_magnitudes(rt.as_bits(b)), brute_dft(b), atol=1e-9)
    n = 10
    n1 = sum(m < math.sqrt(math.log(20) * n) for m in brute_dft(b))
    d = (n1 - 0.95 * n / 2) / math.sqrt(n * 0.95 * 0.05 / 4)
    assert sc.dft_spectral(b).p_value == pytest.approx(oracle_erfc(abs(d) / math.sqrt(2)), abs=1e-12)
    assert sc.dft_spectral(b).p_value == pytest.approx(0.468160, abs=1e-6)
    assert sc.dft_spectral("01" * 2048).p_value < 1e-10
    with pytest.raises(RejectedInputError):
        sc.dft_spectral("1")


@pytest.mark.parametrize("fn", [sc.monobit, sc.runs, sc.cumulative_sums, sc.dft_spectral])
def test_empty_rejected(fn):
    with pytest.raises(RejectedInputError):
        fn("")


# ---------------------------------------------------------------- brute-force equivalence


def test_statistics_match_brute_force():
    for s in random_strings():
        b = rt.as_bits(s)
        n = len(s)
        assert sc.monobit(b).statistic == 2 * s.count("1") - n
        assert sc.runs(b).statistic == brute_runs(s)
        for reverse in (False, True):
            assert rt.max_excursion(b, reverse) == brute_excursion(s[::-1] if reverse else s)
        longest = rt.longest_runs_in_blocks(b[None, :])[0]
        assert longest == brute_longest(s)
        m = min(4, n)
        assert rt.pattern_counts(b, m).tolist() == brute_patterns(s, m)
        assert sum(rt.pattern_counts(b, m)) == n
        assert rt.phi(b, 2) == pytest.approx(brute_phi(s, 2), abs=1e-9)
        M = max(2, n // 4)
        assert sc.block_frequency(b, M).statistic == pytest.approx(brute_block_chi2(s, M), abs=1e-9)
        mags = rt.dft_magnitudes(b)
        assert np.max(np.abs(mags - brute_dft(s)), initial=0) < 1e-9
        assert sc.dft_spectral(b).details["peaks_below"] <= n // 2


def test_serial_second_difference_cancellation():
    # exact second difference is 0; floating point leaves about -2e-15
    p1, p2 = sc.serial("000000100111", 3)
    assert p2.statistic == 0.0 and p2.p_value == 1.0
    assert 0.0 < p1.p_value < 1.0


@settings(max_examples=200)
@given(st.text(alphabet="01", min_size=12, max_size=64))
@example("000000100111")
def test_every_test_returns_valid_pvalue(s):
    results = [sc.monobit(s), sc.runs(s), sc.cumulative_sums(s), sc.cumulative_sums(s, "reverse"),
               sc.dft_spectral(s), sc.block_frequency(s, 4), sc.approximate_entropy(s, 2),
               *sc.serial(s, 3)]
    for r in results:
        assert 0.0 <= r.p_value <= 1.0
        assert r.passed == (r.p_value >= r.alpha)
    assert sc.approximate_entropy(s, 2).details["apen"] <= math.log(2) + 1e-12


# ---------------------------------------------------------------- aggregation


def test_uniformity_examples():
    chi2 = sum((c - 1) ** 2 / 1 for c in [0, 0, 0, 0, 0, 10, 0, 0, 0, 0])
    assert chi2 == 90
    assert sc.uniformity_pvalue([0.5] * 10) == pytest.approx(oracle_igamc(4.5, 45), abs=1e-12)
    assert sc.uniformity_pvalue([0.5] * 10) < 1e-4
    assert sc.uniformity_pvalue([0.05 + 0.1 * i for i in range(10)]) == 1.0
    # 1.0 lands in the top bin alongside 0.95
    assert sc.uniformity_pvalue([0.05 + 0.1 * i for i in range(9)] + [1.0]) == 1.0
    with pytest.raises(RejectedInputError):
        sc.uniformity_pvalue([])


def test_proportion_threshold():
    assert sc.proportion_threshold(1000, 0.01) == pytest.approx(0.980561, abs=1e-6)
    bound = sc.proportion_threshold(10, 0.01)
    assert bound == pytest.approx(0.8956, abs=1e-4)
    assert 9 / 10 >= bound > 8 / 10
    assert sc.proportion_threshold(10, 1e-12) == pytest.approx(1.0, abs=1e-5)


def _stream(n, seed=0):
    return BitStream(np.random.default_rng(seed).integers(0, 2, n))


def test_run_suite_counters():
    cfg = sc.SuiteConfig(bits_per_instance=20_000, instances_per_test=5, serial_m=8,
                         approximate_entropy_m=6)
    report = sc.run_suite(_stream(100_000), cfg)
    assert report.T == 10
    assert report.T_I == report.T * 5
    assert 0 <= report.F_I <= report.T_I
    assert 0 <= report.F_T <= report.T
    assert report.F_T == sum(t.failed for t in report.tests)
    for t in report.tests:
        assert t.failed == (not t.proportion_passed or not t.uniformity_passed)
    assert report.F_I_pct == pytest.approx(100 * report.F_I / report.T_I)


def test_run_suite_on_constant_stream():
    cfg = sc.SuiteConfig.desk(bits_per_instance=10_000, serial_m=8, approximate_entropy_m=6)
    report = sc.run_suite(BitStream(np.zeros(100_000)), cfg)
    assert report.F_I_pct > 80
    assert "monobit" in report.failed_families()


def test_run_suite_rejects_short_stream():
    cfg = sc.SuiteConfig.desk()
    with pytest.raises(RejectedInputError, match="1000000"):
        sc.run_suite(_stream(999_999), cfg)


def test_suite_config_rejects():
    with pytest.raises(RejectedInputError):
        sc.SuiteConfig(alpha=1.5)
    with pytest.raises(RejectedInputError):
        sc.SuiteConfig(bits_per_instance=100)
    with pytest.raises(RejectedInputError):
        sc.SuiteConfig(families=("monobit", "rank"))


def test_report_json_round_trip(tmp_path):
    cfg = sc.SuiteConfig(bits_per_instance=5000, instances_per_test=4, serial_m=6,
                         approximate_entropy_m=4)
    report = sc.run_suite(_stream(20_000, 3), cfg)
    path = tmp_path / "r.json"
    report.save_json(path)
    back = sc.SuiteReport.load_json(path)
    assert back.to_json() == report.to_json()
    assert back.summary() == report.summary()
    text = report.to_text()
    for col in ("T_I", "F_I%", "F_p", "F_T", "F_%"):
        assert col in text


def test_compare_reports():
    cfg = sc.SuiteConfig(bits_per_instance=5000, instances_per_test=4, serial_m=6,
                         approximate_entropy_m=4)
    good = sc.run_suite(_stream(20_000, 3), cfg)
    bad = sc.run_suite(BitStream(np.zeros(20_000)), cfg)
    same = sc.compare_reports(good, good)
    assert [same[k] for k in ("delta_F_I_pct", "delta_F_p", "delta_F_T", "delta_F_pct")] == [0, 0, 0, 0]
    delta = sc.compare_reports(bad, good)
    assert delta["delta_F_I_pct"] == pytest.approx(good.F_I_pct - bad.F_I_pct)
    assert delta["delta_F_I_pct"] < 0
    other = sc.run_suite(_stream(40_000, 3), sc.SuiteConfig(bits_per_instance=10_000, instances_per_test=4,
                                                          serial_m=6, approximate_entropy_m=4))
    with pytest.raises(RejectedInputError):
        sc.compare_reports(good, other)


def test_compare_full_failure_to_none():
    cfg = sc.SuiteConfig(bits_per_instance=1000, instances_per_test=2, families=("monobit",))

    def report(pvalues):
        results = [[rt.TestInstanceResult("monobit", p, instance=i)] for i, p in enumerate(pvalues)]
        return suite.aggregate(results, cfg)

    delta = sc.compare_reports(report([0.0, 0.0]), report([0.5, 0.7]))
    assert delta["delta_F_I_pct"] == -100.0


def test_calibration_small():
    # the full 200-instance calibration lives in the acceptance module
    cfg = sc.SuiteConfig.desk(bits_per_instance=20_000, instances_per_test=20, serial_m=8,
                              approximate_entropy_m=6)
    report = sc.run_suite(_stream(400_000, 11), cfg)
    assert report.F_I_pct <= 5.0
