"""
测试评价指标：ARI、参数平方误差、中位数置信区间、配对差值表
"""

import sys
import os
# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import itertools
import math
import unittest

import numpy as np
from loguru import logger

from esclust.evaluation import (
    PairedResult,
    adjusted_rand_index,
    best_permutation,
    median_ci,
    paired_difference_table,
)
from esclust.evaluation.metrics import parameter_squared_error
from esclust.mixture import MixtureState
from esclust.utils.errors import EsClustError, NothingToCompareError


def pair_counting_ari(a, b):
    """逐对计数的 ARI"""
    n = len(a)
    both = same_a = same_b = 0
    for i, j in itertools.combinations(range(n), 2):
        in_a, in_b = a[i] == a[j], b[i] == b[j]
        both += in_a and in_b
        same_a += in_a
        same_b += in_b
    total = n * (n - 1) / 2
    expected = same_a * same_b / total
    maximum = 0.5 * (same_a + same_b)
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


class TestAdjustedRandIndex(unittest.TestCase):
    def test_known_values(self):
        logger.info("=== 测试 ARI ===")
        self.assertEqual(adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 2]), 1.0)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2], [2, 2, 1, 1]), 1.0, places=14)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2], [1, 1, 1, 2]), 0.0, places=14)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 3]), 4 / 7, places=14)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2], [1, 2, 2, 2]), 0.0, places=14)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2, 3, 3], [1, 1, 2, 2, 2, 2]), 4 / 9, places=14)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 1, 2, 2, 2], [1, 1, 2, 2, 3, 3]), 8 / 33, places=14)
        logger.info("✓ 手算结果一致")

    def test_trivial_partitions(self):
        self.assertEqual(adjusted_rand_index([1, 1, 1], [2, 2, 2]), 1.0)

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            n = int(rng.integers(2, 31))
            a = rng.integers(1, 4, size=n).tolist()
            b = rng.integers(1, 4, size=n).tolist()
            self.assertAlmostEqual(adjusted_rand_index(a, b), pair_counting_ari(a, b), places=12)

    def test_symmetric_and_label_free(self):
        rng = np.random.default_rng(6)
        a = rng.integers(1, 4, size=40)
        b = rng.integers(1, 3, size=40)
        self.assertAlmostEqual(adjusted_rand_index(a, b), adjusted_rand_index(b, a), places=14)
        self.assertAlmostEqual(adjusted_rand_index(a, b), adjusted_rand_index(a, 3 - b), places=14)

    def test_bad_input(self):
        with self.assertRaises(EsClustError):
            adjusted_rand_index([1], [1])
        with self.assertRaises(EsClustError):
            adjusted_rand_index([1, 2], [1, 2, 2])


class TestParameterError(unittest.TestCase):
    def setUp(self):
        self.truth = MixtureState([0.5, 0.5], [[0.6, 0.2], [0.2, 0.6]],
                                  [0.01 * np.eye(2), 0.02 * np.eye(2)])

    def test_zero_and_perturbations(self):
        logger.info("=== 测试参数平方误差 ===")
        self.assertEqual(parameter_squared_error(self.truth, self.truth, "ASE"), 0.0)
        eps = 1e-3
        moved = MixtureState([0.5 + eps, 0.5 - eps], self.truth.nu, self.truth.sigmas)
        self.assertAlmostEqual(parameter_squared_error(moved, self.truth, "ASE"), 2 * eps ** 2, places=15)
        nu = self.truth.nu.copy()
        nu[0, 1] += eps
        moved = MixtureState(self.truth.pi, nu, self.truth.sigmas)
        self.assertAlmostEqual(parameter_squared_error(moved, self.truth, "ASE"), eps ** 2, places=15)
        logger.info("✓ 扰动 ε 的误差为 ε² 量级")

    def test_label_switching(self):
        swapped = self.truth.permuted([1, 0])
        self.assertEqual(best_permutation(swapped.nu, self.truth.nu), (1, 0))
        self.assertAlmostEqual(parameter_squared_error(swapped, self.truth, "ASE"), 0.0, places=15)

    def test_lse_uses_scaled_means(self):
        truth = MixtureState(self.truth.pi, self.truth.nu, self.truth.sigmas, counts=[50, 50])
        em_state = MixtureState(truth.pi, truth.component_means(), truth.sigmas)
        self.assertAlmostEqual(parameter_squared_error(em_state, truth, "LSE"), 0.0, places=15)
        self.assertGreater(parameter_squared_error(self.truth, truth, "LSE"), 0.1)

    def test_shape_mismatch(self):
        one = MixtureState([1.0], [[0.5, 0.5]], [np.eye(2)])
        with self.assertRaises(EsClustError):
            parameter_squared_error(one, self.truth, "ASE")


class TestMedianCI(unittest.TestCase):
    def test_hundred_values(self):
        logger.info("=== 测试中位数置信区间 ===")
        lo, hi = median_ci(np.arange(1, 101))
        self.assertEqual((lo, hi), (40.0, 61.0))
        logger.info(f"✓ 1..100 的 95% 区间为 ({lo}, {hi})")

    def test_constant_and_shuffled(self):
        self.assertEqual(median_ci(np.zeros(30)), (0.0, 0.0))
        rng = np.random.default_rng(0)
        values = rng.permutation(np.arange(1, 101))
        self.assertEqual(median_ci(values), (40.0, 61.0))

    def test_small_samples(self):
        self.assertEqual(median_ci([6, 5, 4, 3, 2, 1]), (1.0, 6.0))
        with self.assertRaises(EsClustError):
            median_ci([1, 2, 3, 4, 5])
        with self.assertRaises(EsClustError):
            median_ci(np.arange(10), level=1.0)

    def test_contains_median(self):
        rng = np.random.default_rng(1)
        for n in (6, 11, 50, 99):
            values = rng.normal(size=n)
            lo, hi = median_ci(values)
            self.assertLessEqual(lo, np.median(values))
            self.assertGreaterEqual(hi, np.median(values))


class TestPairedTable(unittest.TestCase):
    def _results(self):
        results = []
        for rep, delta in enumerate([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]):
            results.append(PairedResult(rep, 10, seed=rep, ari_by_method={"es_ase": 0.5 + delta, "em_ase": 0.5}))
        for rep, delta in enumerate([-0.2, 0.4]):
            results.append(PairedResult(rep, 20, seed=rep, ari_by_method={"es_ase": 0.5 + delta, "em_ase": 0.5}))
        results.append(PairedResult(2, 20, seed=2, ari_by_method={"es_ase": math.nan, "em_ase": 0.5}))
        return results

    def test_toy_table(self):
        logger.info("=== 测试配对差值表 ===")
        table = paired_difference_table(self._results(), "es_ase", "em_ase")
        self.assertEqual(table["n"].tolist(), [10, 20])
        self.assertAlmostEqual(table.loc[0, "median"], 0.35, places=12)
        self.assertAlmostEqual(table.loc[0, "ci_lo"], 0.1, places=12)
        self.assertAlmostEqual(table.loc[0, "ci_hi"], 0.6, places=12)
        self.assertAlmostEqual(table.loc[1, "median"], 0.1, places=12)
        self.assertTrue(math.isnan(table.loc[1, "ci_lo"]))
        self.assertEqual(set(table["method_a"]), {"es_ase"})
        logger.info(f"✓ 配对差值表:\n{table}")

    def test_self_comparison(self):
        table = paired_difference_table(self._results(), "em_ase", "em_ase")
        self.assertTrue((table["median"] == 0.0).all())

    def test_nothing_to_compare(self):
        with self.assertRaises(NothingToCompareError):
            paired_difference_table(self._results(), "es_lse", "em_lse")

    def test_param_err_metric(self):
        results = [PairedResult(r, 10, seed=r, param_err_by_method={"a": 1.0 + r, "b": 1.0}) for r in range(6)]
        table = paired_difference_table(results, "a", "b", metric="param_err")
        self.assertAlmostEqual(table.loc[0, "median"], 2.5)
        with self.assertRaises(EsClustError):
            results[0].metric("other")


if __name__ == '__main__':
    unittest.main()
