import itertools
import numpy as np
from unittest import TestCase

from ecorec.data import fig1a_instance
from ecorec.ecosim import run_simulation
from ecorec.errors import InfeasibleError, InputError, LimitExceededError
from ecorec.model import Instance, ProviderRecord, RewardKind, UserProfile
from ecorec.solvers.matching import (MatchingPolicy, WelfareOracle, build_csw_lp, csw, exact_enumeration,
                                     greedy_providers, ideal_utilities, lp_rs, regret_report, regret_tradeoff)
from ecorec.synthetic import SyntheticParams, gen_synthetic


def random_instance(rng, n_providers, n_users, integral_thresholds=False):
    """Nonnegative dot-product rewards and thresholds around the average load."""
    users = [UserProfile(u, rng.uniform(0, 1, 2)) for u in range(n_users)]
    load = n_users / n_providers
    nu = rng.uniform(0, 1.5 * load, n_providers)
    if integral_thresholds:
        nu = np.floor(nu)
    providers = [ProviderRecord(c, rng.uniform(0, 1, 2), nu[c]) for c in range(n_providers)]
    return Instance(users, providers, RewardKind.DOT_PRODUCT)


class GoldenTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.instance = fig1a_instance()
        cls.floored = fig1a_instance(reward_floor=0.0)

    def setUp(self):
        pass

    def tearDown(self):
        pass

    def test_constrained_welfare(self):
        expected = {(0, 1, 2): 9.9, (0, 1): 8.1, (0,): 2.1, (1,): 4.0, (1, 2): 5.9}
        for providers, value in expected.items():
            g, policy = csw(self.instance, providers)
            self.assertAlmostEqual(g, value, places=6)
            self.assertEqual(policy.check(self.instance), [])

    def test_empty_set(self):
        g, policy = csw(self.instance, [])
        self.assertEqual(g, 0.0)
        self.assertTrue(policy.is_empty)

    def test_floored_single_provider(self):
        self.assertAlmostEqual(csw(self.floored, [0])[0], 5.05, places=6)

    def test_csw_lp(self):
        lp = build_csw_lp(self.instance, [0, 1, 2])
        self.assertEqual(lp.n_vars, 18)
        with self.assertRaises(InputError):
            build_csw_lp(self.instance, [])
        with self.assertRaises(InfeasibleError):
            build_csw_lp(self.instance.with_thresholds([2, 2, 7]), [0, 1, 2])

    def test_optimal_matching(self):
        policy = exact_enumeration(self.instance)
        self.assertEqual(policy.viable_set, (0, 1, 2))
        self.assertAlmostEqual(policy.welfare, 9.9, places=6)
        # The two in-between users are sent to their second-best providers.
        self.assertAlmostEqual(policy.pi[2, 1, 0], 1.0)
        self.assertAlmostEqual(policy.pi[4, 2, 0], 1.0)

    def test_greedy_trace(self):
        policy = greedy_providers(self.instance)
        trace = policy.diagnostics['trace']
        self.assertEqual([c for c, _ in trace], [1, 0, 2])
        self.assertTrue(np.allclose([g for _, g in trace], [4.0, 8.1, 9.9]))
        self.assertAlmostEqual(policy.welfare, 9.9, places=6)

    def test_greedy_trace_floored(self):
        trace = greedy_providers(self.floored).diagnostics['trace']
        self.assertEqual([c for c, _ in trace], [0, 1, 2])
        self.assertAlmostEqual(trace[0][1], 5.05, places=6)

    def test_lp_rs(self):
        policy = lp_rs(self.instance)
        self.assertEqual(policy.viable_set, (0, 1, 2))
        self.assertAlmostEqual(policy.welfare, 9.9, places=6)
        self.assertGreaterEqual(policy.diagnostics['relaxed_objective'], 9.9 - 1e-6)
        self.assertEqual(policy.check(self.instance), [])

    def test_ideal_utilities(self):
        self.assertTrue(np.allclose(ideal_utilities(self.instance), [2, 2, 1.05, 2, 1.05, 2]))

    def test_optimal_regret(self):
        report = regret_report(self.instance, exact_enumeration(self.instance))
        self.assertAlmostEqual(report.max_regret, 0.1, places=6)
        self.assertEqual(list(np.flatnonzero(report.regret > 1e-9)), [2, 4])

    def test_alternate_policy(self):
        policy = MatchingPolicy.from_assignment(self.floored, [0, 0, 2, 1, 1, 2])
        self.assertEqual(policy.check(self.floored), [])
        self.assertAlmostEqual(policy.welfare, 9.05, places=6)
        self.assertAlmostEqual(regret_report(self.floored, policy).max_regret, 1.05, places=6)

    def test_ideal_matching_has_no_regret(self):
        policy = MatchingPolicy.from_assignment(self.instance, [0, 0, 0, 1, 1, 2])
        self.assertAlmostEqual(regret_report(self.instance, policy).max_regret, 0.0, places=9)

    def test_infeasible_provider_is_skipped(self):
        instance = self.instance.with_thresholds([2, 2, 7])
        self.assertEqual(csw(instance, [2])[0], -np.inf)
        policy = exact_enumeration(instance)
        self.assertEqual(policy.viable_set, (0, 1))
        self.assertAlmostEqual(policy.welfare, 8.1, places=6)

    def test_nothing_feasible(self):
        users = [UserProfile(0, [1.0]), UserProfile(1, [2.0])]
        instance = Instance(users, [ProviderRecord(0, [1.0], 5.0)])
        policy = greedy_providers(instance)
        self.assertTrue(policy.is_empty)
        self.assertEqual(policy.welfare, 0.0)
        self.assertTrue(exact_enumeration(instance).is_empty)

    def test_enumeration_cap(self):
        with self.assertRaises(LimitExceededError):
            exact_enumeration(self.instance, max_providers=2)

    def test_oracle_cache(self):
        oracle = WelfareOracle(self.instance)
        self.assertAlmostEqual(oracle([2, 0, 1]), 9.9, places=6)
        self.assertAlmostEqual(oracle((0, 1, 2)), 9.9, places=6)
        self.assertEqual(oracle.evaluations, 1)

    def test_regret_tradeoff_sweep(self):
        previous = None
        for lam in [0, 1, 10, 100]:
            policy = regret_tradeoff(self.instance, lam)
            mr = regret_report(self.instance, policy).max_regret
            self.assertEqual(policy.check(self.instance), [])
            if lam == 0:
                self.assertAlmostEqual(policy.welfare, 9.9, places=6)
            else:
                self.assertAlmostEqual(policy.diagnostics['mr_variable'], mr, places=6)
            if previous is not None:
                self.assertLessEqual(mr, previous[0] + 1e-6)
                self.assertLessEqual(policy.welfare, previous[1] + 1e-6)
            previous = (mr, policy.welfare)
        self.assertLessEqual(previous[0], 0.1 + 1e-6)

    def test_regret_tradeoff_fixed_set(self):
        policy = regret_tradeoff(self.instance, 10, providers=[0, 1, 2])
        self.assertAlmostEqual(policy.diagnostics['mr_variable'],
                               regret_report(self.instance, policy).max_regret, places=6)
        with self.assertRaises(InputError):
            regret_tradeoff(self.instance, -1)


class PropertyTestCase(TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(2024)

    def tearDown(self):
        pass

    def test_submodularity(self):
        violations, from_empty = 0, 0
        for _ in range(200):
            C = int(self.rng.integers(2, 7))
            instance = random_instance(self.rng, C, int(self.rng.integers(2, 13)))
            oracle = WelfareOracle(instance)
            for c0, c1 in itertools.combinations(range(C), 2):
                rest = [c for c in range(C) if c not in (c0, c1)]
                for size in range(len(rest) + 1):
                    for base in itertools.combinations(rest, size):
                        base = list(base)
                        values = [oracle(base), oracle(base + [c0]), oracle(base + [c1]), oracle(base + [c0, c1])]
                        if min(values) == -np.inf:
                            continue
                        from_empty += not base
                        if values[3] - values[2] > values[1] - values[0] + 1e-6:
                            violations += 1
        self.assertEqual(violations, 0)
        self.assertGreater(from_empty, 0)

    def test_greedy_approximation(self):
        ratios = []
        for _ in range(50):
            instance = random_instance(self.rng, int(self.rng.integers(3, 8)), int(self.rng.integers(4, 13)))
            oracle = WelfareOracle(instance)
            exact = exact_enumeration(instance, oracle=oracle)
            if exact.is_empty or exact.welfare <= 0:
                continue
            greedy = greedy_providers(instance, oracle=oracle)
            self.assertLessEqual(greedy.welfare, exact.welfare + 1e-6)
            ratios.append(greedy.welfare / exact.welfare)
        self.assertTrue(ratios)
        self.assertGreaterEqual(min(ratios), 1 / np.e)

    def test_relaxation_bound(self):
        for _ in range(30):
            instance = random_instance(self.rng, int(self.rng.integers(2, 6)), int(self.rng.integers(3, 10)))
            exact = exact_enumeration(instance)
            rounded = lp_rs(instance)
            if 'relaxed_objective' in rounded.diagnostics:
                self.assertGreaterEqual(rounded.diagnostics['relaxed_objective'], exact.welfare - 1e-6)
            self.assertLessEqual(rounded.welfare, exact.welfare + 1e-6)
            self.assertEqual(rounded.check(instance), [])

    def test_integral_matching(self):
        for _ in range(20):
            instance = random_instance(self.rng, 4, 10, integral_thresholds=True)
            g, policy = csw(instance, [0, 1, 2, 3])
            if policy is None:
                continue
            self.assertTrue(np.allclose(policy.pi, np.round(policy.pi), atol=1e-7))

    def test_distinct_slots(self):
        instance = random_instance(self.rng, 4, 8)
        instance = instance.replace(horizon=2, slate_size=2, distinct_slots=True).with_thresholds(1.0)
        policy = lp_rs(instance)
        self.assertFalse(policy.is_empty)
        self.assertEqual(policy.check(instance), [])
        self.assertLessEqual(policy.pi.sum(axis=2).max(), 1 + 1e-7)

    def test_candidate_pruning(self):
        instance = random_instance(self.rng, 6, 12)
        policy = lp_rs(instance, candidates=3)
        self.assertEqual(policy.check(instance), [])


class SkewedInstanceTestCase(TestCase):

    def setUp(self):
        self.instance = gen_synthetic(SyntheticParams(variant='skewed', seed=0))

    def tearDown(self):
        pass

    def test_lp_rs_beats_myopic_equilibrium(self):
        policy = lp_rs(self.instance)
        self.assertEqual(policy.check(self.instance), [])
        myopic = run_simulation(self.instance, 'myopic', 10, deterministic_queries=True).metrics[-1]
        self.assertGreater(policy.welfare, myopic.social_welfare + 1e-6)
        self.assertGreaterEqual(len(policy.viable_set), myopic.viable_count)
