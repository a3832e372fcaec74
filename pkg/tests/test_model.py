import numpy as np
from unittest import TestCase

from ecorec.errors import InputError
from ecorec.model import (Instance, LinearUtility, ProviderRecord, RewardKind, SigmoidUtility, UserProfile,
                          discount_weights, reward, utility_linear, utility_sigmoid)


class ModelTestCase(TestCase):

    def setUp(self):
        self.users = [UserProfile(0, [1.0, 0.0]), UserProfile(1, [0.0, 2.0], variance=0.5, activation=0.5, demand=2)]
        self.providers = [ProviderRecord(0, [1.0, 1.0], 1.0), ProviderRecord(1, [-1.0, 0.5], 2.0)]

    def tearDown(self):
        pass

    def test_utility_linear(self):
        self.assertAlmostEqual(utility_linear([1.0, 2.0, 3.0], [1.0, 0.5, 0.25]), 2.75)
        with self.assertRaises(InputError):
            utility_linear([1.0, 2.0], [1.0])

    def test_discount_weights(self):
        self.assertTrue(np.allclose(discount_weights(0.5, 4), [1, 0.5, 0.25, 0.125]))
        self.assertTrue(np.allclose(discount_weights(1.0, 3), [1, 1, 1]))
        with self.assertRaises(InputError):
            discount_weights(0.0, 2)
        with self.assertRaises(InputError):
            discount_weights(0.5, 0)

    def test_utility_sigmoid(self):
        self.assertAlmostEqual(utility_sigmoid([0.0]), 0.5)
        self.assertAlmostEqual(utility_sigmoid([1.0, 1.0], beta=-2.0), 0.5)
        self.assertAlmostEqual(utility_sigmoid([1.0], scale=2.0), 1 / (1 + np.exp(-2.0)))
        with self.assertRaises(InputError):
            utility_sigmoid([1.0], scale=0.0)

    def test_sigmoid_derivative(self):
        u = SigmoidUtility(beta=0.3, scale=1.7)
        h = 1e-6
        for x in [-2.0, 0.0, 1.5]:
            numeric = (u.of_sum(x + h) - u.of_sum(x - h)) / (2 * h)
            self.assertAlmostEqual(u.derivative_of_sum(x), numeric, places=6)

    def test_profile_validation(self):
        with self.assertRaises(InputError):
            UserProfile(0, [0.0], variance=-1)
        with self.assertRaises(InputError):
            UserProfile(0, [0.0], activation=1.5)
        with self.assertRaises(InputError):
            UserProfile(0, [0.0], demand=0)
        with self.assertRaises(InputError):
            ProviderRecord(0, [0.0], threshold=-0.1)

    def test_profiles_are_read_only(self):
        with self.assertRaises(ValueError):
            self.users[0].mean[0] = 3.0

    def test_dot_product_rewards(self):
        instance = Instance(self.users, self.providers)
        self.assertTrue(np.allclose(instance.reward_matrix, [[1.0, -1.0], [2.0, 1.0]]))
        self.assertAlmostEqual(reward(instance, [2.0, 1.0], 1), -1.5)

    def test_negative_distance_rewards(self):
        instance = Instance(self.users, self.providers, RewardKind.NEGATIVE_DISTANCE, reward_offset=2.0)
        self.assertAlmostEqual(instance.reward_matrix[0, 0], 1.0)
        self.assertAlmostEqual(instance.reward_matrix[0, 1], 2.0 - np.hypot(2.0, 0.5))

    def test_reward_floor(self):
        instance = Instance(self.users, self.providers, reward_floor=0.0)
        self.assertTrue(np.allclose(instance.reward_matrix, [[1.0, 0.0], [2.0, 1.0]]))

    def test_query_weight_defaults(self):
        instance = Instance(self.users, self.providers)
        self.assertTrue(np.allclose(instance.query_weight, [1.0, 1.0]))
        self.assertTrue(np.allclose(instance.activations, [1.0, 0.5]))

    def test_engagement_weight_shapes(self):
        instance = Instance(self.users, self.providers, horizon=3, engagement_weight=[[1, 2], [3, 4]])
        self.assertEqual(instance.engagement_weight.shape, (2, 2, 3))
        self.assertTrue(np.all(instance.engagement_weight[1, 0] == 3))
        with self.assertRaises(InputError):
            Instance(self.users, self.providers, engagement_weight=np.ones((2, 3)))

    def test_instance_validation(self):
        with self.assertRaises(InputError):
            Instance([], self.providers)
        with self.assertRaises(InputError):
            Instance([UserProfile(1, [0.0, 0.0])], self.providers)
        with self.assertRaises(InputError):
            Instance([UserProfile(0, [0.0])], self.providers)
        with self.assertRaises(InputError):
            Instance(self.users, self.providers, slate_size=3)
        with self.assertRaises(InputError):
            Instance(self.users, self.providers, horizon=2, utility=LinearUtility([1.0]))

    def test_instance_without_providers(self):
        instance = Instance(self.users, [])
        self.assertEqual(instance.n_providers, 0)
        self.assertEqual(instance.reward_matrix.shape, (2, 0))

    def test_replace_and_thresholds(self):
        instance = Instance(self.users, self.providers)
        other = instance.with_thresholds(5.0)
        self.assertTrue(np.allclose(other.thresholds, [5.0, 5.0]))
        self.assertTrue(np.allclose(instance.thresholds, [1.0, 2.0]))
        longer = instance.replace(horizon=3)
        self.assertEqual(longer.horizon, 3)
        self.assertEqual(longer.utility.horizon, 3)
        self.assertEqual(longer.engagement_weight.shape, (2, 2, 3))
