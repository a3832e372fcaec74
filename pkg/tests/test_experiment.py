import os
import json
import tempfile
from unittest import TestCase
from scipy import stats

from ecorec.errors import InputError
from ecorec.experiment import (SUMMARY_COLUMNS, ExperimentConfig, _fmt, read_csv, run_experiment, summarize)


def small_config(out, **changes):
    d = dict(instance={'synthetic': {'n_providers': 6, 'n_users': 30}}, policies=['myopic', 'stochastic'],
             epochs=3, seeds=[0, 1], output_dir=out)
    d.update(changes)
    return ExperimentConfig.from_dict(d)


class ExperimentTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, 'results')

    def tearDown(self):
        self.tmp.cleanup()

    def test_outputs(self):
        summary = run_experiment(small_config(self.out, gammas=[0.5, 1.0], slate_size=2))
        for name in ['trajectories.csv', 'histogram.csv', 'summary.csv', 'welfare.svg', 'viable.svg']:
            self.assertTrue(os.path.exists(os.path.join(self.out, name)), msg=name)
        rows = read_csv(os.path.join(self.out, 'trajectories.csv'))
        self.assertEqual(len(rows), 2 * 2 * 2 * 3)
        self.assertEqual(len(read_csv(os.path.join(self.out, 'histogram.csv'))), 2 * 2 * 2 * 30)
        self.assertEqual(len(summary), 4)
        self.assertTrue(all(row['seeds'] == 2 for row in summary))

    def test_summary_recomputes_from_csv(self):
        run_experiment(small_config(self.out))
        written = read_csv(os.path.join(self.out, 'summary.csv'))
        again = summarize(read_csv(os.path.join(self.out, 'trajectories.csv')))
        self.assertEqual(list(written[0]), SUMMARY_COLUMNS)
        self.assertEqual(written, [{c: _fmt(row[c]) for c in SUMMARY_COLUMNS} for row in again])

    def test_summary_statistics(self):
        rows = [dict(policy='p', gamma=1.0, seed=s, epoch=e, social_welfare=w, avg_user_utility=w / 2,
                     max_regret=1.0, viable_count=3, **{'lambda': 0.0})
                for s, ws in enumerate([[4.0, 2.0], [6.0, 4.0]]) for e, w in enumerate(ws, 1)]
        (row,) = summarize(rows)
        self.assertAlmostEqual(row['welfare_mean'], 4.0)
        self.assertAlmostEqual(row['welfare_std'], 1.0)
        self.assertAlmostEqual(row['regret_welfare_ratio_mean'], (1.0 + 0.5) / 2)
        self.assertAlmostEqual(row['viable_count_mean'], 3.0)

    def test_charts_are_deterministic(self):
        other = os.path.join(self.tmp.name, 'again')
        run_experiment(small_config(self.out))
        run_experiment(small_config(other))
        for name in ['welfare.svg', 'viable.svg', 'trajectories.csv']:
            with open(os.path.join(self.out, name), 'rb') as a, open(os.path.join(other, name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), msg=name)

    def test_colgen_log(self):
        config = small_config(self.out, policies=['colgen'], seeds=[0], epochs=2,
                              instance={'synthetic': {'n_providers': 4, 'n_users': 8, 'reward_offset': 2.0}},
                              utility={'sigmoid': {'beta': -1.0, 'scale': 1.0}})
        run_experiment(config)
        self.assertTrue(os.path.exists(os.path.join(self.out, 'colgen_0_1_0.csv')))

    def test_embeddings_source(self):
        fixture = os.path.join(os.path.dirname(__file__), 'sample_data', 'fig1a.csv')
        config = small_config(self.out, instance={'embeddings': fixture, 'reward': 'negdist', 'offset': 2.0},
                              policies=['myopic'], deterministic_queries=True)
        (row,) = run_experiment(config)
        self.assertAlmostEqual(row['welfare_mean'], (10.1 + 8.1 + 8.1) / 3, places=5)
        self.assertAlmostEqual(row['viable_count_mean'], 2.0)

    def test_config_file(self):
        path = os.path.join(self.tmp.name, 'config.json')
        with open(path, 'w') as f:
            json.dump({'policies': ['greedy'], 'epochs': 4, 'seeds': [3]}, f)
        config = ExperimentConfig.from_file(path)
        self.assertEqual(config.policies, ['greedy'])
        self.assertEqual(config.seeds, [3])

    def test_config_errors(self):
        bad = [
            {'policy': ['myopic']},
            {'policies': ['oracle']},
            {'policies': []},
            {'seeds': []},
            {'seeds': [0.5]},
            {'epochs': 0},
            {'gammas': [0.0]},
            {'lambdas': [-1.0]},
            {'solver': {'pivot_rule': 'dantzig'}},
            {'abandonment': 'random'},
            {'instance': {'embedding': 'instance.csv'}},
            {'utility': {'tanh': {}}},
            {'policies': ['myopic', 'colgen']},
            {'policies': ['lp-rs', 'colgen'], 'utility': {'sigmoid': {'beta': -1.0}}},
        ]
        for d in bad:
            with self.assertRaises(InputError, msg=str(d)):
                ExperimentConfig.from_dict(d)
        path = os.path.join(self.tmp.name, 'config.json')
        with open(path, 'w') as f:
            f.write('{"policies": [')
        with self.assertRaises(InputError):
            ExperimentConfig.from_file(path)
        with self.assertRaises(InputError):
            ExperimentConfig.from_file(os.path.join(self.tmp.name, 'missing.json'))
        with self.assertRaises(InputError):
            small_config(self.out, instance={'synthetic': {'colour': 'red'}}).build_instance(0, 1.0)

    def test_colgen_needs_sigmoid_utility(self):
        with self.assertRaises(InputError) as ctx:
            small_config(self.out, policies=['colgen'])
        self.assertIn('sigmoid', str(ctx.exception))
        config = small_config(self.out, policies=['myopic', 'colgen'], utility={'sigmoid': {}})
        self.assertEqual(config.utility, {'sigmoid': {}})

    def test_unwritable_output(self):
        blocker = os.path.join(self.tmp.name, 'file')
        with open(blocker, 'w') as f:
            f.write('x')
        with self.assertRaises(InputError):
            run_experiment(small_config(os.path.join(blocker, 'results')))


class DirectionalTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_lp_rs_beats_myopic(self):
        for variant in ('skewed', 'uniform'):
            out = os.path.join(self.tmp.name, variant)
            config = ExperimentConfig(instance={'synthetic': {'variant': variant}}, policies=['myopic', 'lp-rs'],
                                      epochs=10, seeds=[0, 1, 2], output_dir=out)
            summary = {row['policy']: row for row in run_experiment(config)}
            myopic, rounded = summary['myopic'], summary['lp-rs']
            self.assertGreater(rounded['welfare_mean'], myopic['welfare_mean'], msg=variant)
            self.assertGreater(rounded['viable_count_mean'], myopic['viable_count_mean'], msg=variant)

    def test_regret_ratio_grows_with_gamma(self):
        gammas = [0.1, 0.35, 0.67, 1.0]
        config = ExperimentConfig(instance={'synthetic': {'variant': 'uniform', 'n_providers': 10, 'n_users': 120,
                                                          'nu': 32}},
                                  policies=['lp-rs'], epochs=1, seeds=[0], gammas=gammas, slate_size=3,
                                  deterministic_queries=True, output_dir=self.tmp.name)
        summary = sorted(run_experiment(config), key=lambda row: row['gamma'])
        self.assertEqual([row['gamma'] for row in summary], gammas)
        self.assertTrue(all(row['avg_utility_mean'] > 0 for row in summary))
        ratios = [row['regret_welfare_ratio_mean'] for row in summary]
        self.assertTrue(all(r > 0 for r in ratios), msg=str(ratios))
        rho, _ = stats.spearmanr(gammas, ratios)
        self.assertGreater(rho, 0, msg=str(ratios))
