import io
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from unittest import TestCase

from ecorec.data import fig1a_instance
from ecorec.scripts.run import golden_values, main, myopic_matching


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class CliTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_verify(self):
        code, out, _ = run('verify')
        self.assertEqual(code, 0)
        self.assertNotIn('FAIL', out)
        for name, value, expected in golden_values():
            self.assertAlmostEqual(value, expected, places=6, msg=name)

    def test_solve_fixture(self):
        code, out, _ = run('solve', '--fixture', 'fig1a', '--method', 'exact')
        self.assertEqual(code, 0)
        self.assertIn('welfare     9.900000', out)
        self.assertIn('viable set  [0, 1, 2]', out)
        self.assertIn('max regret  0.100000', out)

    def test_solve_myopic(self):
        code, out, _ = run('solve', '--fixture', 'fig1a', '--method', 'myopic')
        self.assertEqual(code, 0)
        self.assertIn('welfare     8.100000', out)
        self.assertIn('viable set  [0, 1]', out)
        self.assertIn('max regret  2.000000', out)

    def test_myopic_matching_is_viable(self):
        instance = fig1a_instance()
        policy = myopic_matching(instance)
        self.assertEqual(policy.viable_set, (0, 1))
        self.assertEqual(policy.check(instance), [])

    def test_usage_in_help(self):
        out = io.StringIO()
        with redirect_stdout(out), self.assertRaises(SystemExit):
            main(['--help'])
        self.assertIn('python -m ecorec.scripts.run simulate', out.getvalue())

    def test_gen_is_deterministic(self):
        paths = [os.path.join(self.tmp.name, name) for name in ('a.csv', 'b.csv')]
        for path in paths:
            code, _, _ = run('gen', '--variant', 'uniform', '--seed', '7', '--providers', '5', '--users', '20',
                             '--out', path)
            self.assertEqual(code, 0)
        with open(paths[0]) as a, open(paths[1]) as b:
            self.assertEqual(a.read(), b.read())

        code, out, _ = run('solve', '--instance', paths[0], '--reward', 'negdist', '--method', 'greedy')
        self.assertEqual(code, 0)
        self.assertIn('viable set', out)

    def test_simulate(self):
        out_dir = os.path.join(self.tmp.name, 'results')
        code, out, _ = run('simulate', '--method', 'myopic', '--epochs', '2', '--seed', '1', '--out', out_dir)
        self.assertEqual(code, 0)
        self.assertTrue(os.path.exists(os.path.join(out_dir, 'summary.csv')))
        self.assertIn('myopic', out)

    def test_errors(self):
        code, _, err = run('solve', '--instance', os.path.join(self.tmp.name, 'missing.csv'))
        self.assertEqual(code, 1)
        self.assertIn('error:', err)
        with self.assertRaises(SystemExit) as ctx:
            run('solve', '--fixture', 'fig1a', '--method', 'oracle')
        self.assertEqual(ctx.exception.code, 2)
        with self.assertRaises(SystemExit) as ctx:
            run()
        self.assertEqual(ctx.exception.code, 2)
