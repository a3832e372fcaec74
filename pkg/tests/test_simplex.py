import os
import itertools
import tempfile
import numpy as np
from unittest import TestCase
from scipy.optimize import linprog

from ecorec.errors import InputError
from ecorec.lp.program import LinearProgram, LpStatus, Relation, read_lp, verify_solution, write_lp
from ecorec.lp.simplex import solve_lp


def brute_force(lp):
    """Best vertex of a bounded program by solving every system of n active constraints."""
    A = lp.columns.toarray()
    m, n = A.shape
    planes = [(A[i], lp.rhs[i]) for i in range(m)]
    planes += [(np.eye(n)[j], lp.lower[j]) for j in range(n)]
    planes += [(np.eye(n)[j], lp.upper[j]) for j in range(n)]
    best = None
    for active in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[k][0] for k in active])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([planes[k][1] for k in active]))
        ax = A @ x
        ok = np.all(x >= lp.lower - 1e-9) and np.all(x <= lp.upper + 1e-9)
        for i, r in enumerate(lp.relations):
            if r is Relation.LE:
                ok &= ax[i] <= lp.rhs[i] + 1e-9
            elif r is Relation.GE:
                ok &= ax[i] >= lp.rhs[i] - 1e-9
            else:
                ok &= abs(ax[i] - lp.rhs[i]) <= 1e-9
        if ok:
            value = lp.objective @ x
            if best is None or value > best:
                best = value
    return best


def random_lp(rng, n, m, feasible=True, relations=(Relation.LE, Relation.GE)):
    A = rng.uniform(-1, 1, size=(m, n))
    lower = rng.uniform(-1, 0, size=n)
    upper = lower + rng.uniform(0.5, 3, size=n)
    rel = [relations[i] for i in rng.integers(len(relations), size=m)]
    if feasible:
        x0 = rng.uniform(lower, upper)
        ax = A @ x0
        gap = rng.uniform(0, 1, size=m)
        rhs = np.array([ax[i] + gap[i] if r is Relation.LE else ax[i] - gap[i] if r is Relation.GE else ax[i]
                        for i, r in enumerate(rel)])
    else:
        rhs = rng.uniform(-2, 2, size=m)
    return LinearProgram(rng.uniform(-1, 1, size=n), A, rel, rhs, lower, upper)


def linprog_value(lp):
    A = lp.columns.toarray()
    ub = [i for i, r in enumerate(lp.relations) if r is not Relation.EQ]
    eq = [i for i, r in enumerate(lp.relations) if r is Relation.EQ]
    sign = np.array([1.0 if lp.relations[i] is Relation.LE else -1.0 for i in ub])
    res = linprog(-lp.objective,
                  A_ub=(A[ub] * sign[:, None]) if ub else None, b_ub=(lp.rhs[ub] * sign) if ub else None,
                  A_eq=A[eq] if eq else None, b_eq=lp.rhs[eq] if eq else None,
                  bounds=list(zip(lp.lower, [None if np.isinf(u) else u for u in lp.upper])), method='highs')
    return res.status, -res.fun if res.status == 0 else None


class SimplexTestCase(TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def tearDown(self):
        pass

    def test_hand_built(self):
        lp = LinearProgram([3.0, 2.0], [[1.0, 1.0], [1.0, 3.0]], ['<=', '<='], [4.0, 6.0], upper=[3.0, np.inf])
        sol = solve_lp(lp)
        self.assertEqual(sol.status, LpStatus.OPTIMAL)
        self.assertTrue(np.allclose(sol.primal, [3.0, 1.0]))
        self.assertAlmostEqual(sol.objective_value, 11.0)
        report = verify_solution(lp, sol)
        self.assertTrue(report.ok())
        self.assertAlmostEqual(report.duality_gap, 0.0, places=9)

    def test_random_against_vertices(self):
        for k in range(300):
            n = int(self.rng.integers(1, 7))
            m = int(self.rng.integers(1, 7))
            lp = random_lp(self.rng, n, m, feasible=k % 4 != 0)
            sol = solve_lp(lp)
            expected = brute_force(lp)
            if expected is None:
                self.assertEqual(sol.status, LpStatus.INFEASIBLE, msg='case {}'.format(k))
                continue
            self.assertEqual(sol.status, LpStatus.OPTIMAL, msg='case {}'.format(k))
            self.assertAlmostEqual(sol.objective_value, expected, places=6, msg='case {}'.format(k))
            self.assertTrue(verify_solution(lp, sol).ok(), msg='case {}'.format(k))

    def test_random_against_linprog(self):
        for k in range(40):
            lp = random_lp(self.rng, 12, 8, relations=(Relation.LE, Relation.GE, Relation.EQ))
            if k % 2:
                lp = LinearProgram(lp.objective, lp.columns, lp.relations, lp.rhs, lp.lower,
                                   np.where(self.rng.random(12) < 0.5, np.inf, lp.upper))
            sol = solve_lp(lp)
            status, value = linprog_value(lp)
            if status == 0:
                self.assertEqual(sol.status, LpStatus.OPTIMAL, msg='case {}'.format(k))
                self.assertAlmostEqual(sol.objective_value, value, places=6, msg='case {}'.format(k))
                self.assertTrue(verify_solution(lp, sol).ok(), msg='case {}'.format(k))
            elif status == 2:
                self.assertEqual(sol.status, LpStatus.INFEASIBLE, msg='case {}'.format(k))
            elif status == 3:
                self.assertEqual(sol.status, LpStatus.UNBOUNDED, msg='case {}'.format(k))

    def test_bland_only(self):
        for _ in range(30):
            lp = random_lp(self.rng, 6, 5)
            a, b = solve_lp(lp), solve_lp(lp, dantzig_pivots=0)
            self.assertEqual(b.status, LpStatus.OPTIMAL)
            self.assertAlmostEqual(a.objective_value, b.objective_value, places=6)

    def test_infeasible(self):
        lp = LinearProgram([1.0], [[1.0], [1.0]], ['>=', '<='], [2.0, 1.0])
        self.assertEqual(solve_lp(lp).status, LpStatus.INFEASIBLE)

    def test_unbounded(self):
        lp = LinearProgram([1.0, 0.0], [[1.0, -1.0]], ['<='], [1.0])
        self.assertEqual(solve_lp(lp).status, LpStatus.UNBOUNDED)

    def test_no_rows(self):
        lp = LinearProgram([1.0, -1.0], np.zeros((0, 2)), [], [], lower=[0.0, -1.0], upper=[2.0, 1.0])
        sol = solve_lp(lp)
        self.assertTrue(np.allclose(sol.primal, [2.0, -1.0]))
        self.assertAlmostEqual(sol.objective_value, 3.0)

    def test_pivot_budget(self):
        lp = random_lp(self.rng, 10, 8)
        self.assertEqual(solve_lp(lp, max_pivots=0).status, LpStatus.NUMERICAL_FAILURE)

    def test_scaling(self):
        lp = random_lp(self.rng, 5, 4)
        base = solve_lp(lp)
        for factor in [0.01, 10.0, 1000.0]:
            scaled = solve_lp(lp.scaled(factor))
            self.assertAlmostEqual(scaled.objective_value / factor, base.objective_value, places=6)

    def test_weak_duality_under_perturbation(self):
        lp = random_lp(self.rng, 6, 4, relations=(Relation.LE,))
        sol = solve_lp(lp)
        for _ in range(20):
            delta = self.rng.uniform(0, 0.1, size=lp.n_rows)
            bigger = LinearProgram(lp.objective, lp.columns, lp.relations, lp.rhs + delta, lp.lower, lp.upper)
            # Relaxing <= rows cannot lower the optimum, and the old duals price the gain from above.
            value = solve_lp(bigger).objective_value
            self.assertGreaterEqual(value, sol.objective_value - 1e-9)
            self.assertLessEqual(value, sol.objective_value + delta @ sol.dual + 1e-7)

    def test_assignment_is_integral(self):
        for _ in range(10):
            n = 5
            cost = self.rng.uniform(0, 1, size=(n, n))
            rows, cols, vals = [], [], []
            for i, j in itertools.product(range(n), range(n)):
                rows.extend([i, n + j])
                cols.extend([i * n + j, i * n + j])
                vals.extend([1.0, 1.0])
            lp = LinearProgram.from_triplets(cost.ravel(), rows, cols, vals, ['='] * n + ['<='] * n,
                                             np.ones(2 * n))
            sol = solve_lp(lp)
            self.assertEqual(sol.status, LpStatus.OPTIMAL)
            self.assertTrue(np.allclose(sol.primal, np.round(sol.primal), atol=1e-7))

    def test_dump_round_trip(self):
        lp = random_lp(self.rng, 4, 3, relations=(Relation.LE, Relation.GE, Relation.EQ))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'lp.txt')
            write_lp(lp, path)
            again = read_lp(path)
        self.assertEqual(again.relations, lp.relations)
        self.assertTrue(np.array_equal(again.columns.toarray(), lp.columns.toarray()))
        self.assertTrue(np.array_equal(again.upper, lp.upper))
        self.assertEqual(solve_lp(again).status, solve_lp(lp).status)

    def test_read_rejects_garbage(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'lp.txt')
            with open(path, 'w') as f:
                f.write('MAXIMIZE 1 0\nOBJ 1\nCOLUMN 0\nEND\n')
            with self.assertRaises(InputError):
                read_lp(path)

    def test_program_validation(self):
        with self.assertRaises(InputError):
            LinearProgram([1.0], [[1.0]], ['<='], [np.inf])
        with self.assertRaises(InputError):
            LinearProgram([1.0], [[1.0]], ['<=', '<='], [1.0])
        with self.assertRaises(InputError):
            LinearProgram([1.0], [[1.0]], ['<='], [1.0], lower=[2.0], upper=[1.0])
