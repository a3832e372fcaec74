"""
A bounded-variable revised primal simplex method.

Every row is turned into an equality with a logical variable, A x + s = b, where the bounds of s encode the row's
relation. Variables that are not basic sit at one of their bounds. Rows the starting point violates get an artificial
variable, and a first phase minimizes the sum of artificials. The basis is factorized with a sparse LU and updated in
product form between refactorizations.
"""

import logging
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ecorec.lp.program import LpSolution, LpStatus

logger = logging.getLogger(__name__)


class _IterationLimit(Exception):
    pass


class _SingularBasis(Exception):
    pass


class RevisedSimplex:
    def __init__(self, lp, feas_tol=1e-7, pivot_tol=1e-9, opt_tol=1e-9, max_pivots=None, dantzig_pivots=None,
                 refactor_every=50, at_upper=None):
        """
        Simplex solver state for a single LinearProgram.

        Parameters
        ----------
        lp : LinearProgram
            The program to maximize.
        feas_tol : float
            Tolerance on bound and row violations, used to declare infeasibility after the first phase and to accept
            the final basic solution.
        pivot_tol : float
            Entries of the transformed entering column smaller than this in magnitude are never pivoted on.
        opt_tol : float
            A reduced cost must exceed this in magnitude for its variable to enter the basis.
        max_pivots : int, optional
            Total pivot budget (both phases, including bound flips). Exceeding it yields NUMERICAL_FAILURE.
            Defaults to 50*(m+n) + 1000.
        dantzig_pivots : int, optional
            Number of pivots chosen by the largest reduced cost before switching to Bland's smallest-index rule,
            which cannot cycle. Defaults to 10*(m+n) + 100.
        refactor_every : int
            Number of product-form updates after which the basis is factorized afresh.
        at_upper : array_like of bool, optional
            Structural variables with a finite upper bound that should start nonbasic at that bound instead of at
            their lower bound. A good starting point shortens the first phase.
        """
        self.lp = lp
        self.feas_tol = feas_tol
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.refactor_every = refactor_every

        m, n = lp.n_rows, lp.n_vars
        self.m, self.n = m, n
        self.max_pivots = max_pivots if max_pivots is not None else 50 * (m + n) + 1000
        self.dantzig_pivots = dantzig_pivots if dantzig_pivots is not None else 10 * (m + n) + 100

        s_lo, s_hi = lp.slack_bounds()
        x_struct = lp.lower.copy()
        upper_start = np.zeros(n, dtype=bool)
        if at_upper is not None:
            upper_start = np.asarray(at_upper, dtype=bool) & np.isfinite(lp.upper)
            x_struct[upper_start] = lp.upper[upper_start]

        # Logical variable values that would satisfy every row exactly at the starting point.
        r = lp.rhs - lp.columns @ x_struct
        fits = (r >= s_lo - feas_tol) & (r <= s_hi + feas_tol)
        s_start = np.clip(r, s_lo, s_hi)
        art_rows = np.flatnonzero(~fits)
        art_sign = np.sign(r[art_rows] - s_start[art_rows])
        self.n_art = art_rows.size

        blocks = [lp.columns] if n else []
        blocks.append(sp.identity(m, format='csc'))
        if self.n_art:
            blocks.append(sp.csc_matrix((art_sign, (art_rows, np.arange(self.n_art))), shape=(m, self.n_art)))
        self.M = sp.hstack(blocks, format='csc')
        self.MT = self.M.T.tocsr()
        self.N = n + m + self.n_art

        self.lower = np.concatenate([lp.lower, s_lo, np.zeros(self.n_art)])
        self.upper = np.concatenate([lp.upper, s_hi, np.full(self.n_art, np.inf)])
        self.x = np.concatenate([x_struct, s_start, np.abs(r[art_rows] - s_start[art_rows])])

        self.basis = np.where(fits, n + np.arange(m), 0)
        self.basis[art_rows] = n + m + np.arange(self.n_art)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.nb_upper = np.zeros(self.N, dtype=bool)
        self.nb_upper[:n] = upper_start
        # A logical variable left nonbasic sits at the bound nearest to its exact value.
        nonbasic_slacks = n + art_rows
        self.nb_upper[nonbasic_slacks] = (s_start[art_rows] == s_hi[art_rows]) & np.isfinite(s_hi[art_rows])

        self.pivots = 0
        self._lu = None
        self._etas = []

    # Basis factorization

    def _column(self, j):
        out = np.zeros(self.m)
        lo, hi = self.M.indptr[j], self.M.indptr[j + 1]
        out[self.M.indices[lo:hi]] = self.M.data[lo:hi]
        return out

    def _refactor(self):
        B = self.M[:, self.basis].tocsc()
        try:
            self._lu = splu(B)
        except RuntimeError as e:
            raise _SingularBasis(str(e))
        self._etas = []
        # Recompute basic values from the nonbasic ones to shed accumulated drift.
        x_n = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self._lu.solve(self.lp.rhs - self.M @ x_n)
        if not np.all(np.isfinite(self.x[self.basis])):
            raise _SingularBasis('non-finite basic solution')

    def _ftran(self, a):
        v = self._lu.solve(a)
        for r, col in self._etas:
            wr = v[r] / col[r]
            v -= col * wr
            v[r] = wr
        return v

    def _btran(self, c):
        z = np.array(c, dtype=float)
        for r, col in reversed(self._etas):
            z[r] = (z[r] - (col @ z - col[r] * z[r])) / col[r]
        return self._lu.solve(z, trans='T')

    # Iterations

    def _choose_entering(self, d):
        movable = ~self.is_basic & (self.upper > self.lower)
        up = movable & ~self.nb_upper & (d > self.opt_tol)
        down = movable & self.nb_upper & (d < -self.opt_tol)
        eligible = up | down
        if not eligible.any():
            return None
        if self.pivots < self.dantzig_pivots:
            score = np.where(eligible, np.abs(d), -1.0)
            return int(np.argmax(score))
        return int(np.flatnonzero(eligible)[0])

    def _ratio_test(self, alpha, delta):
        xb = self.x[self.basis]
        lb = self.lower[self.basis]
        ub = self.upper[self.basis]
        ad = delta * alpha
        ratios = np.full(self.m, np.inf)
        with np.errstate(divide='ignore', invalid='ignore'):
            dec = (ad > self.pivot_tol) & np.isfinite(lb)
            ratios[dec] = (xb[dec] - lb[dec]) / ad[dec]
            inc = (ad < -self.pivot_tol) & np.isfinite(ub)
            ratios[inc] = (ub[inc] - xb[inc]) / -ad[inc]
        ratios = np.maximum(ratios, 0.0)
        theta = ratios.min() if self.m else np.inf
        if not np.isfinite(theta):
            return np.inf, -1, False
        ties = np.flatnonzero(ratios <= theta + 1e-12)
        if self.pivots < self.dantzig_pivots:
            r = int(ties[np.argmax(np.abs(alpha[ties]))])
        else:
            r = int(ties[np.argmin(self.basis[ties])])
        return theta, r, bool(ad[r] < 0)

    def _iterate(self, cost):
        while True:
            if self.pivots >= self.max_pivots:
                raise _IterationLimit()
            y = self._btran(cost[self.basis])
            d = cost - self.MT @ y
            q = self._choose_entering(d)
            if q is None:
                return LpStatus.OPTIMAL

            delta = -1.0 if self.nb_upper[q] else 1.0
            alpha = self._ftran(self._column(q))
            theta, r, to_upper = self._ratio_test(alpha, delta)
            flip = self.upper[q] - self.lower[q]
            if not np.isfinite(theta) and not np.isfinite(flip):
                return LpStatus.UNBOUNDED

            self.pivots += 1
            if flip <= theta:
                self.x[self.basis] -= flip * delta * alpha
                self.x[q] = self.lower[q] if self.nb_upper[q] else self.upper[q]
                self.nb_upper[q] = not self.nb_upper[q]
                continue

            self.x[self.basis] -= theta * delta * alpha
            self.x[q] += delta * theta
            p = self.basis[r]
            self.x[p] = self.upper[p] if to_upper else self.lower[p]
            self.nb_upper[p] = to_upper
            self.is_basic[p] = False
            self.is_basic[q] = True
            self.nb_upper[q] = False
            self.basis[r] = q
            self._etas.append((r, alpha))
            if len(self._etas) >= self.refactor_every:
                self._refactor()

    def _finish(self, status):
        return LpSolution(status, pivots=self.pivots)

    def solve(self):
        """
        Run both phases.

        Returns
        -------
        LpSolution
            With primal values for the structural variables and one dual value per row when OPTIMAL.
        """
        lp, n, m = self.lp, self.n, self.m
        if m == 0:
            return self._solve_unconstrained()
        try:
            self._refactor()
            if self.n_art:
                cost = np.zeros(self.N)
                cost[n + m:] = -1.0
                status = self._iterate(cost)
                infeasibility = float(np.sum(self.x[n + m:]))
                logger.debug('phase 1: %d artificials, infeasibility %.3g after %d pivots', self.n_art,
                             infeasibility, self.pivots)
                if status is not LpStatus.OPTIMAL or infeasibility > self.feas_tol * (1 + np.abs(lp.rhs).max()):
                    return self._finish(LpStatus.INFEASIBLE)
                self.upper[n + m:] = 0.0
                self.x[n + m:][~self.is_basic[n + m:]] = 0.0

            cost = np.zeros(self.N)
            cost[:n] = lp.objective
            status = self._iterate(cost)
            if status is LpStatus.UNBOUNDED:
                return self._finish(status)

            self._refactor()
            y = self._btran(cost[self.basis])
        except _IterationLimit:
            logger.warning('simplex stopped after %d pivots (m=%d, n=%d)', self.pivots, m, n)
            return self._finish(LpStatus.NUMERICAL_FAILURE)
        except _SingularBasis as e:
            logger.warning('simplex basis became singular after %d pivots: %s', self.pivots, e)
            return self._finish(LpStatus.NUMERICAL_FAILURE)

        xb = self.x[self.basis]
        drift = np.concatenate([self.lower[self.basis] - xb, xb - self.upper[self.basis]])
        scale = 1 + max(np.abs(lp.rhs).max(), np.abs(xb).max())
        if drift.max() > 1e2 * self.feas_tol * scale:
            logger.warning('simplex basic solution violates bounds by %.3g', drift.max())
            return self._finish(LpStatus.NUMERICAL_FAILURE)

        primal = np.clip(self.x[:n], lp.lower, lp.upper)
        objective = float(lp.objective @ primal)
        logger.debug('simplex optimal: m=%d n=%d pivots=%d objective=%.6f', m, n, self.pivots, objective)
        return LpSolution(LpStatus.OPTIMAL, primal, y, objective, self.pivots)

    def _solve_unconstrained(self):
        lp = self.lp
        c = lp.objective
        if np.any((c > 0) & np.isinf(lp.upper)):
            return LpSolution(LpStatus.UNBOUNDED)
        primal = np.where(c > 0, lp.upper, lp.lower)
        return LpSolution(LpStatus.OPTIMAL, primal, np.zeros(0), float(c @ primal), 0)


def solve_lp(lp, **kwargs):
    """
    Maximize a LinearProgram.

    Pivots are chosen by the largest reduced cost for a bounded number of iterations and by Bland's rule afterwards,
    so the result is a deterministic function of the program.

    Parameters
    ----------
    lp : LinearProgram
    kwargs
        Solver knobs forwarded to RevisedSimplex (tolerances, pivot budgets, at_upper starting hint).

    Returns
    -------
    LpSolution
    """
    return RevisedSimplex(lp, **kwargs).solve()
