"""
Linear programs in the form solved by ecorec.lp.simplex, their solutions, a KKT-based solution verifier and a plain
text dump format for cross-checking LPs with external tools.

All programs are maximizations:

.. math::

    \\max c^T x \\quad s.t. \\quad A_i x \\;(\\le, \\ge, =)\\; b_i, \\quad l \\le x \\le u

with finite lower bounds and possibly infinite upper bounds.
"""

import enum
import numpy as np
import scipy.sparse as sp

from ecorec.errors import InputError


class Relation(enum.Enum):
    LE = '<='
    GE = '>='
    EQ = '='


class LpStatus(enum.Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'
    NUMERICAL_FAILURE = 'numerical_failure'


class LinearProgram:
    def __init__(self, objective, columns, relations, rhs, lower=None, upper=None):
        """
        A linear program to be maximized.

        Parameters
        ----------
        objective : array_like
            Objective coefficients c, one per variable.
        columns : sparse matrix or array_like
            The m x n constraint matrix A. Stored in compressed sparse column form.
        relations : sequence of Relation or str
            One relation per row ('<=', '>=' or '=').
        rhs : array_like
            Right-hand sides b, one per row.
        lower : array_like, optional
            Finite lower bounds on the variables. Defaults to 0.
        upper : array_like, optional
            Upper bounds on the variables, np.inf for none. Defaults to np.inf.
        """
        self.objective = np.asarray(objective, dtype=float).ravel()
        n = self.objective.size
        self.rhs = np.asarray(rhs, dtype=float).ravel()
        m = self.rhs.size
        self.columns = sp.csc_matrix(columns, dtype=float, shape=(m, n)) if m or n else sp.csc_matrix((m, n))
        if self.columns.shape != (m, n):
            raise InputError('constraint matrix has shape {}, expected {}'.format(self.columns.shape, (m, n)))
        self.relations = tuple(Relation(r) for r in relations)
        if len(self.relations) != m:
            raise InputError('{} relations for {} rows'.format(len(self.relations), m))

        self.lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise InputError('variable bounds must have one entry per variable')

        if not np.all(np.isfinite(self.objective)) or not np.all(np.isfinite(self.columns.data)):
            raise InputError('objective and constraint coefficients must be finite')
        if not np.all(np.isfinite(self.rhs)):
            raise InputError('right-hand sides must be finite')
        if not np.all(np.isfinite(self.lower)):
            raise InputError('lower bounds must be finite')
        if np.any(np.isnan(self.upper)) or np.any(self.upper < self.lower):
            raise InputError('upper bounds must not lie below lower bounds')

    @classmethod
    def from_triplets(cls, objective, rows, cols, vals, relations, rhs, lower=None, upper=None):
        """Build a program from coordinate-format constraint entries; duplicate entries are summed."""
        m, n = len(rhs), len(objective)
        columns = sp.coo_matrix((np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int),
                                                                 np.asarray(cols, dtype=int))), shape=(m, n))
        return cls(objective, columns.tocsc(), relations, rhs, lower, upper)

    @property
    def n_vars(self):
        return self.objective.size

    @property
    def n_rows(self):
        return self.rhs.size

    def slack_bounds(self):
        """
        Bounds of the logical variable s_i in the equality form A x + s = b.
        """
        lo = np.array([-np.inf if r is Relation.GE else 0.0 for r in self.relations])
        hi = np.array([np.inf if r is Relation.LE else 0.0 for r in self.relations])
        return lo, hi

    def scaled(self, factor):
        """The same program with its objective multiplied by factor."""
        return LinearProgram(self.objective * factor, self.columns, self.relations, self.rhs, self.lower,
                             self.upper)

    def __repr__(self):
        return 'LinearProgram(vars={}, rows={}, nnz={})'.format(self.n_vars, self.n_rows, self.columns.nnz)


class LpSolution:
    def __init__(self, status, primal=None, dual=None, objective_value=np.nan, pivots=0):
        self.status = status
        self.primal = primal
        self.dual = dual
        self.objective_value = objective_value
        self.pivots = pivots

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL

    def __repr__(self):
        return 'LpSolution(status={}, objective={}, pivots={})'.format(self.status.value, self.objective_value,
                                                                        self.pivots)


class VerificationReport:
    def __init__(self, primal_residual, dual_residual, complementarity, duality_gap, objective_value):
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.complementarity = complementarity
        self.duality_gap = duality_gap
        self.objective_value = objective_value

    def ok(self, tol=1e-6):
        return (self.primal_residual <= tol and self.dual_residual <= tol and self.complementarity <= tol
                and abs(self.duality_gap) <= tol * (1 + abs(self.objective_value)))

    def __repr__(self):
        return 'VerificationReport(primal={:.3g}, dual={:.3g}, complementarity={:.3g}, gap={:.3g})'.format(
            self.primal_residual, self.dual_residual, self.complementarity, self.duality_gap)


def _sup_linear(d, lo, hi):
    """Elementwise sup of d*x over lo <= x <= hi, with 0*inf taken as 0."""
    out = np.zeros_like(d)
    pos, neg = d > 0, d < 0
    with np.errstate(invalid='ignore'):
        out[pos] = d[pos] * hi[pos]
        out[neg] = d[neg] * lo[neg]
    return out


def verify_solution(lp, sol):
    """
    Check an Optimal solution against the KKT conditions of the program.

    The dual values y price the rows; reduced costs are d = c - A^T y for structural variables and -y for the logical
    variable s of each row (written as A x + s = b). The duality gap is measured against the Lagrangian bound

    .. math::

        b^T y + \\sum_j \\sup_{l_j \\le x_j \\le u_j} d_j x_j - c^T x

    taken over structural and logical variables; it is infinite when y is not dual feasible.

    Parameters
    ----------
    lp : LinearProgram
    sol : LpSolution

    Returns
    -------
    VerificationReport
        max primal residual (row and bound violations), max dual residual (reduced costs pushing against an
        infinite bound), max complementarity violation |d_j| * distance of x_j from the bound it should sit at, and
        the duality gap.
    """
    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.dual, dtype=float)
    c, A, b = lp.objective, lp.columns, lp.rhs
    ax = A @ x
    s = b - ax
    s_lo, s_hi = lp.slack_bounds()

    viol = [np.maximum(s_lo - s, 0), np.maximum(s - s_hi, 0), np.maximum(lp.lower - x, 0), np.maximum(x - lp.upper, 0)]
    viol = [v[np.isfinite(v)] for v in viol]
    primal_residual = max([float(v.max()) for v in viol if v.size] or [0.0])

    d = np.concatenate([c - A.T @ y, -y])
    xs = np.concatenate([x, s])
    lo = np.concatenate([lp.lower, s_lo])
    hi = np.concatenate([lp.upper, s_hi])

    bad = np.concatenate([d[(d > 0) & np.isinf(hi)], -d[(d < 0) & np.isinf(lo)]])
    dual_residual = float(bad.max()) if bad.size else 0.0

    target = np.where(d > 0, hi, np.where(d < 0, lo, xs))
    with np.errstate(invalid='ignore'):
        slack = np.where(np.isfinite(target), np.abs(xs - target), 0.0)
    complementarity = float(np.max(np.abs(d) * slack)) if d.size else 0.0

    objective = float(c @ x)
    bound = float(b @ y) + float(np.sum(_sup_linear(d, lo, hi)))
    gap = bound - objective if np.isfinite(bound) else np.inf

    return VerificationReport(primal_residual, dual_residual, complementarity, gap, objective)


def _fmt(v):
    if np.isinf(v):
        return 'inf' if v > 0 else '-inf'
    return repr(float(v))


def write_lp(lp, path):
    """
    Dump a program to a fixed-format text file.

    The format is line oriented::

        MAXIMIZE <n> <m>
        OBJ <c_0> ... <c_n-1>
        BOUND <j> <lower> <upper>          (only for bounds other than [0, inf))
        ROW <i> <relation> <rhs> <k> <j1>:<a1> ... <jk>:<ak>
        END
    """
    A = lp.columns.tocsr()
    with open(path, 'w') as f:
        f.write('MAXIMIZE {} {}\n'.format(lp.n_vars, lp.n_rows))
        f.write(' '.join(['OBJ'] + [_fmt(v) for v in lp.objective]) + '\n')
        for j in range(lp.n_vars):
            if lp.lower[j] != 0 or np.isfinite(lp.upper[j]):
                f.write('BOUND {} {} {}\n'.format(j, _fmt(lp.lower[j]), _fmt(lp.upper[j])))
        for i in range(lp.n_rows):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            entries = ['{}:{}'.format(j, _fmt(a)) for j, a in zip(A.indices[lo:hi], A.data[lo:hi])]
            f.write(' '.join(['ROW', str(i), lp.relations[i].value, _fmt(lp.rhs[i]), str(hi - lo)] + entries) + '\n')
        f.write('END\n')


def read_lp(path):
    """Read a program written by write_lp."""
    with open(path, 'r') as f:
        lines = [line.split() for line in f if line.strip()]
    if not lines or lines[0][0] != 'MAXIMIZE' or lines[-1][0] != 'END':
        raise InputError('{}: not an LP dump'.format(path))
    n, m = int(lines[0][1]), int(lines[0][2])
    objective = np.array([float(v) for v in lines[1][1:]])
    lower, upper = np.zeros(n), np.full(n, np.inf)
    relations, rhs = [None] * m, np.zeros(m)
    rows, cols, vals = [], [], []
    for lineno, parts in enumerate(lines[2:-1], start=3):
        if parts[0] == 'BOUND':
            j = int(parts[1])
            lower[j], upper[j] = float(parts[2]), float(parts[3])
        elif parts[0] == 'ROW':
            i = int(parts[1])
            relations[i], rhs[i] = parts[2], float(parts[3])
            for entry in parts[5:]:
                j, a = entry.split(':')
                rows.append(i)
                cols.append(int(j))
                vals.append(float(a))
        else:
            raise InputError('{}:{}: unexpected record {}'.format(path, lineno, parts[0]))
    if objective.size != n or any(r is None for r in relations):
        raise InputError('{}: incomplete LP dump'.format(path))
    return LinearProgram.from_triplets(objective, rows, cols, vals, relations, rhs, lower, upper)
