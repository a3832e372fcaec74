"""
Welfare-optimal stochastic matchings of users to providers under provider viability constraints, for additive
(alpha-weighted) utilities.

Each user is represented by one canonical query, its profile mean, issued with weight Q(u) per epoch. A matching
assigns every (user, slot) pair a distribution pi[u, c, t] over providers, and a provider c kept in the viable set
must receive at least its threshold nu_c of expected engagement:

.. math::

    \\sum_{u,t} w_{u,c,t} Q(u) \\pi_{u,c,t} \\ge \\nu_c

The constrained welfare g(C) is the best such matching when exactly the providers in C must stay viable. This module
solves g(C) as an LP, selects provider sets greedily, by rounding the LP relaxation of the joint problem, or by
enumerating all sets, and measures per-user regret against each user's ideal provider.
"""

import copy
import itertools
import logging
import operator
import numpy as np
from cachetools import cachedmethod, Cache

from ecorec.errors import InputError, InfeasibleError, LimitExceededError, SolverError
from ecorec.lp.program import LinearProgram, LpStatus, Relation
from ecorec.lp.simplex import solve_lp
from ecorec.model import LinearUtility

logger = logging.getLogger(__name__)

_TIE = 1e-9


def slot_weights(instance):
    """The alpha vector of an instance with additive utility."""
    if not isinstance(instance.utility, LinearUtility):
        raise InputError('matching solvers need an additive utility, got {}; use ecorec.solvers.colgen'.format(
            instance.utility))
    return np.asarray(instance.utility.alpha)


class MatchingPolicy:
    def __init__(self, pi, viable_set, welfare, per_user_utility, diagnostics=None):
        """
        A stochastic matching and the provider set it keeps viable.

        Parameters
        ----------
        pi : ndarray
            Matching probabilities of shape (U, C, T) over all providers of the instance.
        viable_set : tuple of int
            Sorted ids of the providers the policy commits to keeping viable.
        welfare : float
            Expected social welfare, the sum of per_user_utility.
        per_user_utility : ndarray
            Expected epoch utility of each user under the policy.
        diagnostics : dict, optional
            Solver-specific details (relaxed objective, rounding outcome, greedy trace, ...).
        """
        self.pi = pi
        self.viable_set = tuple(int(c) for c in viable_set)
        self.welfare = float(welfare)
        self.per_user_utility = np.asarray(per_user_utility, dtype=float)
        self.diagnostics = dict(diagnostics or {})

    @classmethod
    def empty(cls, instance, **diagnostics):
        U, C, T = instance.n_users, instance.n_providers, instance.horizon
        diagnostics.setdefault('empty', True)
        return cls(np.zeros((U, C, T)), (), 0.0, np.zeros(U), diagnostics)

    @classmethod
    def from_assignment(cls, instance, assignment):
        """
        A deterministic policy from explicit choices.

        Parameters
        ----------
        instance : Instance
        assignment : sequence
            For every user, either a provider id (used in every slot) or a sequence of T provider ids, one per slot.
        """
        alpha = slot_weights(instance)
        U, C, T = instance.n_users, instance.n_providers, instance.horizon
        if len(assignment) != U:
            raise InputError('{} assignments for {} users'.format(len(assignment), U))
        pi = np.zeros((U, C, T))
        for u, choice in enumerate(assignment):
            slots = [choice] * T if np.isscalar(choice) else list(choice)
            if len(slots) != T:
                raise InputError('user {}: {} slots assigned, expected {}'.format(u, len(slots), T))
            for t, c in enumerate(slots):
                pi[u, int(c), t] = 1.0
        per_user = _per_user_utility(instance, pi, alpha)
        viable = np.flatnonzero(pi.sum(axis=(0, 2)) > 0)
        return cls(pi, viable, per_user.sum(), per_user)

    @property
    def is_empty(self):
        return not self.viable_set

    def annotate(self, **diagnostics):
        """A shallow copy with extra diagnostics."""
        other = copy.copy(self)
        other.diagnostics = dict(self.diagnostics, **diagnostics)
        return other

    def engagement(self, instance):
        """Expected engagement each provider receives per epoch."""
        return np.einsum('uct,uct,u->c', instance.engagement_weight, self.pi, instance.query_weight)

    def check(self, instance, tol=1e-7):
        """
        Verify the policy's invariants on an instance.

        Returns
        -------
        list of str
            Descriptions of every violated invariant; empty when the policy is valid.
        """
        problems = []
        pi = self.pi
        if pi.shape != (instance.n_users, instance.n_providers, instance.horizon):
            return ['pi has shape {}'.format(pi.shape)]
        if pi.size and pi.min() < -tol:
            problems.append('negative matching probability {:.3g}'.format(pi.min()))
        outside = np.setdiff1d(np.arange(instance.n_providers), self.viable_set)
        if outside.size and np.abs(pi[:, outside, :]).max() > tol:
            problems.append('mass on providers outside the viable set')
        if self.viable_set:
            sums = pi.sum(axis=1)
            worst = np.abs(sums - 1).max()
            if worst > tol:
                problems.append('slot distributions off by {:.3g}'.format(worst))
            engagement = self.engagement(instance)
            for c in self.viable_set:
                if engagement[c] < instance.thresholds[c] - tol:
                    problems.append('provider {} gets {:.6f} < {:.6f}'.format(c, engagement[c],
                                                                              instance.thresholds[c]))
        if instance.distinct_slots and pi.size and pi.sum(axis=2).max() > 1 + tol:
            problems.append('provider repeated within a slate')
        return problems

    def __repr__(self):
        return 'MatchingPolicy(viable_set={}, welfare={:.6f})'.format(list(self.viable_set), self.welfare)


def _per_user_utility(instance, pi, alpha):
    return instance.activations * np.einsum('uct,uc,t->u', pi, instance.reward_matrix, alpha)


class RegretReport:
    def __init__(self, mu, regret):
        self.mu = mu
        self.regret = regret
        self.max_regret = float(regret.max()) if regret.size else 0.0

    def __repr__(self):
        return 'RegretReport(max_regret={:.6f})'.format(self.max_regret)


def _engagement_capacity(instance, providers):
    """Largest expected engagement each provider could receive if every user favoured it."""
    w = instance.engagement_weight[:, providers, :]
    per_user = w.max(axis=2) if instance.distinct_slots else w.sum(axis=2)
    return instance.query_weight @ per_user


def _total_supply(instance, providers):
    w = instance.engagement_weight[:, providers, :]
    return float(instance.query_weight @ w.max(axis=1).sum(axis=1))


def check_supply(instance, providers):
    """
    Raise InfeasibleError when the providers cannot all be kept viable by any matching.

    The checks are necessary conditions only: a provider's threshold must not exceed the engagement it could get from
    all users at once, and the thresholds together must not exceed the total engagement users generate.
    """
    providers = np.asarray(sorted(providers), dtype=int)
    if instance.distinct_slots and instance.horizon > providers.size:
        raise InfeasibleError('{} providers cannot fill {} distinct slots'.format(providers.size, instance.horizon))
    nu = instance.thresholds[providers]
    short = providers[_engagement_capacity(instance, providers) < nu - _TIE]
    if short.size:
        raise InfeasibleError('providers {} cannot reach their thresholds'.format(short.tolist()))
    supply = _total_supply(instance, providers)
    if nu.sum() > supply + _TIE:
        raise InfeasibleError('thresholds {:.6f} exceed total supply {:.6f}'.format(nu.sum(), supply))


class MatchingProgram:
    def __init__(self, instance, providers, relaxed=False, candidates=None):
        """
        The matching LP over a set of providers, with the index maps needed to read a policy back from a solution.

        Parameters
        ----------
        instance : Instance
        providers : iterable of int
            The providers that may be matched.
        relaxed : bool
            If False, every provider must stay viable (the constrained welfare LP). If True, each provider gets a
            variable y_c in [0,1] scaling its threshold, with linking rows sum_t pi[u,c,t] <= y_c (the LP relaxation of
            the joint provider-selection problem).
        candidates : int, optional
            Keep only each user's `candidates` highest-reward providers as matching variables.
        """
        alpha = slot_weights(instance)
        self.instance = instance
        self.providers = np.array(sorted(set(int(c) for c in providers)), dtype=int)
        self.relaxed = relaxed
        U, T, P = instance.n_users, instance.horizon, self.providers.size
        R = instance.reward_matrix[:, self.providers]

        mask = np.ones((U, P), dtype=bool)
        if candidates is not None and candidates < P:
            top = np.argsort(-R, axis=1, kind='stable')[:, :candidates]
            mask = np.zeros((U, P), dtype=bool)
            np.put_along_axis(mask, top, True, axis=1)
        pair_u, pair_p = np.nonzero(mask)
        n_pairs = pair_u.size
        self._mask, self._R = mask, R

        # Matching variable of (pair, slot) sits at pair * T + slot.
        self.var_pair = np.repeat(np.arange(n_pairs), T)
        self.var_u = pair_u[self.var_pair]
        self.var_p = pair_p[self.var_pair]
        self.var_t = np.tile(np.arange(T), n_pairs)
        self.n_pi = n_pairs * T
        self.utility_coef = alpha[self.var_t] * instance.activations[self.var_u] * R[self.var_u, self.var_p]
        self._pair_of = np.full((U, P), -1)
        self._pair_of[pair_u, pair_p] = np.arange(n_pairs)

        self._objective = [self.utility_coef]
        self._lower = [np.zeros(self.n_pi)]
        self._upper = [np.ones(self.n_pi)]
        self._rows, self._cols, self._vals, self._relations, self._rhs = [], [], [], [], []
        self.n_vars = self.n_pi
        self.n_rows = 0
        self.y_index = None
        self.mr_index = None
        pi_cols = np.arange(self.n_pi)

        base = self._add_rows(U * T, Relation.EQ, np.ones(U * T))
        self._add_entries(base + self.var_u * T + self.var_t, pi_cols, np.ones(self.n_pi))

        if relaxed:
            self.y_index = self._add_vars(np.zeros(P), 0.0, 1.0)
            base = self._add_rows(n_pairs, Relation.LE, np.zeros(n_pairs))
            self._add_entries(base + self.var_pair, pi_cols, np.ones(self.n_pi))
            self._add_entries(base + np.arange(n_pairs), self.y_index[pair_p], -np.ones(n_pairs))
        elif instance.distinct_slots and T > 1:
            base = self._add_rows(n_pairs, Relation.LE, np.ones(n_pairs))
            self._add_entries(base + self.var_pair, pi_cols, np.ones(self.n_pi))

        nu = instance.thresholds[self.providers]
        weight = (instance.engagement_weight[self.var_u, self.providers[self.var_p], self.var_t]
                  * instance.query_weight[self.var_u])
        if relaxed:
            base = self._add_rows(P, Relation.GE, np.zeros(P))
            self._add_entries(base + np.arange(P), self.y_index, -nu)
        else:
            base = self._add_rows(P, Relation.GE, nu)
        self.viability_rows = base + np.arange(P)
        self._add_entries(base + self.var_p, pi_cols, weight)

    def _add_vars(self, objective, lower, upper):
        k = len(objective)
        self._objective.append(np.asarray(objective, dtype=float))
        self._lower.append(np.full(k, lower, dtype=float))
        self._upper.append(np.full(k, upper, dtype=float))
        index = self.n_vars + np.arange(k)
        self.n_vars += k
        return index

    def _add_rows(self, k, relation, rhs):
        base = self.n_rows
        self._relations.extend([relation] * k)
        self._rhs.append(np.asarray(rhs, dtype=float))
        self.n_rows += k
        return base

    def _add_entries(self, rows, cols, vals):
        self._rows.append(np.asarray(rows))
        self._cols.append(np.asarray(cols))
        self._vals.append(np.asarray(vals, dtype=float))

    def copy(self):
        other = copy.copy(self)
        for name in ('_objective', '_lower', '_upper', '_rows', '_cols', '_vals', '_relations', '_rhs'):
            setattr(other, name, list(getattr(self, name)))
        return other

    def build(self):
        """The LinearProgram as currently assembled."""
        return LinearProgram.from_triplets(
            np.concatenate(self._objective), np.concatenate(self._rows), np.concatenate(self._cols),
            np.concatenate(self._vals), self._relations, np.concatenate(self._rhs), np.concatenate(self._lower),
            np.concatenate(self._upper))

    def start_hint(self):
        """
        Variables to start at their upper bound: every slot of every user matched to its best allowed provider
        (successive best ones when slots must be distinct), and every y_c at 1.
        """
        hint = np.zeros(self.n_vars, dtype=bool)
        U, T = self.instance.n_users, self.instance.horizon
        ranked = np.argsort(-np.where(self._mask, self._R, -np.inf), axis=1, kind='stable')
        allowed = self._mask.sum(axis=1)
        distinct = self.instance.distinct_slots and T > 1
        for t in range(T):
            rank = np.minimum(t if distinct else 0, np.maximum(allowed - 1, 0))
            p = ranked[np.arange(U), rank]
            pair = self._pair_of[np.arange(U), p]
            ok = pair >= 0
            hint[pair[ok] * T + t] = True
        if self.y_index is not None:
            hint[self.y_index] = True
        return hint

    def solve(self, **lp_options):
        return solve_lp(self.build(), at_upper=self.start_hint(), **lp_options)

    def policy(self, solution, **diagnostics):
        """Read the matching of an Optimal solution back into a MatchingPolicy over the program's providers."""
        inst = self.instance
        x = solution.primal
        x_pi = np.clip(x[:self.n_pi], 0.0, 1.0)
        pi = np.zeros((inst.n_users, inst.n_providers, inst.horizon))
        pi[self.var_u, self.providers[self.var_p], self.var_t] = x_pi
        per_user = np.bincount(self.var_u, weights=self.utility_coef * x_pi, minlength=inst.n_users)
        diagnostics['objective'] = solution.objective_value
        if self.mr_index is not None:
            diagnostics['mr_variable'] = float(x[self.mr_index])
        return MatchingPolicy(pi, self.providers, per_user.sum(), per_user, diagnostics)


def add_regret_tradeoff(program, lam, mu=None):
    """
    Penalize the maximum regret of a matching program.

    Adds a variable MR >= 0 with objective coefficient -lam and one row per user,

    .. math::

        MR + U^\\pi(u) \\ge \\mu_u

    so that at an optimum with lam > 0, MR equals the largest per-user regret.

    Parameters
    ----------
    program : MatchingProgram
    lam : float
        The trade-off weight, nonnegative. Zero leaves the optimal welfare unchanged.
    mu : ndarray, optional
        Per-user ideal utilities; computed with ideal_utilities when omitted.

    Returns
    -------
    MatchingProgram
        An augmented copy; the input program is not modified.
    """
    if lam < 0:
        raise InputError('regret weight must be nonnegative, got {}'.format(lam))
    inst = program.instance
    mu = ideal_utilities(inst) if mu is None else np.asarray(mu, dtype=float)
    out = program.copy()
    out.mr_index = int(out._add_vars([-float(lam)], 0.0, np.inf)[0])
    base = out._add_rows(inst.n_users, Relation.GE, mu)
    out._add_entries(base + np.arange(inst.n_users), np.full(inst.n_users, out.mr_index), np.ones(inst.n_users))
    out._add_entries(base + program.var_u, np.arange(program.n_pi), program.utility_coef)
    return out


def _require_optimal(solution, what):
    if solution.status in (LpStatus.NUMERICAL_FAILURE, LpStatus.UNBOUNDED):
        raise SolverError('{}: LP solver returned {}'.format(what, solution.status.value))


def build_csw_lp(instance, providers):
    """
    The constrained welfare LP for a nonempty provider set.

    Raises
    ------
    InfeasibleError
        When the set is provably infeasible before solving (see check_supply).
    """
    providers = _validated(instance, providers)
    if not providers:
        raise InputError('the constrained welfare LP needs at least one provider')
    check_supply(instance, providers)
    return MatchingProgram(instance, providers).build()


def _validated(instance, providers):
    providers = sorted(set(int(c) for c in providers))
    if providers and (providers[0] < 0 or providers[-1] >= instance.n_providers):
        raise InputError('provider ids out of range: {}'.format(providers))
    return providers


def csw(instance, providers, lam=0.0, **lp_options):
    """
    The constrained welfare g(C): the best matching when exactly the providers in C stay viable.

    Parameters
    ----------
    instance : Instance
    providers : iterable of int
        The provider set C. The empty set has value 0 (no user is matched).
    lam : float
        Optional maximum-regret penalty, see add_regret_tradeoff.
    lp_options
        Forwarded to the LP solver.

    Returns
    -------
    tuple
        (g(C), MatchingPolicy), or (-inf, None) when no matching keeps C viable.
    """
    providers = _validated(instance, providers)
    if not providers:
        return 0.0, MatchingPolicy.empty(instance)
    try:
        check_supply(instance, providers)
    except InfeasibleError as e:
        logger.debug('cSW%s infeasible: %s', providers, e)
        return -np.inf, None
    program = MatchingProgram(instance, providers)
    if lam:
        program = add_regret_tradeoff(program, lam)
    solution = program.solve(**lp_options)
    if solution.status is LpStatus.INFEASIBLE:
        return -np.inf, None
    _require_optimal(solution, 'cSW{}'.format(providers))
    policy = program.policy(solution)
    return policy.welfare, policy


class WelfareOracle:
    def __init__(self, instance, cache_size=1 << 14, **lp_options):
        """
        Memoized constrained welfare values g(C) for one instance.

        Parameters
        ----------
        instance : Instance
        cache_size : int
            Maximum number of provider sets kept.
        lp_options
            Forwarded to the LP solver.
        """
        self.instance = instance
        self.lp_options = lp_options
        self.evaluations = 0
        self._cache = Cache(maxsize=cache_size)

    def _cache_key(self, providers):
        return frozenset(int(c) for c in providers)

    @cachedmethod(cache=operator.attrgetter('_cache'), key=_cache_key)
    def value(self, providers):
        """(g(C), MatchingPolicy) for the provider set C."""
        self.evaluations += 1
        return csw(self.instance, providers, **self.lp_options)

    def __call__(self, providers):
        return self.value(providers)[0]


def greedy_providers(instance, available=None, oracle=None):
    """
    Grow a provider set greedily by constrained welfare.

    Starting from the empty set, repeatedly add the provider whose addition gives the largest g, skipping additions
    that cannot be kept viable; ties go to the lowest provider id. The first feasible provider is always accepted, and
    afterwards the search stops as soon as no addition improves g.

    Parameters
    ----------
    instance : Instance
    available : iterable of int, optional
        Providers that may be selected. Defaults to all.
    oracle : WelfareOracle, optional
        A shared oracle for the instance, to reuse cached g values.

    Returns
    -------
    MatchingPolicy
        The constrained welfare matching of the final set, with diagnostics['trace'] listing (provider, g) per step.
    """
    oracle = oracle or WelfareOracle(instance)
    pool = sorted(range(instance.n_providers) if available is None else set(available))
    chosen, value, trace = [], 0.0, []
    while True:
        best = None
        for c in pool:
            if c in chosen:
                continue
            g = oracle(chosen + [c])
            logger.debug('greedy: g(%s) = %.6f', chosen + [c], g)
            if g == -np.inf:
                continue
            if best is None or g > best[0] + _TIE:
                best = (g, c)
        if best is None or (chosen and best[0] <= value + _TIE):
            break
        value = best[0]
        chosen.append(best[1])
        trace.append((best[1], value))
        logger.info('greedy: added provider %d, g = %.6f', best[1], value)

    if not chosen:
        return MatchingPolicy.empty(instance, trace=trace, reason='no feasible provider')
    return oracle.value(chosen)[1].annotate(trace=trace)


def _weakest(candidates, score):
    """The provider with the lowest score; among equal scores the highest id goes first."""
    return min(candidates, key=lambda c: (score[c], -c))


def prune_to_supply(instance, providers, score):
    """
    Shrink a provider set until it passes check_supply.

    Providers that cannot reach their threshold on their own are dropped first; while the thresholds together still
    exceed the supply, the provider with the lowest score is dropped.

    Returns
    -------
    tuple
        (kept providers, dropped providers), both sorted.
    """
    kept, dropped = sorted(providers), []
    while kept:
        try:
            check_supply(instance, kept)
            break
        except InfeasibleError:
            capacity = _engagement_capacity(instance, np.array(kept))
            short = [c for c, cap in zip(kept, capacity) if cap < instance.thresholds[c] - _TIE]
            out = short if short else [_weakest(kept, score)]
            kept = [c for c in kept if c not in out]
            dropped.extend(out)
    return kept, sorted(dropped)


def solve_restricted(instance, providers, score, lam=0.0, **lp_options):
    """
    Solve the constrained welfare of a rounded provider set, dropping its weakest member while it is infeasible.

    Returns
    -------
    tuple
        (MatchingPolicy or None, dropped providers)
    """
    kept, dropped = prune_to_supply(instance, providers, score)
    while kept:
        g, policy = csw(instance, kept, lam=lam, **lp_options)
        if policy is not None:
            return policy, dropped
        weakest = _weakest(kept, score)
        kept.remove(weakest)
        dropped.append(weakest)
    return None, sorted(dropped)


def lp_rs(instance, theta=0.5, lam=0.0, candidates=None, available=None, **lp_options):
    """
    LP relaxation and rounding.

    Solves the joint provider-selection problem with provider indicators relaxed to [0,1], keeps the providers whose
    relaxed indicator is at least theta, prunes the set until it can be supplied and re-solves the constrained welfare
    of the result.

    Parameters
    ----------
    instance : Instance
    theta : float
        The rounding threshold in (0,1].
    lam : float
        Maximum-regret penalty applied to both the relaxation and the final re-solve.
    candidates : int, optional
        Restrict the relaxation to each user's best `candidates` providers.
    available : iterable of int, optional
        Providers that may be selected. Defaults to all.
    lp_options
        Forwarded to the LP solver.

    Returns
    -------
    MatchingPolicy
        With diagnostics relaxed_objective, y (relaxed indicator per provider), rounded and pruned sets.
    """
    if not 0 < theta <= 1:
        raise InputError('rounding threshold must lie in (0,1], got {}'.format(theta))
    pool = sorted(range(instance.n_providers) if available is None else set(available))
    if not pool:
        return MatchingPolicy.empty(instance, reason='no provider available')

    program = MatchingProgram(instance, pool, relaxed=True, candidates=candidates)
    if lam:
        program = add_regret_tradeoff(program, lam)
    solution = program.solve(**lp_options)
    if solution.status is LpStatus.INFEASIBLE:
        logger.warning('lp-rs: relaxation infeasible, no provider can be kept')
        return MatchingPolicy.empty(instance, reason='relaxation infeasible')
    _require_optimal(solution, 'lp-rs relaxation')

    y = dict(zip(pool, solution.primal[program.y_index]))
    rounded = [c for c in pool if y[c] >= theta - _TIE]
    policy, dropped = solve_restricted(instance, rounded, y, lam=lam, **lp_options)
    logger.info('lp-rs: relaxed objective %.6f, rounded %d of %d providers, dropped %s', solution.objective_value,
                len(rounded), len(pool), dropped)
    diagnostics = dict(relaxed_objective=solution.objective_value, y=y, rounded=rounded, dropped=dropped)
    if policy is None:
        logger.warning('lp-rs: rounded provider set became empty')
        return MatchingPolicy.empty(instance, reason='rounded set empty', **diagnostics)
    return policy.annotate(**diagnostics)


def exact_enumeration(instance, max_providers=15, available=None, oracle=None):
    """
    The best matching over every nonempty provider set, by enumeration.

    Raises
    ------
    LimitExceededError
        When more than max_providers providers would have to be enumerated.
    """
    pool = sorted(range(instance.n_providers) if available is None else set(available))
    if len(pool) > max_providers:
        raise LimitExceededError('exact enumeration over {} providers exceeds the cap of {}'.format(
            len(pool), max_providers))
    oracle = oracle or WelfareOracle(instance)
    best, best_set = -np.inf, None
    for size in range(1, len(pool) + 1):
        for subset in itertools.combinations(pool, size):
            g = oracle(subset)
            if g > best + _TIE:
                best, best_set = g, subset
    if best_set is None:
        return MatchingPolicy.empty(instance, reason='no feasible provider set')
    logger.debug('exact enumeration: best set %s, welfare %.6f, %d sets solved', best_set, best,
                 oracle.evaluations)
    return oracle.value(best_set)[1]


def ideal_utilities(instance):
    """
    Each user's utility under its personally ideal policy, with viability ignored.

    With a single slot, or slots that may repeat a provider, every slot goes to the user's highest-reward provider.
    When slots must hold distinct providers, the user's best rewards are paired with the slot weights, both in
    descending order.

    Returns
    -------
    ndarray
        mu_u for every user.
    """
    U, C, T = instance.n_users, instance.n_providers, instance.horizon
    if C == 0:
        return np.zeros(U)
    R = instance.reward_matrix
    if instance.distinct_slots:
        k = min(T, C)
        top = -np.sort(-R, axis=1)[:, :k]
    else:
        k = T
        top = np.repeat(R.max(axis=1)[:, None], T, axis=1)
    if isinstance(instance.utility, LinearUtility):
        alpha = -np.sort(-np.asarray(instance.utility.alpha))[:k]
        return instance.activations * (top @ alpha)
    return instance.activations * instance.utility.of_sum(top.sum(axis=1))


def regret_report(instance, policy, mu=None):
    """Per-user regret of a policy against ideal_utilities and its maximum."""
    mu = ideal_utilities(instance) if mu is None else mu
    return RegretReport(mu, mu - policy.per_user_utility)


def regret_tradeoff(instance, lam, providers=None, theta=0.5, **lp_options):
    """
    Solve for welfare minus lam times the maximum regret.

    Parameters
    ----------
    instance : Instance
    lam : float
        Nonnegative trade-off weight.
    providers : iterable of int, optional
        A fixed viable set. When omitted, the set is chosen by LP relaxation and rounding with the penalized
        objective.
    theta : float
        Rounding threshold when providers is omitted.

    Returns
    -------
    MatchingPolicy
        With diagnostics['mr_variable'] holding the value of the MR variable.
    """
    if lam < 0:
        raise InputError('regret weight must be nonnegative, got {}'.format(lam))
    if providers is None:
        return lp_rs(instance, theta=theta, lam=lam, **lp_options)
    g, policy = csw(instance, providers, lam=lam, **lp_options)
    if policy is None:
        raise InfeasibleError('providers {} cannot be kept viable'.format(sorted(providers)))
    return policy
