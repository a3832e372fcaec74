"""
Column generation for non-additive (sigmoidal) user utilities.

A user's k slots are answered jointly by a star, a multiset of k providers, whose value is the user's utility of the
summed rewards. The master LP chooses a distribution over stars for every user:

.. math::

    \\max \\sum_{u,S} \\bar\\sigma(u,S) \\pi_{u,S} \\quad s.t. \\quad
    \\sum_S \\pi_{u,S} \\le 1, \\quad
    \\sum_{S \\ni c} \\pi_{u,S} \\le y_c, \\quad
    \\sum_{u,S} \\#[S,c] Q(u) \\pi_{u,S} \\ge \\nu_c y_c

Stars enter the master when their reduced cost under the current duals is positive. The provider indicators y are
relaxed during generation and rounded at the end, after which the master is solved again with y fixed.
"""

import itertools
import csv
import logging
import numpy as np

from ecorec.errors import InputError, LimitExceededError, SolverError
from ecorec.lp.program import LinearProgram, LpStatus, Relation
from ecorec.lp.simplex import solve_lp
from ecorec.solvers.matching import MatchingPolicy, prune_to_supply

logger = logging.getLogger(__name__)

SHORTFALL_PENALTY = 1e3


class Star:
    def __init__(self, user, providers, value):
        """
        A column of the master LP.

        Parameters
        ----------
        user : int
            The user whose slots the star answers.
        providers : sequence of int
            The k providers, stored sorted; a provider may repeat unless slots must be distinct.
        value : float
            activation(u) * utility of the summed rewards.
        """
        self.user = int(user)
        self.providers = tuple(sorted(int(c) for c in providers))
        self.value = float(value)

    @property
    def key(self):
        return self.user, self.providers

    @property
    def k(self):
        return len(self.providers)

    def counts(self, n_providers):
        return np.bincount(self.providers, minlength=n_providers)

    def __eq__(self, other):
        return isinstance(other, Star) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return 'Star(user={}, providers={}, value={:.6f})'.format(self.user, self.providers, self.value)


class DualPrices:
    def __init__(self, beta, gamma, alpha):
        """
        Row duals of an optimal master: beta per user (slot budget), gamma per user and provider (linking), alpha per
        provider (viability).
        """
        self.beta = np.asarray(beta, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        assert np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma)) and \
            np.all(np.isfinite(self.alpha)), "dual prices must be finite"

    @classmethod
    def zeros(cls, instance):
        U, C = instance.n_users, instance.n_providers
        return cls(np.zeros(U), np.zeros((U, C)), np.zeros(C))

    @classmethod
    def from_solution(cls, instance, solution):
        assert solution.status is LpStatus.OPTIMAL, "dual prices need an optimal master"
        U, C = instance.n_users, instance.n_providers
        y = solution.dual
        return cls(y[:U], y[U:U + U * C].reshape(U, C), y[U + U * C:U + U * C + C])


def _require_sum_utility(instance):
    if not hasattr(instance.utility, 'of_sum'):
        raise InputError('column generation needs a utility of the summed rewards, got {}'.format(instance.utility))


def _mean_weight(instance):
    """Engagement units per appearance of a provider in a star."""
    return instance.engagement_weight.mean(axis=2)


def star_value(instance, user, providers):
    rewards = instance.reward_matrix[user, list(providers)]
    return float(instance.activations[user] * instance.utility.of_sum(rewards.sum()))


def reduced_cost(instance, duals, star):
    """
    The reduced cost of a star:

    .. math::

        \\bar\\sigma(u,S) - \\beta_u - \\sum_{c \\in S} \\gamma_{uc} - \\sum_c \\#[S,c] Q(u) w_{uc} \\alpha_c
    """
    u = star.user
    counts = star.counts(instance.n_providers)
    present = counts > 0
    engagement = counts * instance.query_weight[u] * _mean_weight(instance)[u]
    return star.value - duals.beta[u] - duals.gamma[u, present].sum() - engagement @ duals.alpha


def _multisets(pool, k, distinct):
    combos = itertools.combinations(pool, k) if distinct else itertools.combinations_with_replacement(pool, k)
    return np.array(list(combos), dtype=int).reshape(-1, k)


def _column_budget(pool, k, budget):
    if len(pool) ** k > budget:
        raise LimitExceededError('pricing over {}^{} provider tuples exceeds the budget of {}; use the linearized '
                                 'oracle'.format(len(pool), k, budget))


def price_stars(instance, duals, k, providers=None, method='enumerate', budget=200000, intervals=8):
    """
    The best star of every user under the given duals.

    Parameters
    ----------
    instance : Instance
    duals : DualPrices
    k : int
        Slots per star.
    providers : iterable of int, optional
        Providers stars may use. Defaults to all.
    method : str
        'enumerate' scores every multiset of k providers exactly; 'linearized' solves, per user and per interval of
        the attainable reward sum, the LP in which the utility is replaced by its tangent at the interval midpoint,
        rounds it and scores the candidates exactly.
    budget : int
        Maximum number of k-tuples the enumeration may visit.
    intervals : int
        Number of reward-sum intervals of the linearized oracle.

    Returns
    -------
    list of tuple
        (Star, reduced cost) for every user, in user order.
    """
    _require_sum_utility(instance)
    pool = sorted(range(instance.n_providers) if providers is None else set(providers))
    if not pool:
        return []
    if instance.distinct_slots and k > len(pool):
        return []
    if method == 'enumerate':
        return _price_by_enumeration(instance, duals, k, pool, budget)
    if method == 'linearized':
        return [_price_linearized(instance, duals, k, pool, u, intervals) for u in range(instance.n_users)]
    raise InputError('unknown pricing method {!r}'.format(method))


def price_star(instance, duals, k, **kwargs):
    """
    The star with the highest reduced cost over all users; ties go to the lowest user, then the first multiset in
    lexicographic order.

    Returns
    -------
    tuple
        (Star, reduced cost)
    """
    priced = price_stars(instance, duals, k, **kwargs)
    if not priced:
        raise InputError('no star can be formed from the given providers')
    best = int(np.argmax([rc for _, rc in priced]))
    return priced[best]


def _price_by_enumeration(instance, duals, k, pool, budget):
    _column_budget(pool, k, budget)
    pool = np.array(pool)
    M = pool[_multisets(range(pool.size), k, instance.distinct_slots)]
    counts = np.zeros((M.shape[0], instance.n_providers))
    for j in range(k):
        np.add.at(counts, (np.arange(M.shape[0]), M[:, j]), 1)

    R = instance.reward_matrix
    values = instance.activations[:, None] * instance.utility.of_sum(R[:, M].sum(axis=2))
    linking = duals.gamma @ (counts > 0).T
    viability = (instance.query_weight[:, None] * _mean_weight(instance) * duals.alpha) @ counts.T
    rc = values - duals.beta[:, None] - linking - viability

    best = np.argmax(rc, axis=1)
    return [(Star(u, M[j], values[u, j]), float(rc[u, j])) for u, j in enumerate(best)]


def _round_counts(n, k, cap):
    """Largest-remainder rounding of a fractional count vector summing to k."""
    base = np.minimum(np.floor(n + 1e-9), cap)
    order = np.argsort(-(n - base), kind='stable')
    missing = int(round(k - base.sum()))
    for j in order:
        if missing <= 0:
            break
        if base[j] < cap:
            base[j] += 1
            missing -= 1
    return base.astype(int) if missing == 0 else None


def _price_linearized(instance, duals, k, pool, user, intervals):
    pool = np.array(pool)
    A = instance.reward_matrix[user, pool]
    rho = instance.activations[user]
    unit = instance.query_weight[user] * _mean_weight(instance)[user, pool] * duals.alpha[pool]
    cap = 1 if instance.distinct_slots else k
    lo, hi = k * A.min(), k * A.max()
    edges = np.linspace(lo, hi, intervals + 1) if hi > lo else np.array([lo, hi])

    best = None
    for left, right in zip(edges[:-1], edges[1:]):
        slope = rho * instance.utility.derivative_of_sum(0.5 * (left + right))
        weight = slope * A - duals.gamma[user, pool] - unit
        lp = LinearProgram(weight, np.vstack([np.ones(pool.size), A, A]), [Relation.EQ, Relation.GE, Relation.LE],
                           [k, left, right], upper=np.full(pool.size, cap))
        solution = solve_lp(lp)
        if not solution.optimal:
            continue
        n = _round_counts(solution.primal, k, cap)
        if n is None:
            continue
        star = Star(user, np.repeat(pool, n), 0.0)
        star = Star(user, star.providers, star_value(instance, user, star.providers))
        rc = reduced_cost(instance, duals, star)
        if best is None or rc > best[1] + 1e-12:
            best = (star, rc)
    if best is None:
        ranked = pool[np.argsort(-A, kind='stable')]
        providers = ranked[:k] if instance.distinct_slots else np.repeat(ranked[0], k)
        star = Star(user, providers, star_value(instance, user, providers))
        best = (star, reduced_cost(instance, duals, star))
    return best


def build_master(instance, stars, fixed=None, penalty=None):
    """
    The master LP over a pool of stars.

    Variables are laid out as [y_0..y_C-1, shortfall_0..shortfall_C-1, star_0..star_n-1] and rows as [slot budget
    per user, linking per (user, provider) in row-major order, viability per provider].

    Parameters
    ----------
    instance : Instance
    stars : sequence of Star
    fixed : iterable of int, optional
        When given, y is fixed to 1 on these providers and 0 elsewhere; otherwise y is relaxed to [0,1].
    penalty : float, optional
        With a fixed set, allow each kept provider a viability shortfall priced at -penalty per unit, which keeps the
        master feasible while columns are still missing. Without it shortfalls are fixed at 0.

    Returns
    -------
    LinearProgram
    """
    U, C = instance.n_users, instance.n_providers
    n = len(stars)
    nu = instance.thresholds
    wbar = _mean_weight(instance)

    y_lo, y_hi = np.zeros(C), np.ones(C)
    s_hi, s_cost = np.zeros(C), np.zeros(C)
    if fixed is not None:
        keep = np.zeros(C, dtype=bool)
        keep[list(fixed)] = True
        y_lo = y_hi = keep.astype(float)
        if penalty is not None:
            s_hi = np.where(keep, np.inf, 0.0)
            s_cost = -penalty * keep

    rows, cols, vals = [], [], []
    link0, viab0 = U, U + U * C
    for c in range(C):
        rows.extend([link0 + u * C + c for u in range(U)] + [viab0 + c, viab0 + c])
        cols.extend([c] * U + [c, C + c])
        vals.extend([-1.0] * U + [-nu[c], 1.0])
    for j, star in enumerate(stars):
        col = 2 * C + j
        counts = star.counts(C)
        present = np.flatnonzero(counts)
        rows.append(star.user)
        cols.append(col)
        vals.append(1.0)
        for c in present:
            rows.extend([link0 + star.user * C + c, viab0 + c])
            cols.extend([col, col])
            vals.extend([1.0, counts[c] * instance.query_weight[star.user] * wbar[star.user, c]])

    objective = np.concatenate([np.zeros(C), s_cost, [s.value for s in stars]])
    relations = [Relation.LE] * (U + U * C) + [Relation.GE] * C
    rhs = np.concatenate([np.ones(U), np.zeros(U * C + C)])
    lower = np.concatenate([y_lo, np.zeros(C), np.zeros(n)])
    # star mass is capped by the slot budget rows alone
    upper = np.concatenate([y_hi, s_hi, np.full(n, np.inf)])
    return LinearProgram.from_triplets(objective, rows, cols, vals, relations, rhs, lower, upper)


def _initial_stars(instance, k, pool):
    R = instance.reward_matrix[:, pool]
    ranked = np.array(pool)[np.argsort(-R, axis=1, kind='stable')]
    stars = []
    for u in range(instance.n_users):
        providers = ranked[u, :k] if instance.distinct_slots else np.repeat(ranked[u, 0], k)
        stars.append(Star(u, providers, star_value(instance, u, providers)))
    return stars


def _generate(instance, stars, k, pool, fixed, tol, max_iter, method, log, phase, lp_options):
    """Alternate master solves and pricing; returns the final master solution and the grown pool."""
    seen = set(s.key for s in stars)
    previous = -np.inf
    penalty = SHORTFALL_PENALTY if fixed is not None else None
    for iteration in range(1, max_iter + 1):
        solution = solve_lp(build_master(instance, stars, fixed=fixed, penalty=penalty), **lp_options)
        if not solution.optimal:
            raise SolverError('master LP returned {} in {} phase'.format(solution.status.value, phase))
        objective = solution.objective_value
        if objective < previous - 1e-9:
            logger.warning('colgen %s: master objective decreased from %.9f to %.9f', phase, previous, objective)
        previous = objective

        duals = DualPrices.from_solution(instance, solution)
        priced = price_stars(instance, duals, k, providers=pool, method=method)
        new = [star for star, rc in priced if rc > tol and star.key not in seen]
        max_rc = max([rc for _, rc in priced] or [0.0])
        log.append(dict(phase=phase, iteration=iteration, objective=objective, max_reduced_cost=max_rc,
                        columns_added=len(new)))
        logger.debug('colgen %s %d: objective %.6f, max reduced cost %.3g, %d columns added', phase, iteration,
                     objective, max_rc, len(new))
        if not new:
            return solution, stars, True
        stars = stars + new
        seen.update(s.key for s in new)
    logger.warning('colgen %s: stopped at the iteration cap of %d', phase, max_iter)
    return solution, stars, False


def _flatten(instance, stars, weights, viable, objective, **diagnostics):
    """Slot marginals of a star distribution; slot t holds a star's t-th best provider."""
    U, C, k = instance.n_users, instance.n_providers, instance.horizon
    R = instance.reward_matrix
    pi = np.zeros((U, C, k))
    mass = np.zeros(U)
    value = np.zeros(U)
    for star, p in zip(stars, weights):
        if p <= 1e-12:
            continue
        ordered = sorted(star.providers, key=lambda c: (-R[star.user, c], c))
        for t, c in enumerate(ordered):
            pi[star.user, c, t] += p
        mass[star.user] += p
        value[star.user] += p * star.value

    per_user = np.zeros(U)
    served = mass > 1e-12
    pi[served] /= mass[served][:, None, None]
    per_user[served] = value[served] / mass[served]
    for u in np.flatnonzero(~served):
        providers = sorted(viable, key=lambda c: (-R[u, c], c))
        providers = providers[:k] if instance.distinct_slots else [providers[0]] * k
        for t, c in enumerate(providers):
            pi[u, c, t] = 1.0
        per_user[u] = star_value(instance, u, providers)
        logger.debug('colgen: user %d had no star mass, served its best viable providers', u)
    return MatchingPolicy(pi, viable, per_user.sum(), per_user, dict(diagnostics, objective=objective))


def _solve_fixed(instance, stars, k, viable, tol, max_iter, method, log, lp_options):
    """Generate columns for a fixed provider set; returns (objective, stars, weights) or None when infeasible."""
    solution, stars, _ = _generate(instance, stars, k, viable, viable, tol, max_iter, method, log, 'restricted',
                                   lp_options)
    C = instance.n_providers
    shortfall = solution.primal[C:2 * C]
    if shortfall.max() > 1e-7:
        return None
    return solution.objective_value, stars, solution.primal[2 * C:]


def column_generation(instance, k=None, tol=1e-6, max_iter=300, theta=0.5, method='enumerate', sweep=True,
                      available=None, **lp_options):
    """
    Solve the star formulation by column generation, round the provider indicators and re-solve.

    Parameters
    ----------
    instance : Instance
        Its utility must act on summed rewards (e.g. SigmoidUtility).
    k : int, optional
        Slots per star; defaults to the instance horizon.
    tol : float
        Columns enter while their reduced cost exceeds tol.
    max_iter : int
        Cap on master solves per phase.
    theta : float
        Rounding threshold for the relaxed provider indicators.
    method : str
        Pricing oracle, 'enumerate' or 'linearized'.
    sweep : bool
        Besides the theta-rounded set, also re-solve the nested sets obtained by thresholding the relaxed indicators
        at each of their distinct values, and keep the best.
    available : iterable of int, optional
        Providers that may be selected. Defaults to all.
    lp_options
        Forwarded to the LP solver.

    Returns
    -------
    MatchingPolicy
        Star distributions flattened to slot marginals; diagnostics include the iteration log, the relaxed objective
        and the relaxed indicators.
    """
    _require_sum_utility(instance)
    k = instance.horizon if k is None else int(k)
    if k < 1 or tol <= 0 or max_iter < 1:
        raise InputError('column generation needs k >= 1, tol > 0 and max_iter >= 1')
    if k != instance.horizon:
        instance = instance.replace(horizon=k)
    pool = sorted(range(instance.n_providers) if available is None else set(available))
    if not pool:
        return MatchingPolicy.empty(instance, reason='no provider available')

    log = []
    stars = _initial_stars(instance, k, pool)
    relaxed, stars, converged = _generate(instance, stars, k, pool, None, tol, max_iter, method, log, 'relaxed',
                                          lp_options)
    C = instance.n_providers
    y = dict(zip(range(C), relaxed.primal[:C]))
    logger.info('colgen: relaxed master %.6f after %d iterations (%s)', relaxed.objective_value, len(log),
                'converged' if converged else 'not converged')

    candidates = [[c for c in pool if y[c] >= theta - 1e-9]]
    if sweep:
        for level in sorted(set(y[c] for c in pool if y[c] > 1e-9), reverse=True):
            candidates.append([c for c in pool if y[c] >= level - 1e-9])

    best, tried = None, set()
    for candidate in candidates:
        kept, _ = prune_to_supply(instance, candidate, y)
        while kept and tuple(kept) not in tried:
            tried.add(tuple(kept))
            result = _solve_fixed(instance, stars, k, kept, tol, max_iter, method, log, lp_options)
            if result is not None:
                objective, stars, weights = result
                if best is None or objective > best[0] + 1e-9:
                    best = (objective, tuple(kept), stars, weights)
                break
            weakest = min(kept, key=lambda c: (y[c], -c))
            logger.info('colgen: provider set %s infeasible, dropping provider %d', kept, weakest)
            kept = [c for c in kept if c != weakest]

    diagnostics = dict(iterations=log, relaxed_objective=relaxed.objective_value, y=y, converged=converged)
    if best is None:
        logger.warning('colgen: no rounded provider set can be kept viable')
        return MatchingPolicy.empty(instance, reason='rounded set empty', **diagnostics)
    objective, viable, stars, weights = best
    logger.info('colgen: final provider set %s, objective %.6f', list(viable), objective)
    return _flatten(instance, stars, weights, viable, objective, **diagnostics)


def enumerate_stars_exact(instance, k=None, cap=50000, max_providers=15, **lp_options):
    """
    The optimal star distribution with integral provider indicators, by enumerating every star and every provider
    set.

    Raises
    ------
    LimitExceededError
        When U * C^k exceeds cap or the providers exceed max_providers.
    """
    _require_sum_utility(instance)
    k = instance.horizon if k is None else int(k)
    if k != instance.horizon:
        instance = instance.replace(horizon=k)
    U, C = instance.n_users, instance.n_providers
    if U * C ** k > cap:
        raise LimitExceededError('{} users x {}^{} stars exceeds the cap of {}'.format(U, C, k, cap))
    if C > max_providers:
        raise LimitExceededError('{} providers exceeds the cap of {}'.format(C, max_providers))

    tuples = _multisets(range(C), k, instance.distinct_slots)
    best = None
    for size in range(1, C + 1):
        for subset in itertools.combinations(range(C), size):
            inside = [t for t in tuples if set(t) <= set(subset)]
            if not inside:
                continue
            stars = [Star(u, t, star_value(instance, u, t)) for u in range(U) for t in inside]
            solution = solve_lp(build_master(instance, stars, fixed=subset), **lp_options)
            if solution.status is LpStatus.INFEASIBLE:
                continue
            if not solution.optimal:
                raise SolverError('exact star LP for {} returned {}'.format(subset, solution.status.value))
            if best is None or solution.objective_value > best[0] + 1e-9:
                best = (solution.objective_value, subset, stars, solution.primal[2 * C:])
    if best is None:
        return MatchingPolicy.empty(instance, reason='no feasible provider set')
    objective, subset, stars, weights = best
    return _flatten(instance, stars, weights, subset, objective)


def write_iteration_log(path, log):
    """Write a column generation iteration log as CSV."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['phase', 'iteration', 'objective', 'max_reduced_cost', 'columns_added'])
        for entry in log:
            writer.writerow([entry['phase'], entry['iteration'], '{:.6f}'.format(entry['objective']),
                             '{:.6f}'.format(entry['max_reduced_cost']), entry['columns_added']])
