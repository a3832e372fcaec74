"""
Epoch-based simulation of a recommender ecosystem.

In every epoch each active user issues one query, drawn around their profile mean, and is served a slate of distinct
viable providers by a policy. Served providers collect engagement, and at the end of the epoch every provider whose
engagement falls short of its threshold abandons the platform for good.
"""

import logging
import numpy as np

from ecorec.errors import InputError
from ecorec.model import UserProfile
from ecorec.solvers.matching import csw, exact_enumeration, greedy_providers, ideal_utilities, lp_rs
from ecorec.solvers.colgen import column_generation

logger = logging.getLogger(__name__)

ABANDONMENT_MODES = ('deterministic', 'bernoulli')


def make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


class EcosystemState:
    def __init__(self, instance, seed=0, deterministic_queries=False):
        """
        Mutable simulation state.

        Parameters
        ----------
        instance : Instance
            The ecosystem being simulated.
        seed : int
            Seed of the counter-based generator driving queries, activations, stochastic slates and abandonment.
        deterministic_queries : bool
            If True, every query equals its user's profile mean.
        """
        self.instance = instance
        self.epoch = 0
        self.viable = list(range(instance.n_providers))
        self.engagement = np.zeros(instance.n_providers)
        self.rng = make_rng(seed)
        self.deterministic_queries = deterministic_queries

    def viable_mask(self):
        mask = np.zeros(self.instance.n_providers, dtype=bool)
        mask[self.viable] = True
        return mask

    def __repr__(self):
        return 'EcosystemState(epoch={}, viable={})'.format(self.epoch, self.viable)


class EpochMetrics:
    def __init__(self, epoch, per_user_utility, viable, max_regret, stranded_users, abandoned=()):
        self.epoch = epoch
        self.per_user_utility = per_user_utility
        self.social_welfare = float(per_user_utility.sum())
        self.avg_user_utility = float(per_user_utility.mean())
        self.viable = tuple(viable)
        self.viable_count = len(self.viable)
        self.max_regret = float(max_regret)
        self.stranded_users = int(stranded_users)
        self.abandoned = tuple(abandoned)

    def __repr__(self):
        return 'EpochMetrics(epoch={}, welfare={:.6f}, viable={})'.format(self.epoch, self.social_welfare,
                                                                          list(self.viable))


class Trajectory:
    def __init__(self, policy, seed, metrics, total_utility):
        self.policy = policy
        self.seed = seed
        self.metrics = metrics
        self.total_utility = total_utility

    def rows(self):
        """One dict per epoch with the trajectory CSV columns."""
        return [dict(epoch=m.epoch, policy=self.policy, seed=self.seed, social_welfare=m.social_welfare,
                     avg_user_utility=m.avg_user_utility, viable_count=m.viable_count, max_regret=m.max_regret,
                     stranded_users=m.stranded_users) for m in self.metrics]

    def histogram_rows(self):
        return [dict(policy=self.policy, seed=self.seed, user_id=u, total_utility=float(v))
                for u, v in enumerate(self.total_utility)]

    def __repr__(self):
        return 'Trajectory(policy={}, seed={}, epochs={})'.format(self.policy, self.seed, len(self.metrics))


def sample_query(user, rng):
    """
    A query around the user's profile mean with isotropic Gaussian noise of the user's variance.

    A zero-variance user always queries exactly its mean and consumes no randomness.
    """
    if user.variance == 0:
        return np.array(user.mean)
    return user.mean + np.sqrt(user.variance) * rng.standard_normal(user.mean.size)


def serve_myopic(state, query):
    """The s viable providers with the highest reward, best first; ties go to the lowest provider id."""
    viable = np.array(state.viable, dtype=int)
    rewards = state.instance.rewards_for(query)[viable]
    order = np.argsort(-rewards, kind='stable')
    return viable[order[:state.instance.slate_size]].tolist()


def serve_stochastic(state, query, rng=None):
    """
    Draw s distinct viable providers one after another, each with probability proportional to its reward among the
    providers not yet drawn.

    Negative rewards are shifted so that the smallest becomes a tiny positive weight. When every remaining weight is
    zero the draw is uniform.
    """
    rng = state.rng if rng is None else rng
    viable = list(state.viable)
    weights = state.instance.rewards_for(query)[viable]
    if weights.size and weights.min() < 0:
        weights = weights - weights.min() + 1e-6
    slate = []
    for _ in range(min(state.instance.slate_size, len(viable))):
        total = weights.sum()
        p = weights / total if total > 0 else np.full(weights.size, 1.0 / weights.size)
        j = int(rng.choice(weights.size, p=p))
        slate.append(viable.pop(j))
        weights = np.delete(weights, j)
    return slate


def serve_optimized(state, policy, query, user, rng=None):
    """
    Sample a slate from a matching policy, slot by slot.

    Slot t draws provider c with probability pi[u,c,t] restricted to viable providers not already in the slate. A slot
    whose mass lies entirely on dead or already chosen providers is filled with the best remaining viable provider for
    the query.
    """
    rng = state.rng if rng is None else rng
    instance = state.instance
    available = state.viable_mask()
    rewards = instance.rewards_for(query)
    T = policy.pi.shape[2]
    slate = []
    for t in range(min(instance.slate_size, int(available.sum()))):
        mass = np.where(available, policy.pi[user, :, min(t, T - 1)], 0.0)
        total = mass.sum()
        if total > 1e-12:
            c = int(rng.choice(mass.size, p=mass / total))
        else:
            candidates = np.flatnonzero(available)
            c = int(candidates[np.argmax(rewards[candidates])])
        slate.append(c)
        available[c] = False
    return slate


class Policy:
    """How a query is turned into a slate."""
    name = None

    def reset(self):
        pass

    def prepare(self, state):
        """Called at the start of every epoch."""
        pass

    def plan(self, state, queries):
        """Called once the epoch's queries are drawn, before any slate is served."""
        pass

    def slate(self, state, user, query):
        raise NotImplementedError

    def __repr__(self):
        return '{}()'.format(type(self).__name__)


class MyopicPolicy(Policy):
    name = 'myopic'

    def slate(self, state, user, query):
        return serve_myopic(state, query)


class StochasticPolicy(Policy):
    name = 'stochastic'

    def slate(self, state, user, query):
        return serve_stochastic(state, query)


def epoch_instance(instance, queries):
    """
    The instance as it stands in one epoch: every active user planned for at its realized query, inactive users with
    no weight.

    Parameters
    ----------
    instance : Instance
    queries : dict
        Realized query of each active user id.
    """
    users = [UserProfile(u.id, queries.get(u.id, u.mean), activation=float(u.id in queries), demand=u.demand)
             for u in instance.users]
    return instance.replace(users=users, query_weight=[float(u.id in queries) for u in instance.users])


class OptimizedPolicy(Policy):
    """
    A matching policy whose provider set is stationary: it is selected on the initial providers and reselected on the
    surviving ones only when one of the providers it keeps viable has abandoned.

    Within an epoch the matching is re-solved for the kept set on the realized queries, so that every user is served
    for the query it actually issued and every kept provider still meets its threshold. The stationary matching is
    served as is when the queries are the profile means, or when the realized queries cannot supply the kept set.
    """
    replan = True

    def __init__(self):
        self.matching = None
        self.epoch_matching = None
        self.recomputations = 0
        self.lam = 0.0
        self.lp_options = {}

    def solve(self, instance, available):
        raise NotImplementedError

    def reset(self):
        self.matching = None
        self.epoch_matching = None
        self.recomputations = 0

    def prepare(self, state):
        if self.matching is not None and set(self.matching.viable_set) <= set(state.viable):
            return
        if self.matching is not None:
            self.recomputations += 1
            logger.info('%s: providers %s abandoned, recomputing on %s', self.name,
                        sorted(set(self.matching.viable_set) - set(state.viable)), state.viable)
        self.matching = self.solve(state.instance, list(state.viable))
        self.epoch_matching = self.matching

    def plan(self, state, queries):
        self.epoch_matching = self.matching
        instance = state.instance
        if not self.replan or self.matching.is_empty or not queries:
            return
        if len(queries) == instance.n_users and all(np.array_equal(q, instance.means[u]) for u, q in queries.items()):
            return
        _, matching = csw(epoch_instance(instance, queries), self.matching.viable_set, lam=self.lam,
                          **self.lp_options)
        if matching is None:
            logger.debug('%s: epoch %d queries cannot supply %s, serving the stationary matching', self.name,
                         state.epoch, list(self.matching.viable_set))
            return
        self.epoch_matching = matching

    def slate(self, state, user, query):
        return serve_optimized(state, self.epoch_matching, query, user)


class LpRsPolicy(OptimizedPolicy):
    name = 'lp-rs'

    def __init__(self, theta=0.5, lam=0.0, candidates=None, **lp_options):
        super().__init__()
        self.theta = theta
        self.lam = lam
        self.candidates = candidates
        self.lp_options = lp_options

    def solve(self, instance, available):
        return lp_rs(instance, theta=self.theta, lam=self.lam, candidates=self.candidates, available=available,
                     **self.lp_options)


class GreedyPolicy(OptimizedPolicy):
    name = 'greedy'

    def solve(self, instance, available):
        return greedy_providers(instance, available=available)


class ExactPolicy(OptimizedPolicy):
    name = 'exact'

    def solve(self, instance, available):
        return exact_enumeration(instance, available=available)


class ColGenPolicy(OptimizedPolicy):
    name = 'colgen'
    replan = False

    def __init__(self, k=None, tol=1e-6, max_iter=300, theta=0.5, method='enumerate'):
        super().__init__()
        self.k = k
        self.tol = tol
        self.max_iter = max_iter
        self.theta = theta
        self.method = method

    def solve(self, instance, available):
        return column_generation(instance, k=self.k, tol=self.tol, max_iter=self.max_iter, theta=self.theta,
                                 method=self.method, available=available)


POLICIES = {cls.name: cls for cls in (MyopicPolicy, StochasticPolicy, LpRsPolicy, GreedyPolicy, ColGenPolicy,
                                      ExactPolicy)}


def make_policy(name, theta=0.5, lam=0.0, candidates=None, tol=1e-6, colgen_k=None, colgen_max_iter=300,
                max_pivots=None):
    """
    A fresh policy object for one of the names in POLICIES, configured from the solver knobs that apply to it.
    """
    if name not in POLICIES:
        raise InputError('unknown policy {!r}, expected one of {}'.format(name, sorted(POLICIES)))
    if name == 'lp-rs':
        lp_options = {} if max_pivots is None else dict(max_pivots=max_pivots)
        return LpRsPolicy(theta=theta, lam=lam, candidates=candidates, **lp_options)
    if name == 'colgen':
        return ColGenPolicy(k=colgen_k, tol=tol, max_iter=colgen_max_iter, theta=theta)
    return POLICIES[name]()


def _slot_utility(instance, rewards):
    """Utility of the rewards of a possibly truncated slate; missing slots count as reward 0."""
    padded = np.zeros(instance.horizon)
    n = min(len(rewards), instance.horizon)
    padded[:n] = rewards[:n]
    return instance.utility(padded)


def step_epoch(state, policy, mu=None, abandonment='deterministic'):
    """
    Simulate one epoch in place.

    All activations and queries of the epoch are drawn first, the policy plans for them, and then every active user
    is served in id order.

    Parameters
    ----------
    state : EcosystemState
    policy : Policy
    mu : ndarray, optional
        Ideal per-user utilities for the regret metric. Computed from the instance if omitted.
    abandonment : str
        'deterministic' removes every provider with engagement below its threshold; 'bernoulli' removes such a
        provider with probability 1 - E/nu.

    Returns
    -------
    tuple
        (state, EpochMetrics)
    """
    if abandonment not in ABANDONMENT_MODES:
        raise InputError('unknown abandonment mode {!r}'.format(abandonment))
    instance = state.instance
    mu = ideal_utilities(instance) if mu is None else mu
    w = instance.engagement_weight
    T = instance.horizon

    state.epoch += 1
    state.engagement[:] = 0.0
    policy.prepare(state)

    queries = {}
    stranded = 0
    for user in instance.users:
        if user.activation < 1 and state.rng.random() >= user.activation:
            continue
        if not state.viable:
            stranded += 1
            continue
        queries[user.id] = np.array(user.mean) if state.deterministic_queries else sample_query(user, state.rng)
    policy.plan(state, queries)

    utility = np.zeros(instance.n_users)
    for u, query in queries.items():
        slate = policy.slate(state, u, query)
        rewards = instance.rewards_for(query)[slate]
        utility[u] = _slot_utility(instance, rewards)
        for t, c in enumerate(slate):
            state.engagement[c] += w[u, c, min(t, T - 1)]

    nu = instance.thresholds
    abandoned = []
    for c in state.viable:
        short = state.engagement[c] < nu[c] - 1e-9
        if short and abandonment == 'bernoulli':
            short = state.rng.random() < 1.0 - state.engagement[c] / nu[c]
        if short:
            abandoned.append(c)
    if abandoned:
        logger.info('epoch %d: providers %s abandon (engagement %s)', state.epoch, abandoned,
                    np.round(state.engagement[abandoned], 6).tolist())
        state.viable = [c for c in state.viable if c not in abandoned]

    metrics = EpochMetrics(state.epoch, utility, state.viable, np.max(mu - utility), stranded, abandoned)
    return state, metrics


def run_simulation(instance, policy, epochs, seed=0, abandonment='deterministic', deterministic_queries=False):
    """
    Simulate a policy for a number of epochs from the full provider set.

    Parameters
    ----------
    instance : Instance
    policy : Policy or str
        A policy object or a name accepted by make_policy.
    epochs : int
    seed : int
    abandonment : str
        See step_epoch.
    deterministic_queries : bool
        Serve every user's profile mean instead of sampled queries.

    Returns
    -------
    Trajectory
        Per-epoch metrics and the per-user utility accumulated over all epochs.
    """
    if epochs < 1:
        raise InputError('at least one epoch is required, got {}'.format(epochs))
    if isinstance(policy, str):
        policy = make_policy(policy)
    policy.reset()
    state = EcosystemState(instance, seed, deterministic_queries)
    mu = ideal_utilities(instance)
    metrics, total = [], np.zeros(instance.n_users)
    for _ in range(epochs):
        state, m = step_epoch(state, policy, mu, abandonment)
        metrics.append(m)
        total += m.per_user_utility
    logger.info('%s seed %d: final welfare %.6f, %d viable providers', policy.name, seed, metrics[-1].social_welfare,
                metrics[-1].viable_count)
    return Trajectory(policy.name, seed, metrics, total)
