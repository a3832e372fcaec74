"""
Domain types shared by the solvers and the simulator: user profiles, provider records, reward kernels, utility
functions and the static ecosystem Instance tying them together.

All types are immutable after construction (arrays are stored read-only), so a single Instance can be shared freely
between solver and simulator runs.
"""

import enum
import logging
import numpy as np
from scipy.special import expit

from ecorec.errors import InputError

logger = logging.getLogger(__name__)


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class RewardKind(enum.Enum):
    DOT_PRODUCT = 'dot'
    NEGATIVE_DISTANCE = 'negdist'


class UserProfile:
    def __init__(self, id, mean, variance=0.0, activation=1.0, demand=1):
        """
        A user of the ecosystem, described by the distribution its queries are drawn from.

        Parameters
        ----------
        id : int
            The user index; users of an Instance are numbered 0..U-1.
        mean : array_like
            The mean of the user's query distribution, a vector in the d-dimensional topic space. This is also the
            canonical query the solvers plan for.
        variance : float
            Isotropic variance of the Gaussian query noise around the mean.
        activation : float
            Probability in [0,1] that the user is active in an epoch.
        demand : int
            Number of queries the user issues per epoch.
        """
        self.id = int(id)
        self.mean = _frozen(mean)
        if self.mean.ndim != 1:
            raise InputError('user {}: mean must be a vector'.format(id))
        if variance < 0:
            raise InputError('user {}: variance must be nonnegative, got {}'.format(id, variance))
        if not 0 <= activation <= 1:
            raise InputError('user {}: activation must lie in [0,1], got {}'.format(id, activation))
        if int(demand) != demand or demand < 1:
            raise InputError('user {}: demand must be a positive integer, got {}'.format(id, demand))
        self.variance = float(variance)
        self.activation = float(activation)
        self.demand = int(demand)

    def __eq__(self, other):
        return (isinstance(other, UserProfile) and self.id == other.id and np.array_equal(self.mean, other.mean)
                and self.variance == other.variance and self.activation == other.activation
                and self.demand == other.demand)

    __hash__ = None

    def __repr__(self):
        return 'UserProfile(id={}, mean={}, variance={})'.format(self.id, self.mean.tolist(), self.variance)


class ProviderRecord:
    def __init__(self, id, embedding, threshold=0.0):
        """
        A content provider.

        Parameters
        ----------
        id : int
            The provider index; providers of an Instance are numbered 0..C-1.
        embedding : array_like
            The provider's location in the topic space.
        threshold : float
            The viability threshold: engagement units per epoch the provider needs to stay in the ecosystem.
        """
        self.id = int(id)
        self.embedding = _frozen(embedding)
        if self.embedding.ndim != 1:
            raise InputError('provider {}: embedding must be a vector'.format(id))
        if threshold < 0:
            raise InputError('provider {}: threshold must be nonnegative, got {}'.format(id, threshold))
        self.threshold = float(threshold)

    def __eq__(self, other):
        return (isinstance(other, ProviderRecord) and self.id == other.id
                and np.array_equal(self.embedding, other.embedding) and self.threshold == other.threshold)

    __hash__ = None

    def __repr__(self):
        return 'ProviderRecord(id={}, embedding={}, threshold={})'.format(self.id, self.embedding.tolist(),
                                                                          self.threshold)


def utility_linear(rewards, alpha):
    """
    The alpha-weighted sum of per-slot rewards.

    Parameters
    ----------
    rewards : array_like
        Rewards r_1..r_T received in the slots of an epoch.
    alpha : array_like
        Slot weights alpha_1..alpha_T.

    Returns
    -------
    float
        sum_t alpha_t * r_t
    """
    rewards = np.asarray(rewards, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if rewards.shape != alpha.shape:
        raise InputError('{} rewards for {} slot weights'.format(rewards.size, alpha.size))
    return float(np.dot(alpha, rewards))


def discount_weights(gamma, T):
    """
    Geometric slot weights (1, gamma, gamma^2, ..., gamma^(T-1)).

    Parameters
    ----------
    gamma : float
        The discount factor, in (0,1].
    T : int
        Number of slots.

    Returns
    -------
    ndarray
        A vector of length T.
    """
    if not 0 < gamma <= 1:
        raise InputError('discount factor must lie in (0,1], got {}'.format(gamma))
    if T < 1:
        raise InputError('at least one slot is required, got {}'.format(T))
    return gamma ** np.arange(T, dtype=float)


def utility_sigmoid(rewards, beta=0.0, scale=1.0):
    """
    Logistic utility of the total reward, logistic(scale * (sum(rewards) + beta)).
    """
    if scale <= 0:
        raise InputError('sigmoid scale must be positive, got {}'.format(scale))
    return float(expit(scale * (np.sum(rewards) + beta)))


class LinearUtility:
    additive = True

    def __init__(self, alpha):
        self.alpha = _frozen(alpha)
        if self.alpha.ndim != 1 or self.alpha.size == 0:
            raise InputError('slot weights must be a nonempty vector')

    @property
    def horizon(self):
        return self.alpha.size

    def __call__(self, rewards):
        return utility_linear(rewards, self.alpha)

    def __repr__(self):
        return 'LinearUtility(alpha={})'.format(self.alpha.tolist())


class SigmoidUtility:
    additive = False

    def __init__(self, beta=0.0, scale=1.0):
        if scale <= 0:
            raise InputError('sigmoid scale must be positive, got {}'.format(scale))
        self.beta = float(beta)
        self.scale = float(scale)

    def __call__(self, rewards):
        return utility_sigmoid(rewards, self.beta, self.scale)

    def of_sum(self, total):
        """Vectorized utility of reward sums."""
        return expit(self.scale * (np.asarray(total, dtype=float) + self.beta))

    def derivative_of_sum(self, total):
        s = self.of_sum(total)
        return self.scale * s * (1.0 - s)

    def __repr__(self):
        return 'SigmoidUtility(beta={}, scale={})'.format(self.beta, self.scale)


class Instance:
    def __init__(self, users, providers, reward_kind=RewardKind.DOT_PRODUCT, horizon=1, slate_size=1, utility=None,
                 query_weight=None, engagement_weight=None, reward_offset=0.0, reward_floor=None,
                 distinct_slots=False):
        """
        The static ecosystem a policy is computed for and simulated on.

        Parameters
        ----------
        users : list of UserProfile
            Users numbered 0..U-1, at least one.
        providers : list of ProviderRecord
            Providers numbered 0..C-1, possibly none.
        reward_kind : RewardKind
            The reward kernel between a query and a provider embedding.
        horizon : int
            T, the number of slots per epoch. In the simulator slots are slate positions, so T equals slate_size.
        slate_size : int
            s, the number of distinct providers shown per query.
        utility : LinearUtility or SigmoidUtility, optional
            How a user aggregates the slot rewards of an epoch. Defaults to the unweighted sum over T slots.
        query_weight : array_like, optional
            Q(u), the expected number of queries of each user per epoch. Defaults to activation * demand.
        engagement_weight : array_like, optional
            w[u,c] or w[u,c,t], the engagement units a provider receives per impression. Defaults to 1.
        reward_offset : float
            A constant added to every reward.
        reward_floor : float, optional
            If given, rewards are clipped from below at this value (after the offset is applied).
        distinct_slots : bool
            Whether a provider may occupy at most one of the T slots of a user (slates without repetition).
        """
        self.users = tuple(users)
        self.providers = tuple(providers)
        if not self.users:
            raise InputError('an instance needs at least one user')
        for i, u in enumerate(self.users):
            if u.id != i:
                raise InputError('users must be numbered 0..U-1, found id {} at position {}'.format(u.id, i))
        for i, c in enumerate(self.providers):
            if c.id != i:
                raise InputError('providers must be numbered 0..C-1, found id {} at position {}'.format(c.id, i))

        self.dim = self.users[0].mean.size
        for u in self.users:
            if u.mean.size != self.dim:
                raise InputError('user {} has dimension {}, expected {}'.format(u.id, u.mean.size, self.dim))
        for c in self.providers:
            if c.embedding.size != self.dim:
                raise InputError('provider {} has dimension {}, expected {}'.format(c.id, c.embedding.size,
                                                                                   self.dim))

        self.reward_kind = RewardKind(reward_kind)
        self.horizon = int(horizon)
        self.slate_size = int(slate_size)
        if self.horizon < 1 or self.slate_size < 1:
            raise InputError('horizon and slate size must be at least 1')
        if self.providers and self.slate_size > len(self.providers):
            raise InputError('slate size {} exceeds the {} providers'.format(self.slate_size, len(self.providers)))

        self.utility = utility if utility is not None else LinearUtility(np.ones(self.horizon))
        if isinstance(self.utility, LinearUtility) and self.utility.horizon != self.horizon:
            raise InputError('{} slot weights for a horizon of {}'.format(self.utility.horizon, self.horizon))

        U, C, T = len(self.users), len(self.providers), self.horizon
        if query_weight is None:
            query_weight = [u.activation * u.demand for u in self.users]
        self.query_weight = _frozen(query_weight)
        if self.query_weight.shape != (U,) or np.any(self.query_weight < 0) \
                or not np.all(np.isfinite(self.query_weight)):
            raise InputError('query weights must be {} finite nonnegative values'.format(U))

        if engagement_weight is None:
            w = np.ones((U, C, T))
        else:
            w = np.array(engagement_weight, dtype=float)
            if w.shape == (U, C):
                w = np.repeat(w[:, :, None], T, axis=2)
            if w.shape != (U, C, T):
                raise InputError('engagement weights must have shape {} or {}'.format((U, C), (U, C, T)))
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InputError('engagement weights must be finite and nonnegative')
        self.engagement_weight = _frozen(w)

        self.reward_offset = float(reward_offset)
        self.reward_floor = None if reward_floor is None else float(reward_floor)
        self.distinct_slots = bool(distinct_slots)

        self.means = _frozen([u.mean for u in self.users])
        self.embeddings = _frozen([c.embedding for c in self.providers]).reshape(C, self.dim)
        self.thresholds = _frozen([c.threshold for c in self.providers])
        self.variances = _frozen([u.variance for u in self.users])
        self.activations = _frozen([u.activation for u in self.users])
        self.reward_matrix = _frozen(self.rewards_for(self.means))

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_providers(self):
        return len(self.providers)

    def kernel(self, queries):
        """
        The raw reward kernel between queries and every provider embedding, without offset or floor.

        Parameters
        ----------
        queries : ndarray
            A single query of shape (d,) or a batch of shape (n, d).

        Returns
        -------
        ndarray
            Kernel values of shape (C,) or (n, C).
        """
        q = np.asarray(queries, dtype=float)
        if q.shape[-1] != self.dim:
            raise InputError('query has dimension {}, expected {}'.format(q.shape[-1], self.dim))
        if self.reward_kind is RewardKind.DOT_PRODUCT:
            return q @ self.embeddings.T
        return -np.linalg.norm(q[..., None, :] - self.embeddings, axis=-1)

    def rewards_for(self, queries):
        r = self.kernel(queries) + self.reward_offset
        if self.reward_floor is not None:
            r = np.maximum(r, self.reward_floor)
        return r

    def replace(self, **changes):
        """A copy of this instance with some constructor arguments replaced."""
        kwargs = dict(users=self.users, providers=self.providers, reward_kind=self.reward_kind,
                      horizon=self.horizon, slate_size=self.slate_size, utility=self.utility,
                      query_weight=self.query_weight, engagement_weight=self.engagement_weight,
                      reward_offset=self.reward_offset, reward_floor=self.reward_floor,
                      distinct_slots=self.distinct_slots)
        if 'horizon' in changes and 'engagement_weight' not in changes:
            kwargs['engagement_weight'] = self.engagement_weight[:, :, 0]
        if 'horizon' in changes and 'utility' not in changes and isinstance(self.utility, LinearUtility):
            kwargs['utility'] = None
        kwargs.update(changes)
        return Instance(**kwargs)

    def with_thresholds(self, nu):
        """A copy with viability thresholds replaced, either one value for all providers or one per provider."""
        nu = np.broadcast_to(np.asarray(nu, dtype=float), (self.n_providers,))
        providers = [ProviderRecord(c.id, c.embedding, t) for c, t in zip(self.providers, nu)]
        return self.replace(providers=providers)

    def __repr__(self):
        return 'Instance(users={}, providers={}, reward_kind={}, T={}, s={})'.format(
            self.n_users, self.n_providers, self.reward_kind.value, self.horizon, self.slate_size)


def reward(instance, query, provider_id):
    """
    The reward of serving provider_id for a query.

    Parameters
    ----------
    instance : Instance
    query : array_like
        A query vector of the instance's dimension.
    provider_id : int

    Returns
    -------
    float
        q.c for DOT_PRODUCT, -|q-c| for NEGATIVE_DISTANCE, plus the instance's offset and floor.
    """
    if not 0 <= provider_id < instance.n_providers:
        raise InputError('no provider with id {}'.format(provider_id))
    query = np.asarray(query, dtype=float)
    if query.shape != (instance.dim,):
        raise InputError('query has shape {}, expected ({},)'.format(query.shape, instance.dim))
    return float(instance.rewards_for(query)[provider_id])
