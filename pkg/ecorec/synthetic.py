"""
Synthetic ecosystems: providers scattered in a low-dimensional topic space, users drawn from a mixture with one
Gaussian component per provider.

In the uniform variant every topic is equally popular and all users share one variance. In the skewed variant
topics near the origin are popular, and their users are broad (high variance), while far-out niche topics attract
few users with narrow interests.
"""

import enum
import logging
import numpy as np

from ecorec.errors import InputError
from ecorec.ecosim import make_rng
from ecorec.model import Instance, LinearUtility, ProviderRecord, RewardKind, UserProfile, discount_weights

logger = logging.getLogger(__name__)


class Variant(enum.Enum):
    UNIFORM = 'uniform'
    SKEWED = 'skewed'


class SyntheticParams:
    def __init__(self, n_providers=20, n_users=400, dim=2, variant=Variant.SKEWED, provider_spread=1.0,
                 user_variance=0.05, nu=None, seed=0, slate_size=1, gamma=1.0, reward_offset=None, skew=2.0):
        """
        Parameters of a synthetic ecosystem.

        Parameters
        ----------
        n_providers, n_users, dim : int
            Sizes of the ecosystem and of the topic space.
        variant : Variant or str
            'uniform' or 'skewed' topic popularity.
        provider_spread : float
            Standard deviation of the Gaussian the provider embeddings are drawn from.
        user_variance : float
            Base query variance of users. The skewed variant scales it by C times the topic's popularity.
        nu : float, optional
            Uniform viability threshold. Defaults to 8 * (n_users / n_providers) / 20 in the skewed variant and to
            0.9 * n_users / n_providers in the uniform one.
        seed : int
        slate_size : int
            Slots per epoch; slates of more than one slot hold distinct providers.
        gamma : float
            Discount factor of the slot weights.
        reward_offset : float, optional
            Added to every (negative distance) reward. Defaults to the largest distance between a user mean and a
            provider, rounded up, so that the reward of every planned query is nonnegative.
        skew : float
            Decay rate of topic popularity with distance from the origin, in units of the median distance.
        """
        self.n_providers = int(n_providers)
        self.n_users = int(n_users)
        self.dim = int(dim)
        try:
            self.variant = Variant(variant)
        except ValueError:
            raise InputError('unknown variant {!r}, expected uniform or skewed'.format(variant))
        self.provider_spread = float(provider_spread)
        self.user_variance = float(user_variance)
        self._default_nu = nu is None
        self.nu = self.default_nu() if nu is None else nu
        self.seed = int(seed)
        self.slate_size = int(slate_size)
        self.gamma = float(gamma)
        self.reward_offset = None if reward_offset is None else float(reward_offset)
        self.skew = float(skew)

        if min(self.n_providers, self.n_users, self.dim, self.slate_size) < 1:
            raise InputError('provider, user, dimension and slate counts must be at least 1')
        if self.slate_size > self.n_providers:
            raise InputError('slate size {} exceeds the {} providers'.format(self.slate_size, self.n_providers))
        if self.provider_spread <= 0 or self.user_variance < 0 or self.nu < 0 or self.skew < 0:
            raise InputError('spread must be positive; variance, nu and skew nonnegative')

    def default_nu(self):
        if not self.n_providers:
            return 0.0
        load = self.n_users / self.n_providers
        return 0.9 * load if self.variant is Variant.UNIFORM else 8.0 * load / 20.0

    def _fields(self):
        return {k: v for k, v in vars(self).items() if not k.startswith('_')}

    def replace(self, **changes):
        kwargs = self._fields()
        if self._default_nu:
            kwargs['nu'] = None
        kwargs.update(changes)
        return SyntheticParams(**kwargs)

    def __repr__(self):
        return 'SyntheticParams({})'.format(', '.join('{}={!r}'.format(k, v) for k, v in self._fields().items()))


def topic_prior(params, embeddings):
    """
    Popularity of each provider's topic, and the query variance of its users.

    Returns
    -------
    tuple
        (prior, variance), each a vector over providers; prior sums to 1.
    """
    C = embeddings.shape[0]
    if params.variant is Variant.UNIFORM:
        return np.full(C, 1.0 / C), np.full(C, params.user_variance)
    norms = np.linalg.norm(embeddings, axis=1)
    scale = np.median(norms)
    weights = np.exp(-params.skew * norms / scale) if scale > 0 else np.ones(C)
    prior = weights / weights.sum()
    return prior, params.user_variance * C * prior


def draw_population(params):
    """
    Draw provider embeddings and the users' mixture components, variances and means.

    Returns
    -------
    tuple
        (embeddings (C, d), components (U,), variances (U,), means (U, d))
    """
    rng = make_rng(params.seed)
    embeddings = rng.normal(0.0, params.provider_spread, size=(params.n_providers, params.dim))
    prior, variance = topic_prior(params, embeddings)
    components = rng.choice(params.n_providers, size=params.n_users, p=prior)
    variances = variance[components]
    noise = rng.standard_normal((params.n_users, params.dim))
    means = embeddings[components] + np.sqrt(variances)[:, None] * noise
    return embeddings, components, variances, means


def gen_synthetic(params):
    """
    A synthetic Instance with negative distance rewards, deterministic under params.seed.

    Parameters
    ----------
    params : SyntheticParams

    Returns
    -------
    Instance
    """
    embeddings, components, variances, means = draw_population(params)
    users = [UserProfile(u, means[u], variance=variances[u]) for u in range(params.n_users)]
    providers = [ProviderRecord(c, embeddings[c], params.nu) for c in range(params.n_providers)]
    s = params.slate_size
    offset = params.reward_offset
    if offset is None:
        offset = float(np.ceil(np.linalg.norm(means[:, None, :] - embeddings, axis=-1).max()))
    logger.debug('synthetic %s instance: %d providers, %d users, nu %.3f, reward offset %.3f, seed %d',
                 params.variant.value, params.n_providers, params.n_users, params.nu, offset, params.seed)
    return Instance(users, providers, RewardKind.NEGATIVE_DISTANCE, horizon=s, slate_size=s,
                    utility=LinearUtility(discount_weights(params.gamma, s)), reward_offset=offset,
                    distinct_slots=s > 1)
