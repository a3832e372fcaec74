"""
Functions to load and save ecosystem instances as embeddings files, and the small fixture instance used to check
solver and simulator values by hand.

An embeddings file is a comma-separated file with a header row::

    role,id,threshold,v0,v1,...,v<d-1>,rho,demand,variance

One row per user or provider. role is 'user' or 'provider'. Providers carry a threshold and leave rho, demand and
variance empty; users leave threshold empty. The trailing user columns are optional and default to 1, 1 and 0.
"""

import csv
import re
import numpy as np

from ecorec.errors import InputError
from ecorec.model import Instance, ProviderRecord, RewardKind, UserProfile

_VECTOR_COLUMN = re.compile(r'^v(\d+)$')
_USER_COLUMNS = ('rho', 'demand', 'variance')


def _parse_header(path, header):
    if header[:3] != ['role', 'id', 'threshold']:
        raise InputError('{}:1: header must start with role,id,threshold, got {}'.format(path, ','.join(header[:3])))
    vector = [name for name in header[3:] if _VECTOR_COLUMN.match(name)]
    if not vector:
        raise InputError('{}:1: no embedding columns v0..v<d-1>'.format(path))
    if vector != ['v{}'.format(i) for i in range(len(vector))] or header[3:3 + len(vector)] != vector:
        raise InputError('{}:1: embedding columns must be v0..v{} in order'.format(path, len(vector) - 1))
    extra = header[3 + len(vector):]
    unknown = [name for name in extra if name not in _USER_COLUMNS]
    if unknown:
        raise InputError('{}:1: unknown columns {}'.format(path, unknown))
    return len(vector), {name: 3 + len(vector) + i for i, name in enumerate(extra)}


def _number(path, lineno, name, text, default=None, kind=float):
    if text == '':
        if default is None:
            raise InputError('{}:{}: missing {}'.format(path, lineno, name))
        return default
    try:
        return kind(text)
    except ValueError:
        raise InputError('{}:{}: {} is not a number: {!r}'.format(path, lineno, name, text))


def load_embeddings(path, reward_kind=RewardKind.DOT_PRODUCT, nu=None, reward_offset=0.0, reward_floor=None,
                    horizon=1, slate_size=1, utility=None, distinct_slots=False):
    """
    Load an Instance from an embeddings file.

    Parameters
    ----------
    path : str
        The full path to the embeddings file.
    reward_kind : RewardKind, optional
        The reward kernel. Embeddings learned by factorization use the dot product.
    nu : float, optional
        A uniform viability threshold overriding the file's thresholds.
    reward_offset, reward_floor, horizon, slate_size, utility, distinct_slots
        Passed on to Instance.

    Returns
    -------
    Instance
        Users and providers ordered by id.
    """
    users, providers = {}, {}
    try:
        f = open(path, 'r', newline='', encoding='utf-8')
    except OSError as e:
        raise InputError('{}: {}'.format(path, e.strerror))
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError('{}: empty file'.format(path))
        d, extra = _parse_header(path, [h.strip() for h in header])
        width = 3 + d + len(extra)

        for row in reader:
            lineno = reader.line_num
            if not row or not ''.join(row).strip():
                continue
            row = [field.strip() for field in row]
            if len(row) != width:
                raise InputError('{}:{}: expected {} fields, found {}'.format(path, lineno, width, len(row)))
            role = row[0]
            id = _number(path, lineno, 'id', row[1], kind=int)
            vector = [_number(path, lineno, 'v{}'.format(i), row[3 + i]) for i in range(d)]
            table = users if role == 'user' else providers if role == 'provider' else None
            if table is None:
                raise InputError('{}:{}: unknown role {!r}'.format(path, lineno, role))
            if id in table:
                raise InputError('{}:{}: duplicate {} id {}'.format(path, lineno, role, id))
            try:
                if role == 'user':
                    fields = {name: row[i] for name, i in extra.items()}
                    table[id] = UserProfile(
                        id, vector,
                        variance=_number(path, lineno, 'variance', fields.get('variance', ''), 0.0),
                        activation=_number(path, lineno, 'rho', fields.get('rho', ''), 1.0),
                        demand=_number(path, lineno, 'demand', fields.get('demand', ''), 1, kind=int))
                else:
                    threshold = nu if nu is not None else _number(path, lineno, 'threshold', row[2])
                    table[id] = ProviderRecord(id, vector, threshold)
            except InputError as e:
                raise InputError('{}:{}: {}'.format(path, lineno, e))

    return Instance([users[i] for i in sorted(users)], [providers[i] for i in sorted(providers)],
                    reward_kind=reward_kind, horizon=horizon, slate_size=slate_size, utility=utility,
                    reward_offset=reward_offset, reward_floor=reward_floor, distinct_slots=distinct_slots)


def save_embeddings(instance, path):
    """
    Write the users and providers of an instance to an embeddings file.

    Values are written with full float precision, so load_embeddings with the same reward settings restores the
    instance exactly.
    """
    d = instance.dim
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['role', 'id', 'threshold'] + ['v{}'.format(i) for i in range(d)] + list(_USER_COLUMNS))
        for c in instance.providers:
            writer.writerow(['provider', c.id, repr(c.threshold)] + [repr(float(v)) for v in c.embedding] +
                            ['', '', ''])
        for u in instance.users:
            writer.writerow(['user', u.id, ''] + [repr(float(v)) for v in u.mean] +
                            [repr(u.activation), u.demand, repr(u.variance)])


def fig1a_instance(epsilon=0.05, reward_floor=None):
    """
    The one-dimensional toy ecosystem with three providers at 0, 2 and 4 and six users.

    Users sit at 0, 0, 1-epsilon, 2, 3-epsilon and 4, every provider needs two engagement units, and the reward is
    2 minus the distance. A myopic policy starves the provider at 4 while the best viable matching keeps all three
    providers alive by sending the users at 1-epsilon and 3-epsilon to their second-best providers.

    Parameters
    ----------
    epsilon : float
        The offset of the two in-between users, in (0, 0.5).
    reward_floor : float, optional
        Clip rewards from below, e.g. at 0 so that a far provider yields no reward rather than a negative one.
    """
    if not 0 < epsilon < 0.5:
        raise InputError('epsilon must lie in (0, 0.5), got {}'.format(epsilon))
    providers = [ProviderRecord(i, [x], 2.0) for i, x in enumerate([0.0, 2.0, 4.0])]
    users = [UserProfile(i, [x]) for i, x in enumerate([0.0, 0.0, 1 - epsilon, 2.0, 3 - epsilon, 4.0])]
    return Instance(users, providers, RewardKind.NEGATIVE_DISTANCE, reward_offset=2.0, reward_floor=reward_floor)
