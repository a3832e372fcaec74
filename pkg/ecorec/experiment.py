"""
Experiment configuration and the harness that simulates every (policy, seed, gamma, lambda) cell and writes the
result tables and charts.

A configuration is a JSON (or YAML) document::

    {
      "instance": {"synthetic": {"n_providers": 20, "n_users": 400, "variant": "skewed"}},
      "policies": ["myopic", "lp-rs"],
      "epochs": 10,
      "seeds": [0, 1, 2],
      "gammas": [1.0],
      "lambdas": [0.0],
      "slate_size": 1,
      "solver": {"theta": 0.5},
      "output_dir": "results"
    }

The instance may instead come from an embeddings file:
``{"embeddings": PATH, "nu": 8, "reward": "dot", "offset": 0}``. An optional ``"utility": {"sigmoid": {"beta": B,
"scale": S}}`` replaces the discounted linear utility, as column generation requires.
"""

import csv
import logging
import os
import yaml
import numpy as np

from ecorec.charts import plot_curves
from ecorec.data import load_embeddings
from ecorec.ecosim import ABANDONMENT_MODES, POLICIES, make_policy, run_simulation
from ecorec.errors import InputError
from ecorec.model import LinearUtility, RewardKind, SigmoidUtility, discount_weights
from ecorec.solvers.colgen import write_iteration_log
from ecorec.synthetic import SyntheticParams, gen_synthetic

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['epoch', 'policy', 'seed', 'social_welfare', 'avg_user_utility', 'viable_count', 'max_regret',
                      'stranded_users', 'gamma', 'lambda']
HISTOGRAM_COLUMNS = ['policy', 'seed', 'user_id', 'total_utility', 'gamma', 'lambda']
SUMMARY_STATS = ['welfare', 'avg_utility', 'max_regret', 'regret_welfare_ratio', 'viable_count']
SUMMARY_COLUMNS = ['policy', 'gamma', 'lambda', 'seeds'] + ['{}_{}'.format(s, m) for s in SUMMARY_STATS
                                                            for m in ('mean', 'std')]
SOLVER_KEYS = ('theta', 'tol', 'max_pivots', 'candidates', 'colgen_k', 'colgen_max_iter')


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return '{:.6f}'.format(value)
    return str(value)


class ExperimentConfig:
    KEYS = ('instance', 'policies', 'epochs', 'seeds', 'gammas', 'lambdas', 'slate_size', 'solver', 'utility',
            'abandonment', 'deterministic_queries', 'output_dir')

    def __init__(self, instance=None, policies=('myopic', 'lp-rs'), epochs=10, seeds=(0, 1, 2), gammas=(1.0,),
                 lambdas=(0.0,), slate_size=1, solver=None, utility=None, abandonment='deterministic',
                 deterministic_queries=False, output_dir='results'):
        self.instance = dict(instance or {'synthetic': {}})
        self.policies = list(policies)
        self.epochs = epochs
        self.seeds = list(seeds)
        self.gammas = [float(g) for g in gammas]
        self.lambdas = [float(lam) for lam in lambdas]
        self.slate_size = slate_size
        self.solver = dict(solver or {})
        self.utility = utility
        self.abandonment = abandonment
        self.deterministic_queries = bool(deterministic_queries)
        self.output_dir = output_dir
        self.validate()

    def validate(self):
        if not self.policies:
            raise InputError('config: the policy list is empty')
        unknown = [p for p in self.policies if p not in POLICIES]
        if unknown:
            raise InputError('config: unknown policies {}, expected some of {}'.format(unknown, sorted(POLICIES)))
        if not self.seeds:
            raise InputError('config: the seed list is empty')
        if any(not isinstance(s, (int, np.integer)) or isinstance(s, bool) for s in self.seeds):
            raise InputError('config: seeds must be integers')
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise InputError('config: epochs must be a positive integer, got {!r}'.format(self.epochs))
        if not isinstance(self.slate_size, int) or self.slate_size < 1:
            raise InputError('config: slate_size must be a positive integer, got {!r}'.format(self.slate_size))
        if not self.gammas or any(not 0 < g <= 1 for g in self.gammas):
            raise InputError('config: gammas must be a nonempty list of values in (0,1]')
        if not self.lambdas or any(lam < 0 for lam in self.lambdas):
            raise InputError('config: lambdas must be a nonempty list of nonnegative values')
        unknown = sorted(set(self.solver) - set(SOLVER_KEYS))
        if unknown:
            raise InputError('config: unknown solver options {}'.format(unknown))
        if self.abandonment not in ABANDONMENT_MODES:
            raise InputError('config: abandonment must be one of {}'.format(ABANDONMENT_MODES))
        sources = set(self.instance) & {'synthetic', 'embeddings'}
        if len(sources) != 1:
            raise InputError('config: instance needs exactly one of "synthetic" or "embeddings"')
        if 'synthetic' in self.instance and not isinstance(self.instance['synthetic'], dict):
            raise InputError('config: instance.synthetic must be an object')
        if self.utility is not None and set(self.utility) != {'sigmoid'}:
            raise InputError('config: utility must be {"sigmoid": {...}}')
        if 'colgen' in self.policies and self.utility is None:
            raise InputError('config: the colgen policy needs a sigmoid utility, e.g. "utility": {"sigmoid": {}}')
        additive = sorted(set(self.policies) & {'lp-rs', 'greedy', 'exact'})
        if self.utility is not None and additive:
            raise InputError('config: policies {} need the discounted linear utility, drop "utility"'.format(additive))

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InputError('config: expected an object at the top level')
        unknown = sorted(set(d) - set(cls.KEYS))
        if unknown:
            raise InputError('config: unknown keys {}'.format(unknown))
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            if isinstance(e, InputError):
                raise
            raise InputError('config: {}'.format(e))

    @classmethod
    def from_file(cls, path):
        """Read a JSON or YAML configuration file."""
        try:
            with open(path, 'r') as f:
                d = yaml.safe_load(f.read())
        except OSError as e:
            raise InputError('config {}: {}'.format(path, e))
        except yaml.YAMLError as e:
            raise InputError('config {}: not valid JSON/YAML: {}'.format(path, e))
        return cls.from_dict(d)

    def replace(self, **changes):
        kwargs = {key: getattr(self, key) for key in self.KEYS}
        kwargs.update(changes)
        return ExperimentConfig(**kwargs)

    def build_instance(self, seed, gamma):
        """The instance simulated for one seed and discount factor."""
        s = self.slate_size
        source = self.instance
        if 'synthetic' in source:
            try:
                params = SyntheticParams(**dict(source['synthetic'], seed=seed, gamma=gamma, slate_size=s))
            except TypeError as e:
                raise InputError('config: instance.synthetic: {}'.format(e))
            instance = gen_synthetic(params)
        else:
            unknown = sorted(set(source) - {'embeddings', 'nu', 'reward', 'offset'})
            if unknown:
                raise InputError('config: unknown instance keys {}'.format(unknown))
            instance = load_embeddings(source['embeddings'], reward_kind=RewardKind(source.get('reward', 'dot')),
                                       nu=source.get('nu'), reward_offset=source.get('offset', 0.0),
                                       horizon=s, slate_size=s,
                                       utility=LinearUtility(discount_weights(gamma, s)), distinct_slots=s > 1)
        if self.utility is not None:
            instance = instance.replace(utility=SigmoidUtility(**self.utility['sigmoid']))
        return instance

    def __repr__(self):
        return 'ExperimentConfig(policies={}, seeds={}, epochs={})'.format(self.policies, self.seeds, self.epochs)


def write_csv(path, columns, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv(path):
    with open(path, 'r', newline='') as f:
        return list(csv.DictReader(f))


def _check_writable(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise InputError('output directory {}: {}'.format(path, e))
    if not os.path.isdir(path) or not os.access(path, os.W_OK | os.X_OK):
        raise InputError('output directory {} is not writable'.format(path))


def summarize(rows):
    """
    Per (policy, gamma, lambda) means and standard deviations over seeds of per-seed statistics.

    The per-seed statistics are the welfare averaged over epochs, the average user utility averaged over epochs, and
    at the final epoch the max regret, the ratio of max regret to |average user utility| and the viable count.

    Parameters
    ----------
    rows : iterable of dict
        Trajectory rows, with numbers or their CSV text.

    Returns
    -------
    list of dict
        One row per group, in order of first appearance.
    """
    groups = {}
    for row in rows:
        key = (row['policy'], float(row['gamma']), float(row['lambda']))
        groups.setdefault(key, {}).setdefault(int(row['seed']), []).append(row)

    summary = []
    for (policy, gamma, lam), seeds in groups.items():
        stats = {s: [] for s in SUMMARY_STATS}
        for seed_rows in seeds.values():
            seed_rows = sorted(seed_rows, key=lambda r: int(r['epoch']))
            final = seed_rows[-1]
            avg = float(final['avg_user_utility'])
            stats['welfare'].append(np.mean([float(r['social_welfare']) for r in seed_rows]))
            stats['avg_utility'].append(np.mean([float(r['avg_user_utility']) for r in seed_rows]))
            stats['max_regret'].append(float(final['max_regret']))
            stats['regret_welfare_ratio'].append(float(final['max_regret']) / abs(avg) if avg else np.nan)
            stats['viable_count'].append(float(final['viable_count']))
        out = dict(policy=policy, gamma=gamma, **{'lambda': lam}, seeds=len(seeds))
        for s, values in stats.items():
            out[s + '_mean'] = float(np.mean(values))
            out[s + '_std'] = float(np.std(values))
        summary.append(out)
    return summary


def _mean_curves(rows, column):
    curves = {}
    grid = len(set((r['gamma'], r['lambda']) for r in rows)) > 1
    for row in rows:
        label = row['policy']
        if grid:
            label = '{} (gamma={}, lambda={})'.format(row['policy'], row['gamma'], row['lambda'])
        curves.setdefault(label, {}).setdefault(int(row['epoch']), []).append(float(row[column]))
    return {label: (sorted(by_epoch), [np.mean(by_epoch[e]) for e in sorted(by_epoch)])
            for label, by_epoch in curves.items()}


def run_experiment(config):
    """
    Simulate the cross product of policies, seeds, discount factors and regret weights.

    Writes trajectories.csv, histogram.csv, summary.csv, welfare.svg and viable.svg to the output directory, plus a
    column generation iteration log per colgen cell.

    Parameters
    ----------
    config : ExperimentConfig

    Returns
    -------
    list of dict
        The summary rows.
    """
    out = config.output_dir
    _check_writable(out)
    trajectories, histogram = [], []

    for gamma in config.gammas:
        for seed in config.seeds:
            instance = config.build_instance(seed, gamma)
            for name in config.policies:
                for lam in config.lambdas:
                    logger.info('cell %s seed=%d gamma=%g lambda=%g started', name, seed, gamma, lam)
                    policy = make_policy(name, lam=lam, **config.solver)
                    trajectory = run_simulation(instance, policy, config.epochs, seed=seed,
                                                abandonment=config.abandonment,
                                                deterministic_queries=config.deterministic_queries)
                    extra = {'gamma': gamma, 'lambda': lam}
                    trajectories.extend(dict(row, **extra) for row in trajectory.rows())
                    histogram.extend(dict(row, **extra) for row in trajectory.histogram_rows())
                    if name == 'colgen' and policy.matching is not None:
                        log_path = os.path.join(out, 'colgen_{}_{:g}_{:g}.csv'.format(seed, gamma, lam))
                        write_iteration_log(log_path, policy.matching.diagnostics.get('iterations', []))
                    logger.info('cell %s seed=%d gamma=%g lambda=%g finished', name, seed, gamma, lam)

    write_csv(os.path.join(out, 'trajectories.csv'), TRAJECTORY_COLUMNS, trajectories)
    write_csv(os.path.join(out, 'histogram.csv'), HISTOGRAM_COLUMNS, histogram)

    # Summaries are computed from the rows as written so they can be recomputed from the CSV.
    written = read_csv(os.path.join(out, 'trajectories.csv'))
    summary = summarize(written)
    write_csv(os.path.join(out, 'summary.csv'), SUMMARY_COLUMNS, summary)

    plot_curves(os.path.join(out, 'welfare.svg'), _mean_curves(written, 'social_welfare'), 'social welfare')
    plot_curves(os.path.join(out, 'viable.svg'), _mean_curves(written, 'viable_count'), 'viable providers')
    return summary
