"""
Command line entry point. Run from the repository root, e.g.

    python -m ecorec.scripts.run verify
    python -m ecorec.scripts.run gen --variant skewed --seed 0 --out skewed.csv
    python -m ecorec.scripts.run solve --instance skewed.csv --reward negdist --method lp-rs
    python -m ecorec.scripts.run simulate --config experiment.json --out results
"""

import argparse
import sys
import numpy as np

from ecorec.data import fig1a_instance, load_embeddings, save_embeddings
from ecorec.ecosim import run_simulation
from ecorec.errors import EcorecError, InputError
from ecorec.experiment import ExperimentConfig, run_experiment
from ecorec.model import LinearUtility, RewardKind, SigmoidUtility, discount_weights
from ecorec.solvers.colgen import column_generation
from ecorec.solvers.matching import (MatchingPolicy, exact_enumeration, greedy_providers, lp_rs, regret_report,
                                     regret_tradeoff)
from ecorec.synthetic import SyntheticParams, gen_synthetic

METHODS = ('myopic', 'greedy', 'lp-rs', 'colgen', 'exact')
GOLDEN_TOL = 1e-6


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description='Viability-constrained recommendation: instances, solvers and '
                                                 'ecosystem simulations.',
                                     epilog=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    gen = commands.add_parser('gen', help='Write a synthetic instance to an embeddings file.')
    gen.add_argument('--variant', choices=['uniform', 'skewed'], default='skewed')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', required=True)
    gen.add_argument('--providers', type=int, default=20)
    gen.add_argument('--users', type=int, default=400)
    gen.add_argument('--dim', type=int, default=2)
    gen.add_argument('--nu', type=float, default=None)
    gen.add_argument('--slate', type=int, default=1)

    solve = commands.add_parser('solve', help='Compute one matching and report welfare, viable set and max regret.')
    source = solve.add_mutually_exclusive_group(required=True)
    source.add_argument('--instance', help='embeddings file')
    source.add_argument('--fixture', choices=['fig1a'])
    solve.add_argument('--method', choices=METHODS, default='lp-rs')
    solve.add_argument('--reward', choices=[k.value for k in RewardKind], default='dot')
    solve.add_argument('--offset', type=float, default=0.0)
    solve.add_argument('--nu', type=float, default=None)
    solve.add_argument('--floor', type=float, default=None)
    solve.add_argument('--gamma', type=float, default=1.0)
    solve.add_argument('--lambda', dest='lam', type=float, default=0.0)
    solve.add_argument('--slate', type=int, default=1)
    solve.add_argument('--theta', type=float, default=0.5)
    solve.add_argument('--beta', type=float, default=0.0, help='sigmoid offset for colgen')
    solve.add_argument('--scale', type=float, default=1.0, help='sigmoid scale for colgen')

    simulate = commands.add_parser('simulate', help='Run an experiment from a config file.')
    simulate.add_argument('--config', default=None)
    simulate.add_argument('--seed', type=int, default=None)
    simulate.add_argument('--out', default=None)
    simulate.add_argument('--method', choices=METHODS + ('stochastic',), default=None)
    simulate.add_argument('--gamma', type=float, default=None)
    simulate.add_argument('--lambda', dest='lam', type=float, default=None)
    simulate.add_argument('--epochs', type=int, default=None)
    simulate.add_argument('--slate', type=int, default=None)

    commands.add_parser('verify', help='Check the toy ecosystem values.')
    return parser.parse_args(argv)


def _solve_instance(opts):
    s = opts.slate
    if opts.fixture:
        instance = fig1a_instance(reward_floor=opts.floor)
        if s != 1:
            raise InputError('the fig1a fixture has a single slot')
    else:
        instance = load_embeddings(opts.instance, reward_kind=RewardKind(opts.reward), nu=opts.nu,
                                   reward_offset=opts.offset, reward_floor=opts.floor, horizon=s, slate_size=s,
                                   utility=LinearUtility(discount_weights(opts.gamma, s)), distinct_slots=s > 1)
    if opts.method == 'colgen':
        instance = instance.replace(utility=SigmoidUtility(opts.beta, opts.scale))
    return instance


def myopic_matching(instance):
    """
    The matching myopic serving settles into: every user matched to its best providers among those that survive
    repeated abandonment under deterministic queries.
    """
    trajectory = run_simulation(instance, 'myopic', instance.n_providers + 1, deterministic_queries=True)
    viable = np.array(trajectory.metrics[-1].viable, dtype=int)
    if not viable.size:
        return MatchingPolicy.empty(instance, reason='every provider abandoned')
    ranked = viable[np.argsort(-instance.reward_matrix[:, viable], axis=1, kind='stable')]
    T = instance.horizon
    return MatchingPolicy.from_assignment(instance, [r[:T] if instance.distinct_slots else r[0] for r in ranked])


def solve(opts):
    instance = _solve_instance(opts)
    if opts.method == 'myopic':
        policy = myopic_matching(instance)
    elif opts.method == 'greedy':
        policy = greedy_providers(instance)
    elif opts.method == 'lp-rs':
        policy = regret_tradeoff(instance, opts.lam, theta=opts.theta) if opts.lam else lp_rs(instance, opts.theta)
    elif opts.method == 'colgen':
        policy = column_generation(instance, theta=opts.theta)
    else:
        policy = exact_enumeration(instance)
    regret = regret_report(instance, policy)
    print('method      {}'.format(opts.method))
    print('welfare     {:.6f}'.format(policy.welfare))
    print('viable set  {}'.format(list(policy.viable_set)))
    print('max regret  {:.6f}'.format(regret.max_regret))
    return 0


def simulate(opts):
    config = ExperimentConfig.from_file(opts.config) if opts.config else ExperimentConfig()
    overrides = {}
    if opts.seed is not None:
        overrides['seeds'] = [opts.seed]
    if opts.out is not None:
        overrides['output_dir'] = opts.out
    if opts.method is not None:
        overrides['policies'] = [opts.method]
    if opts.gamma is not None:
        overrides['gammas'] = [opts.gamma]
    if opts.lam is not None:
        overrides['lambdas'] = [opts.lam]
    if opts.epochs is not None:
        overrides['epochs'] = opts.epochs
    if opts.slate is not None:
        overrides['slate_size'] = opts.slate
    config = config.replace(**overrides)
    for row in run_experiment(config):
        print('{:<12} gamma={:.2f} lambda={:.2f}  welfare {:.6f} +- {:.6f}  viable {:.2f}  ratio {:.4f}'.format(
            row['policy'], row['gamma'], row['lambda'], row['welfare_mean'], row['welfare_std'],
            row['viable_count_mean'], row['regret_welfare_ratio_mean']))
    print('results written to {}'.format(config.output_dir))
    return 0


def golden_values():
    """
    Values of the toy ecosystem, as (name, computed, expected).
    """
    instance = fig1a_instance()
    optimal = exact_enumeration(instance)
    rounded = lp_rs(instance)
    myopic = run_simulation(instance, 'myopic', 3, deterministic_queries=True)
    floored = fig1a_instance(reward_floor=0.0)
    alternate = MatchingPolicy.from_assignment(floored, [0, 0, 2, 1, 1, 2])
    return [
        ('exact welfare', optimal.welfare, 9.9),
        ('lp-rs welfare', rounded.welfare, 9.9),
        ('myopic first epoch welfare', myopic.metrics[0].social_welfare, 10.1),
        ('myopic equilibrium welfare', myopic.metrics[-1].social_welfare, 8.1),
        ('optimal max regret', regret_report(instance, optimal).max_regret, 0.1),
        ('alternate welfare', alternate.welfare, 9.05),
        ('alternate max regret', regret_report(floored, alternate).max_regret, 1.05),
    ]


def verify(opts):
    failed = 0
    for name, value, expected in golden_values():
        ok = abs(value - expected) <= GOLDEN_TOL
        failed += not ok
        print('{:<28} {:.6f}  expected {:.6f}  {}'.format(name, value, expected, 'ok' if ok else 'FAIL'))
    return 1 if failed else 0


def gen(opts):
    params = SyntheticParams(n_providers=opts.providers, n_users=opts.users, dim=opts.dim, variant=opts.variant,
                             nu=opts.nu, seed=opts.seed, slate_size=opts.slate)
    instance = gen_synthetic(params)
    save_embeddings(instance, opts.out)
    print('wrote {} ({} providers, {} users, reward offset {:g})'.format(opts.out, params.n_providers, params.n_users,
                                                                        instance.reward_offset))
    return 0


def main(argv=None):
    opts = parse_args(argv)
    try:
        return {'gen': gen, 'solve': solve, 'simulate': simulate, 'verify': verify}[opts.command](opts)
    except EcorecError as e:
        print('error: {}'.format(e), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
