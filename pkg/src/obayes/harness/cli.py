"""Command-line entry points.

Exit codes: 0 success, 1 configuration or argument validation error,
2 runtime failure (including a failed oracle cross-check).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from ..data import Dataset, generate_cluster_dataset
from ..models import save_ensemble
from ..numerics import RngStream
from ..obi import obi_init, obi_observe_many
from ..oracle import (
    coin_world,
    oracle_info_quantities,
    oracle_posterior,
    oracle_predictive,
    random_world,
    sample_world_dataset,
)
from ..predictive import joint_entropy_exact, marginal_log_probs
from .config import (
    DataSpec,
    ExperimentConfig,
    ModelSpec,
    RunManifest,
    load_config,
)
from .experiments import (
    al_with_obi,
    model_factory,
    obi_vs_retrain_eval,
    repeated_pool_benchmark,
)
from .io import emit_results


class CliError(ValueError):
    """Configuration or argument problem; maps to exit code 1."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obayes",
        description="Online Bayesian inference experiments over posterior ensembles.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="generate a synthetic cluster dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=40)
    p.add_argument("--num-classes", type=int, default=4)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--spread", type=float, default=0.45)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train an ensemble on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="mc_dropout",
                   choices=["mc_dropout", "deep_ensemble"])
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--ensemble-size", type=int, default=128)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("acquire", help="run an acquisition loop over a pool")
    p.add_argument("--data", required=True, help="pool dataset (.npz)")
    p.add_argument("--eval-data", help="held-out dataset for label-aware scoring")
    p.add_argument("--strategy", default="bald")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--retrain-every", type=int, default=1)
    p.add_argument("--model", default="mc_dropout",
                   choices=["mc_dropout", "deep_ensemble"])
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--ensemble-size", type=int, default=128)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="sequence CSV path")
    p.set_defaults(func=_cmd_acquire)

    for name, func, help_text in (
            ("obi-eval", _cmd_obi_eval,
             "compare reweighting against retraining along sequences"),
            ("repeated-pool", _cmd_repeated_pool,
             "duplicated-pool acquisition benchmark"),
            ("al-obi", _cmd_al_obi,
             "acquisition with reweighting between retrains")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--trials", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--lookahead", type=int)
        p.add_argument("--strategy")
        p.add_argument("--ensemble-size", type=int)
        p.add_argument("--bootstrap-size", type=int)
        p.add_argument("--duplication", type=int)
        p.add_argument("--ess-threshold", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("oracle-check",
                       help="cross-check estimators against brute-force enumeration")
    p.add_argument("--worlds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle_check)
    return parser


def _experiment_config(args) -> ExperimentConfig:
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        overrides = {}
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.steps is not None:
            overrides["num_steps"] = args.steps
        if args.lookahead is not None:
            overrides["lookahead"] = args.lookahead
        if args.strategy is not None:
            overrides["strategy"] = args.strategy
        if args.bootstrap_size is not None:
            overrides["bootstrap_size"] = args.bootstrap_size
        if args.duplication is not None:
            overrides["duplication_factor"] = args.duplication
        if args.ess_threshold is not None:
            overrides["ess_retrain_threshold"] = args.ess_threshold
        overrides["seed"] = args.seed
        overrides["out_dir"] = args.out
        model = config.model
        if args.ensemble_size is not None:
            model = replace(model, ensemble_size=args.ensemble_size)
        return replace(config, model=model, **overrides)
    except (ValueError, TypeError, KeyError, OSError,
            json.JSONDecodeError) as err:
        raise CliError(str(err)) from err


def _cmd_gen_data(args) -> int:
    if args.n_per_class < 1 or args.num_classes < 2 or args.dim < 1:
        raise CliError("sizes must be positive and num-classes >= 2")
    data = generate_cluster_dataset(args.n_per_class, args.num_classes,
                                    args.dim, args.spread,
                                    RngStream(seed=args.seed).derive("gen-data"))
    data.save(args.out)
    print(f"wrote {len(data)} examples to {args.out}")
    return 0


def _model_spec(args) -> ModelSpec:
    try:
        return ModelSpec(kind=args.model, hidden=args.hidden,
                         dropout_rate=args.dropout, epochs=args.epochs,
                         ensemble_size=args.ensemble_size)
    except ValueError as err:
        raise CliError(str(err)) from err


def _cmd_train(args) -> int:
    spec = _model_spec(args)
    data = Dataset.load(args.data)
    factory = model_factory(spec, data.dim, data.num_classes)
    ensemble = factory(data, RngStream(seed=args.seed).derive("train-cmd"))
    save_ensemble(args.out, ensemble)
    print(f"trained {spec.kind} ensemble of {ensemble.size} on "
          f"{len(data)} examples -> {args.out}")
    return 0


def _cmd_acquire(args) -> int:
    from ..acquisition import STRATEGIES, run_acquisition
    if args.strategy not in STRATEGIES:
        raise CliError(f"unknown strategy: {args.strategy}")
    spec = _model_spec(args)
    pool = Dataset.load(args.data)
    eval_set = Dataset.load(args.eval_data) if args.eval_data else None
    if args.strategy == "active_sampling" and eval_set is None:
        raise CliError("active_sampling requires --eval-data")
    factory = model_factory(spec, pool.dim, pool.num_classes)
    sequence = run_acquisition(args.strategy, factory, pool, eval_set,
                               args.steps, args.retrain_every,
                               RngStream(seed=args.seed).derive("acquire"))
    sequence.save(args.out)
    print(f"acquired {len(sequence)} examples with {args.strategy} -> {args.out}")
    return 0


def _run_experiment(args, runner, label: str) -> int:
    config = _experiment_config(args)
    records = runner(config)
    paths = emit_results(records, RunManifest.create(config), args.out)
    print(f"{label}: {len(records)} records -> "
          + ", ".join(str(p) for p in paths))
    return 0


def _cmd_obi_eval(args) -> int:
    return _run_experiment(args, obi_vs_retrain_eval, "obi-eval")


def _cmd_repeated_pool(args) -> int:
    return _run_experiment(args, repeated_pool_benchmark, "repeated-pool")


def _cmd_al_obi(args) -> int:
    return _run_experiment(args, al_with_obi, "al-obi")


def _check_world(world, rng: RngStream, label: str) -> list:
    """Compare main-path quantities against the enumeration oracle."""
    from ..acquisition import bald_scores
    from ..data import LabeledExample
    from ..infometrics import total_correlation
    from ..models import exact_grid_posterior, grid_family_from_world
    family = grid_family_from_world(world)
    with np.errstate(divide="ignore"):
        prior = np.log(world.prior)
    gen = rng.generator()
    n_obs = int(gen.integers(0, 4))
    observed = [LabeledExample(x, y)
                for x, y in sample_world_dataset(world, n_obs, gen)]
    n_batch = int(gen.integers(1, 4))
    batch_xs = np.stack([x for x, _ in
                         sample_world_dataset(world, n_batch, gen)])
    failures = []

    def close(name, a, b, tol=1e-9):
        if not np.all(np.abs(np.asarray(a) - np.asarray(b)) <= tol):
            failures.append(f"{label}: {name} mismatch ({a} vs {b})")

    posterior = exact_grid_posterior(family, prior, observed)
    close("posterior", np.exp(posterior.normalized_log_weights()),
          oracle_posterior(world, observed))
    state = obi_observe_many(obi_init(family.uniform_ensemble()
                                      .reweighted(prior)), observed)
    close("obi posterior", np.exp(state.as_ensemble().normalized_log_weights()),
          oracle_posterior(world, observed))
    rows = marginal_log_probs(posterior, batch_xs)
    for i in range(n_batch):
        close(f"predictive[{i}]", np.exp(rows[i]),
              oracle_predictive(world, observed, batch_xs[i]))
    oracle_vals = oracle_info_quantities(world, batch_xs, observed)
    close("joint entropy", joint_entropy_exact(posterior, batch_xs),
          oracle_vals["joint_entropy"])
    close("total correlation", total_correlation(posterior, batch_xs),
          oracle_vals["total_correlation"])
    close("bald", bald_scores(posterior, batch_xs), oracle_vals["bald"])
    return failures


def _cmd_oracle_check(args) -> int:
    if args.worlds < 1:
        raise CliError("need at least one world")
    failures = _check_world(coin_world(),
                            RngStream(seed=args.seed).derive("coin"), "coin")
    print("coin world: " + ("ok" if not failures else "FAIL"))
    for w in range(args.worlds):
        stream = RngStream(seed=args.seed).derive("world", w)
        world = random_world(stream.generator())
        found = _check_world(world, stream.derive("check"), f"world {w}")
        print(f"world {w} (K={world.num_hypotheses}, C={world.num_classes}): "
              + ("ok" if not found else "FAIL"))
        failures += found
    if failures:
        for line in failures:
            print(f"  {line}", file=sys.stderr)
        raise RuntimeError(f"{len(failures)} oracle mismatches")
    print(f"all {args.worlds + 1} worlds matched the oracle")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 1
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - boundary of the process
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
