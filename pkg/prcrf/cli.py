"""
Command-line front end: inspect, train, predict, filter and benchmark.

Every subcommand writes its artifact through a temporary file and exits 0
only once that artifact is complete. Errors go to standard error with a
nonzero exit status.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from prcrf.config import Settings, load_settings, settings as defaults
from prcrf.data import load_csv, load_features, summarize, write_rows, write_text_atomic
from prcrf.errors import BenchmarkError, DatasetError, TrainingError
from prcrf.forest import build_forest, check_feature_names, feature_importance, predict_forest_batch
from prcrf.models import Activation, Algorithm, FilterScope, Optimizer, TrainingPopulation
from prcrf.pipeline import autoencoder_filter, run_benchmark, train_ae_prc_rf
from prcrf.reports import ReportingService
from prcrf.repo import ModelRepository
from prcrf.tree import tree_depth

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _default(name: str) -> str:
    value = getattr(defaults, name)
    if isinstance(value, list):
        return ",".join(getattr(v, "value", str(v)) for v in value)
    return str(getattr(value, "value", value))


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML file of setting names to values (flags override it)")
    p.add_argument("--data", help="delimited text file with a header row")
    p.add_argument("--target", help="name of the class column")
    p.add_argument("--positive-label", help=f"target value mapped to +1 (default: {_default('positive_label')})")
    p.add_argument("--delimiter", help=f"field delimiter (default: {_default('delimiter')!r})")
    p.add_argument("--seed", type=int, help=f"master seed for every random choice (default: {_default('seed')})")
    p.add_argument("--out", help="output path (prefix for benchmark reports)")
    p.add_argument("--threads", type=int, help=f"worker threads (default: {_default('threads')})")
    p.add_argument("--log-level", help=f"logging level (default: {_default('log_level')})")
    p.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    return p


def _forest_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n-trees", type=int, help=f"trees in the forest (default: {_default('n_trees')})")
    p.add_argument("--max-depth", type=int, help=f"maximum tree depth, root = 1 (default: {_default('max_depth')})")
    p.add_argument("--min-leaf", type=int, help=f"minimum rows per leaf (default: {_default('min_leaf')})")
    p.add_argument(
        "--n-features",
        type=int,
        help="features sampled per split (default: floor(sqrt(number of features)))",
    )
    return p


def _ae_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument(
        "--ae-widths",
        help="encoder widths as a comma list, first = feature count "
        "(default: n,ceil(n/2),ceil(n/4))",
    )
    p.add_argument("--ae-epochs", type=int, help=f"training epochs (default: {_default('ae_epochs')})")
    p.add_argument("--ae-lr", type=float, help=f"learning rate (default: {_default('ae_lr')})")
    p.add_argument("--ae-batch", type=int, help=f"mini-batch size (default: {_default('ae_batch')})")
    p.add_argument(
        "--ae-quantile",
        type=float,
        help=f"reconstruction-error quantile used as the cutoff (default: {_default('ae_quantile')})",
    )
    p.add_argument(
        "--ae-activation",
        choices=[a.value for a in Activation],
        help=f"hidden-layer activation (default: {_default('ae_activation')})",
    )
    p.add_argument(
        "--ae-population",
        choices=[t.value for t in TrainingPopulation],
        help=f"rows the autoencoder learns from (default: {_default('ae_population')})",
    )
    p.add_argument(
        "--ae-optimizer",
        choices=[o.value for o in Optimizer],
        help=f"weight update rule (default: {_default('ae_optimizer')})",
    )
    p.add_argument(
        "--ae-filter-scope",
        choices=[s.value for s in FilterScope],
        help=f"rows eligible for removal (default: {_default('ae_filter_scope')})",
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prcrf",
        description="PRC classification trees, PRC random forests and Autoencoder-PRC-RF",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common, forest, ae = _common_flags(), _forest_flags(), _ae_flags()

    sub.add_parser("inspect", parents=[common], help="print a dataset summary")

    train = sub.add_parser("train", parents=[common, forest, ae], help="train and save a model")
    train.add_argument(
        "--ae",
        action=argparse.BooleanOptionalAction,
        default=None,
        help=f"filter the training set through an autoencoder first (default: {_default('ae')})",
    )

    predict = sub.add_parser("predict", parents=[common], help="label rows with a saved model")
    predict.add_argument("--model", help="model file written by train")

    sub.add_parser("filter", parents=[common, ae], help="write the autoencoder-filtered dataset")

    bench = sub.add_parser("benchmark", parents=[common, forest, ae], help="repeated-split comparison")
    bench.add_argument("--test-fraction", type=float, help=f"test share of each split (default: {_default('test_fraction')})")
    bench.add_argument("--repetitions", type=int, help=f"random splits (default: {_default('repetitions')})")
    bench.add_argument(
        "--algorithms",
        help=f"comma list from {', '.join(a.value for a in Algorithm)} (default: {_default('algorithms')})",
    )
    bench.add_argument(
        "--ae-quantiles",
        help="comma list of cutoff quantiles; runs each autoencoder algorithm once per value",
    )
    return parser


def _settings_from_args(args: argparse.Namespace) -> Settings:
    overrides = {k: v for k, v in vars(args).items() if k in Settings.model_fields}
    if args.verbose:
        overrides["log_level"] = "DEBUG"
    return load_settings(args.config, overrides)


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise ValueError(f"{flag} is required")
    return value


def _load(cfg: Settings):
    return load_csv(
        _require(cfg.data, "--data"),
        _require(cfg.target, "--target"),
        cfg.positive_label,
        delimiter=cfg.delimiter,
    )


def cmd_inspect(cfg: Settings) -> int:
    summary = summarize(_load(cfg))
    record = summary.to_record(cfg.delimiter)
    if cfg.out:
        write_text_atomic(cfg.out, record + "\n")
    print(record)
    return EXIT_OK


def cmd_train(cfg: Settings) -> int:
    out = _require(cfg.out, "--out")
    d = _load(cfg)
    params = cfg.forest_params(d.n_features)
    autoencoder, flagged = None, []
    if cfg.ae:
        forest, autoencoder, flagged = train_ae_prc_rf(d, cfg.ae_config(), params, n_threads=cfg.threads)
    else:
        forest = build_forest(d, params, n_threads=cfg.threads)
    ModelRepository(out).save(forest, autoencoder, flagged)

    lines = [
        f"model: {out}",
        f"algorithm: {Algorithm.AE_PRC_RF.value if cfg.ae else Algorithm.PRC_RF.value}",
        f"training rows: {d.n_rows}",
        f"features: {d.n_features} ({params.tree_params.n_features_per_split} per split)",
    ]
    if cfg.ae:
        lines.append(f"flagged rows: {len(flagged)} (threshold {autoencoder.threshold:.6g})")
    lines.append(f"trees: {len(forest.trees)}")
    for j, tree in enumerate(forest.trees):
        lines.append(f"  tree {j}: {tree.n_leaves} leaves, depth {tree_depth(tree)}")
    ranked = sorted(feature_importance(forest).items(), key=lambda kv: (-kv[1], kv[0]))
    lines.append("top features: " + ", ".join(f"{name} {w:.3f}" for name, w in ranked[:5]))
    print("\n".join(lines))
    return EXIT_OK


def cmd_predict(cfg: Settings) -> int:
    forest, _ = ModelRepository(_require(cfg.model, "--model")).load()
    names, X = load_features(_require(cfg.data, "--data"), delimiter=cfg.delimiter, drop_column=cfg.target)
    check_feature_names(forest, names)
    labels, fractions = predict_forest_batch(forest, X)

    d = cfg.delimiter
    text = f"row{d}label{d}vote_fraction\n" + "".join(
        f"{i}{d}{int(label):+d}{d}{float(fraction):.10g}\n" for i, (label, fraction) in enumerate(zip(labels, fractions))
    )
    if cfg.out:
        write_text_atomic(cfg.out, text)
        logger.info(f"Wrote {len(labels)} predictions to {cfg.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_filter(cfg: Settings) -> int:
    out = Path(_require(cfg.out, "--out"))
    d = _load(cfg)
    cleaned, model, flagged = autoencoder_filter(d, cfg.ae_config())
    flagged_path = out.with_name(out.name + ".flagged")
    kept = sorted(set(range(d.n_rows)) - set(flagged))

    write_rows(cfg.data, kept, out, delimiter=cfg.delimiter)
    try:
        write_text_atomic(flagged_path, "".join(f"{i}\n" for i in flagged))
    except OSError:
        out.unlink(missing_ok=True)
        raise
    print(
        f"flagged {len(flagged)} of {d.n_rows} rows (threshold {model.threshold:.6g}); "
        f"kept {cleaned.n_rows} rows in {out}, flagged indices in {flagged_path}"
    )
    return EXIT_OK


def cmd_benchmark(cfg: Settings) -> int:
    d = _load(cfg)
    report = run_benchmark(
        d,
        cfg.algorithms,
        cfg.repetitions,
        cfg.split_spec(),
        cfg.ae_config(),
        cfg.forest_params(d.n_features),
        n_threads=cfg.threads,
        quantiles=cfg.ae_quantiles,
    )
    service = ReportingService(report)
    if cfg.out:
        service.write(cfg.out)
    print(service.render_table(), end="")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Settings], int]] = {
    "inspect": cmd_inspect,
    "train": cmd_train,
    "predict": cmd_predict,
    "filter": cmd_filter,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _settings_from_args(args)
        logging.basicConfig(level=cfg.log_level.upper(), format=cfg.log_format, force=True)
    except (ValidationError, ValueError, OSError) as e:
        print(f"prcrf: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](cfg)
    except (DatasetError, TrainingError, BenchmarkError, ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"prcrf {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILURE
