#!/usr/bin/env python3
"""
Run the repeated-split benchmark on every dataset in config/benchmark_config.yaml
"""

import logging
import os
import sys
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import yaml

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from prcrf.config import Settings
from prcrf.data import Dataset, load_csv, summarize, write_text_atomic
from prcrf.errors import BenchmarkError, DatasetError
from prcrf.models import BenchmarkReport
from prcrf.pipeline import run_benchmark
from prcrf.reports import ReportingService

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

PREPARED_TARGET = "target"


def load_config() -> Dict[str, Any]:
    """Load benchmark configuration from YAML file."""
    config_path = os.path.join(ROOT, 'config', 'benchmark_config.yaml')
    with open(config_path, 'r') as f:
        return yaml.safe_load(f)


def binarise_target(values: pd.Series, entry: Dict[str, Any]) -> pd.Series:
    """True for positive rows: a numeric cutoff (inclusive) or an exact label."""
    if 'positive_at_or_below' in entry:
        return values.astype(float) <= float(entry['positive_at_or_below'])
    return values.astype(str).str.strip() == str(entry['positive_label'])


def prepare_dataset(name: str, entry: Dict[str, Any], prepared_dir: str) -> Dataset:
    """Drop bookkeeping columns, binarise the target and load the result."""
    path = os.path.join(ROOT, entry['path'])
    frame = pd.read_csv(path)
    frame = frame.drop(columns=entry.get('drop_columns', []))
    target = entry['target']
    if target not in frame.columns:
        raise DatasetError(f"{path}: target column '{target}' not found")

    positive = binarise_target(frame[target], entry)
    frame = frame.drop(columns=[target])
    frame[PREPARED_TARGET] = np.where(positive, 1, 0)

    prepared = os.path.join(ROOT, prepared_dir, f"{name}.csv")
    write_text_atomic(prepared, frame.to_csv(index=False, lineterminator="\n"))
    return load_csv(prepared, PREPARED_TARGET, "1", name=name)


def check_expected(d: Dataset, expected: Dict[str, int]) -> List[str]:
    summary = summarize(d)
    problems = []
    if expected.get('observations') not in (None, summary.n_observations):
        problems.append(f"{summary.n_observations} observations, expected {expected['observations']}")
    if expected.get('features') not in (None, summary.n_features):
        problems.append(f"{summary.n_features} features, expected {expected['features']}")
    return problems


def check_bands(report: BenchmarkReport, bands: Dict[str, Dict[str, float]]) -> List[str]:
    problems = []
    for algorithm, floors in bands.items():
        means = report.means.get(algorithm)
        if means is None:
            problems.append(f"{algorithm} was not benchmarked")
            continue
        for metric, floor in floors.items():
            value = getattr(means, metric)
            if value < floor:
                problems.append(f"{algorithm} mean {metric} {value:.4f} below {floor}")
    return problems


def run_dataset(name: str, entry: Dict[str, Any], cfg: Settings, output: Dict[str, str]) -> List[str]:
    """Benchmark one dataset; returns the list of failed checks."""
    logger.info(f"Preparing {name}...")
    d = prepare_dataset(name, entry, output.get('prepared_dir', 'data/prepared'))
    problems = check_expected(d, entry.get('expected', {}))

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
    service.write(os.path.join(ROOT, output.get('reports_dir', 'reports'), name))
    logger.info("\n" + service.render_table())
    return problems + check_bands(report, entry.get('bands', {}))


def main() -> int:
    """Main function to run all benchmarks."""
    logger.info("=" * 60)
    logger.info("Starting PRC-RF benchmarks")
    logger.info("=" * 60)

    config = load_config()
    cfg = Settings(**config.get('benchmark', {}))
    output = config.get('output', {})

    failures: Dict[str, List[str]] = {}
    for name, entry in config['datasets'].items():
        if not entry.get('enabled', False):
            logger.info(f"{name} is disabled in configuration")
            continue
        if not os.path.exists(os.path.join(ROOT, entry['path'])):
            logger.warning(f"{name}: data file {entry['path']} not found, skipping")
            continue
        try:
            problems = run_dataset(name, entry, cfg, output)
        except (DatasetError, BenchmarkError) as e:
            logger.error(f"{name} failed: {e}")
            problems = [str(e)]
        if problems:
            failures[name] = problems

    # Summary
    logger.info("=" * 60)
    logger.info("BENCHMARK SUMMARY")
    logger.info("=" * 60)
    for name, problems in failures.items():
        for problem in problems:
            logger.error(f"{name}: {problem}")
    if not failures:
        logger.info("All checks passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
