#!/usr/bin/env python3
"""
Write the cluster-plus-outliers dataset used to check autoencoder filtering.

The outlier row indices go to <out>.outliers, one per line.
"""

import argparse
import logging
import os
import sys

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from prcrf.data import make_cluster_with_outliers, write_csv, write_text_atomic

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main() -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic outlier dataset")
    parser.add_argument("--out", default="data/synthetic_cluster.csv", help="output CSV path")
    parser.add_argument("--inliers", type=int, default=950, help="rows in the tight cluster")
    parser.add_argument("--outliers", type=int, default=50, help="far rows")
    parser.add_argument("--features", type=int, default=8, help="feature columns")
    parser.add_argument("--seed", type=int, default=0, help="generator seed")
    args = parser.parse_args()

    d, outliers = make_cluster_with_outliers(
        n_inliers=args.inliers,
        n_outliers=args.outliers,
        n_features=args.features,
        seed=args.seed,
    )
    write_csv(d, args.out, target_column="target")
    write_text_atomic(args.out + ".outliers", "".join(f"{i}\n" for i in outliers))
    logger.info(f"Wrote {d.n_rows} rows ({len(outliers)} outliers) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
