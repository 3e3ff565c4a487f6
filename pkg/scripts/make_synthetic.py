"""Generate synthetic interaction logs as TSV files.

Two generators are available:

* ``blocks`` — static planted user/item block structure, suitable for
  checking that pre-training recovers co-preference clusters.
* ``drift`` — rotating block affinities with within-day recency signal,
  suitable for exercising the full dynamic pipeline.

Example:
    python3 scripts/make_synthetic.py drift --seed 1 --out drift.tsv
"""
from __future__ import annotations

import argparse
import sys

from dynrec.synthetic import drift_series, planted_blocks, write_tsv


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)

    blocks = sub.add_parser("blocks", help="static planted block structure")
    blocks.add_argument("--users", type=int, default=200)
    blocks.add_argument("--items", type=int, default=200)
    blocks.add_argument("--blocks", type=int, default=8)
    blocks.add_argument("--per-user", type=int, default=10)
    blocks.add_argument("--seed", type=int, default=0)
    blocks.add_argument("--out", required=True)

    drift = sub.add_parser("drift", help="rotating affinities with recency signal")
    drift.add_argument("--blocks", type=int, default=8)
    drift.add_argument("--users-per-block", type=int, default=50)
    drift.add_argument("--items-per-block", type=int, default=25)
    drift.add_argument("--pretrain-days", type=int, default=6)
    drift.add_argument("--snapshot-days", type=int, default=6)
    drift.add_argument("--stale-per-day", type=int, default=3)
    drift.add_argument("--lead-per-day", type=int, default=1)
    drift.add_argument("--seed", type=int, default=0)
    drift.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    if args.kind == "blocks":
        log = planted_blocks(
            n_users=args.users,
            n_items=args.items,
            n_blocks=args.blocks,
            per_user=args.per_user,
            seed=args.seed,
        )
    else:
        log = drift_series(
            n_blocks=args.blocks,
            users_per_block=args.users_per_block,
            items_per_block=args.items_per_block,
            pretrain_days=args.pretrain_days,
            snapshot_days=args.snapshot_days,
            stale_per_day=args.stale_per_day,
            lead_per_day=args.lead_per_day,
            seed=args.seed,
        )
    write_tsv(args.out, log)
    print(f"wrote {len(log)} interactions to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
