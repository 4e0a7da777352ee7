"""
Desk-scale sensitivity of a fixed genotype to the encoder multiplier F and
the decoder width dim: trains one network per grid cell and reports mIoU
next to its cost.

Usage:
  python scripts/run_sensitivity_grid.py --genotype runs/desk/genotype/genotype.json \
      --dataset-root runs/desk/data --f 4 8 --dim 16 32 --iters 500
"""

import argparse
import csv
import os
import sys
from pathlib import Path

COLUMNS = ('F', 'dim', 'miou', 'params', 'flops', 'memory_bytes', 'mem_rw_bytes')


def _bootstrap():
    project_root = Path(__file__).resolve().parents[1]
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))


def run_grid(genotype_file, dataset_root, multipliers, dims, iters, out, seed=0, input_size=1024):
    from dataclasses import replace

    from core.config import load_run_config
    from cost.profiler import report
    from data.dataset import load_dataset
    from derived.trainer import train_derived
    from models.network_spec import DerivedNetworkSpec
    from search.decoder import load_genotype

    run = load_run_config(profile='desk', overrides={'DATASET_ROOT': dataset_root, 'SEED': seed})
    train_config = replace(run.train, total_iters=iters, eval_interval=iters,
                           warmup_iters=min(run.train.warmup_iters, iters // 10))
    cell, path, _ = load_genotype(genotype_file, allow_null=True)
    train_set = load_dataset(run.dataset)
    val_set = load_dataset(run.dataset, run.dataset.val_split)

    rows = []
    for multiplier in multipliers:
        for dim in dims:
            spec = DerivedNetworkSpec(cell=cell, path=path, filter_multiplier=multiplier, dim=dim,
                                      num_classes=run.dataset.num_classes, aggregation=run.network.aggregation,
                                      aspp_rates=run.network.aspp_rates)
            result = train_derived(spec, train_set, val_set, train_config,
                                   out_dir=os.path.join(out, f'F{multiplier}_dim{dim}'),
                                   ignore_index=run.dataset.ignore_index)
            cost = report(spec, (input_size, input_size))
            row = {'F': multiplier, 'dim': dim, 'miou': result.final.miou, **cost.totals()}
            rows.append(row)
            print(f"F={multiplier:>3} dim={dim:>4} mIoU={row['miou']:.4f} "
                  f"params={cost.params / 1e6:.3f}M flops={cost.flops / 1e9:.2f}G")

    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, 'grid.csv'), 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=COLUMNS, extrasaction='ignore')
        writer.writeheader()
        writer.writerows(rows)
    return rows


def main():
    parser = argparse.ArgumentParser(description="F x dim sensitivity grid at desk scale.")
    parser.add_argument("--genotype", required=True, help="genotype.json from decode")
    parser.add_argument("--dataset-root", required=True)
    parser.add_argument("--f", type=int, nargs="+", default=[2, 4, 8], help="Encoder multipliers")
    parser.add_argument("--dim", type=int, nargs="+", default=[16, 32, 64], help="Decoder widths")
    parser.add_argument("--iters", type=int, default=500)
    parser.add_argument("--input-size", type=int, default=1024, help="Square input for the cost report")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/sensitivity")
    args = parser.parse_args()

    _bootstrap()
    from core.log import setup_logging
    setup_logging(os.environ.get('LOG_LEVEL', 'WARNING'))

    run_grid(args.genotype, args.dataset_root, args.f, args.dim, args.iters, args.out, args.seed, args.input_size)
    print(f"grid written to {os.path.join(args.out, 'grid.csv')}")


if __name__ == "__main__":
    main()
