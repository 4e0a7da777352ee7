"""
End-to-end desk run: synthetic data -> search -> decode -> train -> eval -> cost.

Usage:
  python scripts/desk_pipeline.py --out runs/desk
  python scripts/desk_pipeline.py --out runs/desk --search-epochs 2 --iters 200
"""

import argparse
import json
import os
import sys
from pathlib import Path


def _bootstrap():
    project_root = Path(__file__).resolve().parents[1]
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))


def run_pipeline(out: str, seed: int, search_epochs=None, iters=None, profile: str = 'desk') -> dict:
    from dataclasses import replace

    from core.config import load_run_config
    from core.log import log_stage
    from cost.profiler import report
    from data.dataset import load_dataset, write_dataset
    from data.synth import fit_linear_pixel_classifier, synth_generate
    from derived.metrics import evaluate_miou
    from derived.trainer import train_derived
    from models.network_spec import DerivedNetworkSpec
    from search.decoder import decode, emit_genotype
    from search.engine import run_search

    data_root = os.path.join(out, 'data')
    overrides = {'DATASET_ROOT': data_root, 'SEED': seed}
    if search_epochs:
        overrides.update(EPOCHS=search_epochs, ARCH_START_EPOCH=search_epochs // 2)
    run = load_run_config(profile=profile, overrides=overrides)
    train_config = run.train
    if iters:
        # profile warmup may exceed a short run
        train_config = replace(run.train, total_iters=iters, eval_interval=min(run.train.eval_interval, iters),
                               warmup_iters=min(run.train.warmup_iters, iters // 10))

    with log_stage('desk_pipeline', out=out):
        train_samples = synth_generate(200, 64, run.dataset.num_classes, seed=seed)
        write_dataset(train_samples, data_root, run.dataset.train_split)
        write_dataset(synth_generate(50, 64, run.dataset.num_classes, seed=seed + 1), data_root,
                      run.dataset.val_split)
        _, separability = fit_linear_pixel_classifier(train_samples, run.dataset.num_classes)

        result = run_search(load_dataset(run.dataset), run.search, run.search_run,
                            out_dir=os.path.join(out, 'search'), ignore_index=run.dataset.ignore_index)
        cell, path = decode(result.alpha, result.beta)
        emit_genotype(cell, path, run.search, os.path.join(out, 'genotype'))

        spec = DerivedNetworkSpec(cell=cell, path=path, filter_multiplier=run.network.filter_multiplier,
                                  dim=run.network.dim, num_classes=run.dataset.num_classes,
                                  aggregation=run.network.aggregation, aspp_rates=run.network.aspp_rates)
        val_set = load_dataset(run.dataset, run.dataset.val_split)
        trained = train_derived(spec, load_dataset(run.dataset), val_set, train_config,
                                out_dir=os.path.join(out, 'train'), ignore_index=run.dataset.ignore_index)
        final = evaluate_miou(trained.network, val_set, spec.num_classes, run.dataset.ignore_index)
        cost = report(spec)

    return {
        'separability_miou': separability,
        'path': list(path.path),
        'cell': cell.to_list(),
        'miou': final.miou,
        'per_class': final.per_class,
        'cost': cost.to_dict()['table'],
    }


def main():
    parser = argparse.ArgumentParser(description="Run the desk-scale search/train pipeline on synthetic data.")
    parser.add_argument("--out", default="runs/desk", help="Output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--search-epochs", type=int, default=None, help="Override the search epochs")
    parser.add_argument("--iters", type=int, default=None, help="Override the training iterations")
    parser.add_argument("--profile", default="desk")
    args = parser.parse_args()

    _bootstrap()
    from core.log import setup_logging
    setup_logging(os.environ.get('LOG_LEVEL', 'INFO'))

    summary = run_pipeline(args.out, args.seed, args.search_epochs, args.iters, args.profile)
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
