"""
训练与评估命令
"""

import os

import click

from data.dataset import load_dataset
from data.transforms import half_scale
from derived.metrics import evaluate_miou
from derived.trainer import METRICS_FILE, SPEC_FILE, WEIGHTS_PATH, load_trained, train_derived
from models.network_spec import DerivedNetworkSpec
from search.decoder import load_genotype
from .base import CommandResponse
from .constants import TRAIN_SUBDIR
from .shared import config_option, format_table, genotype_path, json_option, load_config, output_dir, seed_option


def build_spec(genotype_file: str, run, allow_null: bool = False) -> DerivedNetworkSpec:
    cell, path, _ = load_genotype(genotype_file, allow_null=allow_null)
    return DerivedNetworkSpec(
        cell=cell,
        path=path,
        filter_multiplier=run.network.filter_multiplier,
        dim=run.network.dim,
        num_classes=run.dataset.num_classes,
        aggregation=run.network.aggregation,
        aspp_rates=run.network.aspp_rates,
    )


@click.command('train')
@click.option('--genotype', 'genotype_file', type=click.Path(dir_okay=False), help='genotype.json from decode.')
@config_option
@click.option('--dataset-root', type=click.Path(file_okay=False))
@click.option('--out', type=click.Path(file_okay=False), help='Directory for model/, metrics.csv and the spec.')
@click.option('--iters', type=int, help='Total training iterations.')
@click.option('--dim', type=int, help='Decoder pyramid width.')
@click.option('--filter-multiplier', type=int, help='Encoder channel multiplier F.')
@click.option('--aggregation', type=click.Choice(['concat', 'add']))
@click.option('--allow-null', is_flag=True, help='Accept Null operators in the genotype.')
@seed_option
@json_option
@click.pass_obj
def train_command(obj, genotype_file, config_file, dataset_root, out, iters, dim, filter_multiplier, aggregation,
                  allow_null, seed, as_json):
    """Train the derived network from a genotype."""
    run = load_config(config_file, obj.get('profile'), DATASET_ROOT=dataset_root, TOTAL_ITERS=iters, DIM=dim,
                      NETWORK_FILTER_MULTIPLIER=filter_multiplier, AGGREGATION=aggregation, SEED=seed)
    spec = build_spec(genotype_path(genotype_file), run, allow_null)
    train_set = load_dataset(run.dataset, run.dataset.train_split)
    val_root = os.path.join(run.dataset.root, run.dataset.val_split)
    val_set = load_dataset(run.dataset, run.dataset.val_split) if os.path.isdir(val_root) else None
    out = output_dir(out, TRAIN_SUBDIR)
    result = train_derived(spec, train_set, val_set, run.train, out_dir=out, ignore_index=run.dataset.ignore_index)

    miou = result.final.miou if result.final else None
    text = f"Training finished: {run.train.total_iters} iterations, model in {out}"
    if miou is not None:
        text += f"\n  validation mIoU = {miou:.4f}"
    CommandResponse.success(
        data={
            'out_dir': out,
            'weights': os.path.join(out, WEIGHTS_PATH),
            'spec': os.path.join(out, SPEC_FILE),
            'metrics': os.path.join(out, METRICS_FILE),
            'miou': miou,
            'per_class': result.final.per_class if result.final else None,
        },
        message='Training finished',
    ).echo(as_json, text)


@click.command('eval')
@click.option('--model', 'model_dir', required=True, type=click.Path(file_okay=False),
              help='Training output directory.')
@config_option
@click.option('--dataset-root', type=click.Path(file_okay=False))
@click.option('--split', help='Split to evaluate (defaults to the validation split).')
@click.option('--half-scale/--full-scale', 'scale', default=None, help='Half-scale images before prediction.')
@json_option
@click.pass_obj
def eval_command(obj, model_dir, config_file, dataset_root, split, scale, as_json):
    """Per-class IoU and mIoU of a trained model."""
    run = load_config(config_file, obj.get('profile'), DATASET_ROOT=dataset_root)
    network = load_trained(model_dir)
    dataset = load_dataset(run.dataset, split or run.dataset.val_split)
    scale = run.train.half_scale if scale is None else scale
    result = evaluate_miou(network, dataset, network.spec.num_classes, run.dataset.ignore_index,
                           transform=half_scale if scale else None)
    rows = [(c, '-' if v is None else f'{v:.4f}') for c, v in enumerate(result.per_class)]
    text = format_table(rows, ('class', 'IoU')) + f"\nmIoU = {result.miou:.4f}"
    CommandResponse.success(data=result.to_dict(), message=f'mIoU {result.miou:.4f}').echo(as_json, text)
