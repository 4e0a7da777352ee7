"""
效率、合成数据与梯度检查命令
"""

import click

from core.checkpoint import write_json
from core.errors import EXIT_NUMERICAL
from cost.profiler import DEFAULT_INPUT_HW, report
from data.dataset import write_dataset
from data.synth import class_census, fit_linear_pixel_classifier, synth_generate
from derived.gradcheck_suite import GRADCHECK_CASES, run_gradcheck_suite
from derived.trainer import load_spec
from .base import CommandResponse
from .constants import (
    DEFAULT_SYNTH_SIZE, DEFAULT_SYNTH_TRAIN, DEFAULT_SYNTH_VAL, SYNTH_SUBDIR,
)
from .shared import config_option, format_table, genotype_path, json_option, load_config, output_dir, seed_option
from .train import build_spec


@click.command('cost')
@click.option('--genotype', 'genotype_file', type=click.Path(dir_okay=False), help='genotype.json from decode.')
@click.option('--spec', 'spec_file', type=click.Path(dir_okay=False), help='network_spec.json from train.')
@config_option
@click.option('--dim', type=int)
@click.option('--filter-multiplier', type=int)
@click.option('--num-classes', type=int)
@click.option('--input-size', nargs=2, type=int, default=DEFAULT_INPUT_HW, show_default=True,
              help='Input height and width.')
@click.option('--bytes-per-elem', type=int, default=4, show_default=True)
@click.option('--per-layer', is_flag=True, help='Also print the per-layer breakdown.')
@click.option('--out', type=click.Path(dir_okay=False), help='Write the JSON report here.')
@json_option
@click.pass_obj
def cost_command(obj, genotype_file, spec_file, config_file, dim, filter_multiplier, num_classes, input_size,
                 bytes_per_elem, per_layer, out, as_json):
    """Params, FLOPs, MAdd, Memory and MemR+W of a derived network."""
    if spec_file:
        spec = load_spec(spec_file)
    else:
        run = load_config(config_file, obj.get('profile'), DIM=dim, NETWORK_FILTER_MULTIPLIER=filter_multiplier,
                          NUM_CLASSES=num_classes)
        spec = build_spec(genotype_path(genotype_file), run, allow_null=True)
    result = report(spec, tuple(input_size), bytes_per_elem)
    document = result.to_dict()
    if out:
        write_json(out, document)

    text = result.to_table()
    if per_layer:
        rows = [(item.name, item.params, item.flops, item.memory_bytes, item.mem_rw_bytes)
                for item in result.per_layer]
        text += '\n\n' + format_table(rows, ('layer', 'params', 'flops', 'memory_B', 'mem_rw_B'))
    CommandResponse.success(data=document, message='Cost report').echo(as_json, text)


@click.command('synth-data')
@click.option('--out', type=click.Path(file_okay=False), help='Dataset root to create.')
@click.option('--num-train', type=int, default=DEFAULT_SYNTH_TRAIN, show_default=True)
@click.option('--num-val', type=int, default=DEFAULT_SYNTH_VAL, show_default=True)
@click.option('--size', type=int, default=DEFAULT_SYNTH_SIZE, show_default=True)
@click.option('--num-classes', type=int, default=3, show_default=True)
@click.option('--train-split', default='Train', show_default=True)
@click.option('--val-split', default='Val', show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@json_option
def synth_data_command(out, num_train, num_val, size, num_classes, train_split, val_split, seed, as_json):
    """Write a synthetic color-separable segmentation dataset."""
    root = output_dir(out, SYNTH_SUBDIR)
    train = synth_generate(num_train, size, num_classes, seed=seed)
    write_dataset(train, root, train_split)
    if num_val > 0:
        # disjoint stream for validation
        write_dataset(synth_generate(num_val, size, num_classes, seed=seed + 1), root, val_split)
    census = class_census(train, num_classes)
    _, separability = fit_linear_pixel_classifier(train, num_classes)

    text = (f"Wrote {num_train} train / {num_val} val samples to {root}\n"
            f"class census: {census.tolist()}\n"
            f"linear pixel classifier mIoU: {separability:.4f}")
    CommandResponse.success(
        data={'root': root, 'splits': {train_split: num_train, val_split: num_val},
              'census': census.tolist(), 'separability_miou': separability},
        message='Synthetic dataset written',
    ).echo(as_json, text)


@click.command('gradcheck')
@click.option('--case', 'cases', multiple=True, type=click.Choice(sorted(GRADCHECK_CASES)),
              help='Run only these cases (repeatable).')
@click.option('--tolerance', type=float, default=1e-4, show_default=True)
@seed_option
@json_option
@click.pass_context
def gradcheck_command(ctx, cases, tolerance, seed, as_json):
    """Finite-difference gradient checks in double precision."""
    results = run_gradcheck_suite(list(cases) or None, seed=seed or 0, tolerance=tolerance)
    failed = [r.name for r in results if not r.passed]
    rows = [(r.name, f'{r.max_error:.2e}', r.num_scalars, 'pass' if r.passed else 'FAIL') for r in results]
    text = format_table(rows, ('case', 'max_rel_error', 'scalars', 'result'))
    response = CommandResponse(
        data={'results': [r.to_dict() for r in results], 'failed': failed},
        message='All gradient checks passed' if not failed else f'{len(failed)} gradient checks failed',
        code=EXIT_NUMERICAL if failed else 0,
    )
    response.echo(as_json, text)
    if failed:
        ctx.exit(EXIT_NUMERICAL)
