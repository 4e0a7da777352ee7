"""
搜索与解码命令
"""

import logging
import os

import click

from core.errors import GenotypeError
from data.dataset import load_dataset
from search.decoder import (
    BRUTE_FORCE_MAX_LAYERS, brute_force_path, decode, emit_genotype, read_arch_logits,
)
from search.engine import HISTORY_FILE, run_search
from .base import CommandResponse
from .constants import ARCH_LOGITS_FILE, DECODE_SUBDIR, SEARCH_SUBDIR
from .shared import config_option, json_option, load_config, output_dir, seed_option

logger = logging.getLogger(__name__)


@click.command('search')
@config_option
@click.option('--dataset-root', type=click.Path(file_okay=False), help='Dataset root with <split>/images_png.')
@click.option('--out', type=click.Path(file_okay=False), help='Output directory for checkpoints and logits.')
@click.option('--epochs', type=int, help='Total search epochs.')
@click.option('--arch-start-epoch', type=int, help='First epoch with architecture updates.')
@click.option('--resume', is_flag=True, help='Continue from the last completed epoch under --out.')
@seed_option
@json_option
@click.pass_obj
def search_command(obj, config_file, dataset_root, out, epochs, arch_start_epoch, resume, seed, as_json):
    """Run the bi-level architecture search."""
    run = load_config(config_file, obj.get('profile'), DATASET_ROOT=dataset_root, EPOCHS=epochs,
                      ARCH_START_EPOCH=arch_start_epoch, SEED=seed)
    dataset = load_dataset(run.dataset)
    out = output_dir(out, SEARCH_SUBDIR)
    result = run_search(dataset, run.search, run.search_run, out_dir=out, resume=resume,
                        ignore_index=run.dataset.ignore_index)
    last = result.history.records[-1] if len(result.history) else None
    response = CommandResponse.success(
        data={
            'out_dir': out,
            'arch_logits': os.path.join(out, ARCH_LOGITS_FILE),
            'history': os.path.join(out, HISTORY_FILE),
            'epochs': len(result.history),
            'final': last.to_dict() if last else None,
        },
        message='Search finished',
    )
    text = f"Search finished: {len(result.history)} epochs, logits in {os.path.join(out, ARCH_LOGITS_FILE)}"
    if last:
        text += f"\n  lossA={last.loss_a:.4f} lossB={last.loss_b:.4f}"
    response.echo(as_json, text)


@click.command('decode')
@click.argument('arch_logits', type=click.Path(dir_okay=False))
@click.option('--out', type=click.Path(file_okay=False), help='Directory for genotype.json and the DOT diagrams.')
@click.option('--allow-null', is_flag=True, help='Let Null compete when picking block operators.')
@click.option('--verify', is_flag=True, help='Cross-check the DP path against exhaustive enumeration.')
@json_option
def decode_command(arch_logits, out, allow_null, verify, as_json):
    """Decode arch_logits.json into a genotype."""
    alpha, beta, epoch = read_arch_logits(arch_logits)
    cell, path = decode(alpha, beta, allow_null=allow_null)
    verified = None
    if verify:
        if beta.config.layers > BRUTE_FORCE_MAX_LAYERS:
            raise GenotypeError(f"--verify supports at most {BRUTE_FORCE_MAX_LAYERS} layers",
                                details={'layers': beta.config.layers})
        oracle = brute_force_path(beta.normalized().numpy(), beta.config)
        verified = oracle.path == path.path and abs(oracle.log_prob - path.log_prob) <= 1e-9
        if not verified:
            logger.error(f"[DECODE_MISMATCH] dp={list(path.path)} brute_force={list(oracle.path)}")
            raise GenotypeError("DP path disagrees with exhaustive enumeration",
                                details={'dp': list(path.path), 'brute_force': list(oracle.path)})
    out = output_dir(out, DECODE_SUBDIR)
    files = emit_genotype(cell, path, alpha.config, out)

    lines = [f"path: {' '.join(str(s) for s in path.path)}  (log p = {path.log_prob:.6f})"]
    for number, block in enumerate(cell.blocks, start=1):
        lines.append(f"block {number}: in{block.input1} {block.op1.value} + in{block.input2} {block.op2.value}")
    if verified:
        lines.append('verify: DP path matches exhaustive enumeration')
    lines.extend(f'{name}: {target}' for name, target in files.items())
    CommandResponse.success(
        data={'cell': cell.to_list(), 'path': path.to_list(), 'log_prob': path.log_prob,
              'epoch': epoch, 'verified': verified, 'files': files},
        message='Genotype decoded',
    ).echo(as_json, '\n'.join(lines))
