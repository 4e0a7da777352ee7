"""
命令共享工具
"""

import os
from typing import Any, Dict, Optional

import click

from core.config import Config, RunConfig, load_run_config
from .constants import DECODE_SUBDIR, GENOTYPE_FILE


def _remember_json(ctx, param, value):
    # the group reads this when it reports a failure
    obj = ctx.find_object(dict)
    if obj is not None:
        obj['json'] = value
    return value


def json_option(func):
    return click.option('--json', 'as_json', is_flag=True, callback=_remember_json,
                        help='Print the JSON response envelope.')(func)


def config_option(func):
    return click.option('--config', 'config_file', type=click.Path(dir_okay=False),
                        help='KEY=VALUE run configuration file.')(func)


def seed_option(func):
    return click.option('--seed', type=int, default=None, help='Random seed (overrides the config).')(func)


def load_config(config_file: Optional[str], profile: Optional[str], **overrides: Any) -> RunConfig:
    """Profile < run file < non-None command-line values."""
    return load_run_config(config_file, profile, {k: v for k, v in overrides.items() if v is not None})


def output_dir(out: Optional[str], subdir: str) -> str:
    path = out or os.path.join(Config.OUTPUT_DIR, subdir)
    os.makedirs(path, exist_ok=True)
    return path


def genotype_path(path: Optional[str]) -> str:
    return path or os.path.join(Config.OUTPUT_DIR, DECODE_SUBDIR, GENOTYPE_FILE)


def format_table(rows, headers) -> str:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    lines = ['  '.join(str(h).rjust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append('  '.join(str(v).rjust(w) for v, w in zip(row, widths)))
    return '\n'.join(lines)


def path_summary(files: Dict[str, str]) -> str:
    return '\n'.join(f'  {name}: {path}' for name, path in files.items())
