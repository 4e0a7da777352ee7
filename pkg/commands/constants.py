"""
命令行常量
"""

from core.errors import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE

PROG_NAME = 'autolc'

GENOTYPE_FILE = 'genotype.json'
ARCH_LOGITS_FILE = 'arch_logits.json'

# subdirectories of the output root used when --out is not given
SEARCH_SUBDIR = 'search'
DECODE_SUBDIR = 'genotype'
TRAIN_SUBDIR = 'train'
SYNTH_SUBDIR = 'synthetic'

DEFAULT_SYNTH_TRAIN = 200
DEFAULT_SYNTH_VAL = 50
DEFAULT_SYNTH_SIZE = 64

__all__ = [
    'EXIT_OK', 'EXIT_USAGE', 'EXIT_DATA', 'EXIT_NUMERICAL', 'PROG_NAME',
    'GENOTYPE_FILE', 'ARCH_LOGITS_FILE',
    'SEARCH_SUBDIR', 'DECODE_SUBDIR', 'TRAIN_SUBDIR', 'SYNTH_SUBDIR',
    'DEFAULT_SYNTH_TRAIN', 'DEFAULT_SYNTH_VAL', 'DEFAULT_SYNTH_SIZE',
]
