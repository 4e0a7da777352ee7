"""
运行配置

Profiles hold flat KEY=VALUE defaults. A run file (read with python-dotenv)
overrides the profile, CLI flags override the run file, and each section is
validated by its marshmallow schema into a frozen dataclass.
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from core.errors import ConfigError

logger = logging.getLogger(__name__)


def load_env_files():
    """
    加载环境变量文件：
    1. ENV_FILE 环境变量指定的 .env 文件
    2. 项目根目录的 .env (覆盖旧值)
    3. 都不存在时使用默认配置
    """
    project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

    env_file_path = os.environ.get('ENV_FILE')
    if env_file_path:
        if os.path.exists(env_file_path):
            logger.info(f"[ENV_LOADED] file={env_file_path}")
            load_dotenv(env_file_path)
            return env_file_path
        logger.warning(f"[ENV_MISSING] file={env_file_path}")

    root_env = os.path.join(project_root, '.env')
    if os.path.exists(root_env):
        logger.info(f"[ENV_LOADED] file={root_env}")
        load_dotenv(root_env, override=True)
        return root_env
    return None


# 加载环境变量
loaded_env_file = load_env_files()


# flat run-file key -> [(section, field)]
KEY_MAP = {
    'LAYERS': [('search', 'layers')],
    'BLOCKS': [('search', 'blocks')],
    'FILTER_MULTIPLIER': [('search', 'filter_multiplier')],
    'NUM_CLASSES': [('search', 'num_classes'), ('dataset', 'num_classes')],
    'RESOLUTIONS': [('search', 'resolutions')],
    'EPOCHS': [('search_run', 'epochs')],
    'ARCH_START_EPOCH': [('search_run', 'arch_start_epoch')],
    'W_LR_INITIAL': [('search_run', 'w_lr_initial')],
    'W_LR_FINAL': [('search_run', 'w_lr_final')],
    'W_MOMENTUM': [('search_run', 'w_momentum')],
    'W_WEIGHT_DECAY': [('search_run', 'w_weight_decay')],
    'ARCH_LR': [('search_run', 'arch_lr')],
    'ARCH_WEIGHT_DECAY': [('search_run', 'arch_weight_decay')],
    'ARCH_BETA1': [('search_run', 'arch_beta1')],
    'ARCH_BETA2': [('search_run', 'arch_beta2')],
    'SEARCH_BATCH_SIZE': [('search_run', 'batch_size')],
    'SEARCH_CROP': [('search_run', 'crop'), ('dataset', 'crop')],
    'SEARCH_HALF_SCALE': [('search_run', 'half_scale'), ('dataset', 'half_scale')],
    'SEED': [('search_run', 'seed'), ('train', 'seed')],
    'PREFETCH': [('search_run', 'prefetch'), ('train', 'prefetch')],
    'LR_INITIAL': [('train', 'lr_initial')],
    'LR_POWER': [('train', 'lr_power')],
    'WARMUP_ITERS': [('train', 'warmup_iters')],
    'TOTAL_ITERS': [('train', 'total_iters')],
    'TRAIN_BATCH_SIZE': [('train', 'batch_size')],
    'TRAIN_CROP': [('train', 'crop')],
    'TRAIN_HALF_SCALE': [('train', 'half_scale')],
    'MOMENTUM': [('train', 'momentum')],
    'WEIGHT_DECAY': [('train', 'weight_decay')],
    'EVAL_INTERVAL': [('train', 'eval_interval')],
    'LOG_INTERVAL': [('train', 'log_interval')],
    'DATASET_ROOT': [('dataset', 'root')],
    'TRAIN_SPLIT': [('dataset', 'train_split')],
    'VAL_SPLIT': [('dataset', 'val_split')],
    'IGNORE_INDEX': [('dataset', 'ignore_index')],
    'VALIDATE_LABELS': [('dataset', 'validate_labels')],
    'NETWORK_FILTER_MULTIPLIER': [('network', 'filter_multiplier')],
    'DIM': [('network', 'dim')],
    'AGGREGATION': [('network', 'aggregation')],
    'ASPP_RATES': [('network', 'aspp_rates')],
}

LIST_KEYS = {'RESOLUTIONS', 'ASPP_RATES'}


class Config:
    """基础配置类"""

    OUTPUT_DIR = os.environ.get('AUTOLC_OUTPUT_DIR') or 'runs'
    LOG_LEVEL = os.environ.get('LOG_LEVEL') or 'INFO'
    LOG_FILE = os.environ.get('LOG_FILE') or None

    @classmethod
    def run_defaults(cls) -> Dict[str, Any]:
        """Uppercase class attributes that are run-file keys."""
        values = {}
        for klass in reversed(cls.__mro__):
            for key, value in vars(klass).items():
                if key in KEY_MAP:
                    values[key] = value
        return values


class PaperConfig(Config):
    """Published search and training setup"""
    LAYERS = 10
    BLOCKS = 5
    FILTER_MULTIPLIER = 8
    NUM_CLASSES = 7
    EPOCHS = 60
    ARCH_START_EPOCH = 30
    SEARCH_BATCH_SIZE = 2
    SEARCH_CROP = 321
    SEARCH_HALF_SCALE = True
    TOTAL_ITERS = 95000
    WARMUP_ITERS = 5000
    TRAIN_BATCH_SIZE = 8
    TRAIN_CROP = 521
    LR_INITIAL = 0.05
    NETWORK_FILTER_MULTIPLIER = 10
    DIM = 128
    DATASET_ROOT = os.environ.get('AUTOLC_DATASET_ROOT') or None


class DeskConfig(Config):
    """Laptop-scale setup on 64x64 synthetic images"""
    LAYERS = 6
    BLOCKS = 3
    FILTER_MULTIPLIER = 4
    NUM_CLASSES = 3
    EPOCHS = 8
    ARCH_START_EPOCH = 4
    SEARCH_BATCH_SIZE = 4
    SEARCH_CROP = 64
    SEARCH_HALF_SCALE = False
    TOTAL_ITERS = 2000
    WARMUP_ITERS = 100
    TRAIN_BATCH_SIZE = 4
    TRAIN_CROP = 64
    EVAL_INTERVAL = 500
    LOG_INTERVAL = 50
    NETWORK_FILTER_MULTIPLIER = 4
    DIM = 32
    DATASET_ROOT = os.environ.get('AUTOLC_DATASET_ROOT') or None


class TestingConfig(Config):
    """测试环境配置"""
    __test__ = False

    LAYERS = 3
    BLOCKS = 2
    FILTER_MULTIPLIER = 2
    NUM_CLASSES = 3
    RESOLUTIONS = '4,8,16'
    EPOCHS = 2
    ARCH_START_EPOCH = 1
    SEARCH_BATCH_SIZE = 2
    SEARCH_CROP = 32
    SEARCH_HALF_SCALE = False
    TOTAL_ITERS = 4
    WARMUP_ITERS = 1
    TRAIN_BATCH_SIZE = 2
    TRAIN_CROP = 32
    EVAL_INTERVAL = 2
    LOG_INTERVAL = 1
    NETWORK_FILTER_MULTIPLIER = 2
    DIM = 8


# 配置映射
config = {
    'paper': PaperConfig,
    'desk': DeskConfig,
    'testing': TestingConfig,
    'default': PaperConfig,
}


@dataclass(frozen=True)
class RunConfig:
    """All validated sections of one run"""
    profile: str
    search: Any
    search_run: Any
    train: Any
    dataset: Any
    network: Any
    source_file: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'profile': self.profile,
            'source_file': self.source_file,
            'search': self.search.to_dict(),
            'search_run': self.search_run.to_dict(),
            'train': self.train.to_dict(),
            'dataset': self.dataset.to_dict(),
            'network': self.network.to_dict(),
        }


def get_profile(name: Optional[str] = None):
    name = (name or os.environ.get('AUTOLC_PROFILE') or 'default').lower()
    if name not in config:
        raise ConfigError(f"Unknown profile: {name}", details={'allowed': sorted(config)})
    return name, config[name]


def read_run_file(path: str) -> Dict[str, str]:
    """KEY=VALUE file, keys case-insensitive; unknown keys are an error."""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}", details={'path': path})
    values = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().upper()
        if name not in KEY_MAP:
            raise ConfigError(f"Unknown config key '{key}' in {path}", details={'key': key})
        values[name] = value
    return values


def _coerce(key: str, value):
    if key in LIST_KEYS and isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    if key in LIST_KEYS:
        return list(value)
    if key == 'DATASET_ROOT' and value == '':
        return None
    return value


def load_run_config(config_file: Optional[str] = None,
                    profile: Optional[str] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Precedence: profile defaults < run file < overrides.

    Args:
        config_file: optional KEY=VALUE run file
        profile: profile name, falls back to AUTOLC_PROFILE then 'default'
        overrides: flat keys from command-line flags; None values are ignored
    """
    from models.schemas import SECTION_SCHEMAS

    name, profile_cls = get_profile(profile)
    values = dict(profile_cls.run_defaults())
    if config_file:
        values.update(read_run_file(config_file))
    for key, value in (overrides or {}).items():
        key = key.upper()
        if key not in KEY_MAP:
            raise ConfigError(f"Unknown config key '{key}'", details={'key': key})
        if value is not None:
            values[key] = value

    sections: Dict[str, Dict[str, Any]] = {section: {} for section in SECTION_SCHEMAS}
    for key, value in values.items():
        for section, field_name in KEY_MAP[key]:
            sections[section][field_name] = _coerce(key, value)

    loaded = {section: schema().load(sections[section]) for section, schema in SECTION_SCHEMAS.items()}
    logger.debug(f"[CONFIG_LOADED] profile={name} file={config_file}")
    return RunConfig(profile=name, source_file=config_file, **loaded)
