"""
marshmallow 序列化模式

Each section schema validates flat values and builds the frozen dataclass
in ``post_load``. File schemas (genotype, arch logits, network spec) check
the documented JSON layouts.
"""

from marshmallow import Schema, ValidationError, fields, post_load, validate, validates_schema, EXCLUDE

from core.errors import ConfigError, GenotypeError
from .configs import (
    DEFAULT_RESOLUTIONS, DatasetConfig, NetworkConfig, SearchConfig, SearchRunConfig, TrainConfig,
)
from .genotype import OPERATORS, CellGenotype, PathGenotype
from .network_spec import DerivedNetworkSpec

_POSITIVE = validate.Range(min=1)
_OPERATOR_NAMES = [op.value for op in OPERATORS]


class _ConfigSchema(Schema):
    """Raises ConfigError instead of ValidationError."""

    class Meta:
        unknown = EXCLUDE

    def handle_error(self, error, data, **kwargs):
        raise ConfigError(
            f"Invalid {self.__class__.__name__.replace('Schema', '')} configuration",
            details=error.messages,
        )


class SearchConfigSchema(_ConfigSchema):
    layers = fields.Integer(load_default=10, validate=_POSITIVE)
    blocks = fields.Integer(load_default=5, validate=_POSITIVE)
    filter_multiplier = fields.Integer(load_default=8, validate=_POSITIVE)
    num_classes = fields.Integer(load_default=7, validate=_POSITIVE)
    resolutions = fields.List(fields.Integer(), load_default=list(DEFAULT_RESOLUTIONS))

    @post_load
    def make_config(self, data, **kwargs):
        return SearchConfig(**{**data, 'resolutions': tuple(data['resolutions'])})


class SearchRunConfigSchema(_ConfigSchema):
    epochs = fields.Integer(load_default=60, validate=_POSITIVE)
    arch_start_epoch = fields.Integer(load_default=30, validate=validate.Range(min=0))
    w_lr_initial = fields.Float(load_default=0.025)
    w_lr_final = fields.Float(load_default=0.001)
    w_momentum = fields.Float(load_default=0.9, validate=validate.Range(min=0, max=1, max_inclusive=False))
    w_weight_decay = fields.Float(load_default=0.0003, validate=validate.Range(min=0))
    arch_lr = fields.Float(load_default=0.003)
    arch_weight_decay = fields.Float(load_default=0.001, validate=validate.Range(min=0))
    arch_beta1 = fields.Float(load_default=0.9, validate=validate.Range(min=0, max=1, max_inclusive=False))
    arch_beta2 = fields.Float(load_default=0.999, validate=validate.Range(min=0, max=1, max_inclusive=False))
    batch_size = fields.Integer(load_default=2, validate=_POSITIVE)
    crop = fields.Integer(load_default=321, validate=_POSITIVE)
    half_scale = fields.Boolean(load_default=True)
    seed = fields.Integer(load_default=0)
    prefetch = fields.Integer(load_default=0, validate=validate.Range(min=0))

    @post_load
    def make_config(self, data, **kwargs):
        return SearchRunConfig(**data)


class TrainConfigSchema(_ConfigSchema):
    lr_initial = fields.Float(load_default=0.05)
    lr_power = fields.Float(load_default=0.9, validate=validate.Range(min=0, min_inclusive=False))
    warmup_iters = fields.Integer(load_default=5000, validate=validate.Range(min=0))
    total_iters = fields.Integer(load_default=95000, validate=_POSITIVE)
    batch_size = fields.Integer(load_default=8, validate=_POSITIVE)
    crop = fields.Integer(load_default=521, validate=_POSITIVE)
    half_scale = fields.Boolean(load_default=False)
    momentum = fields.Float(load_default=0.9, validate=validate.Range(min=0, max=1, max_inclusive=False))
    weight_decay = fields.Float(load_default=0.0001, validate=validate.Range(min=0))
    eval_interval = fields.Integer(load_default=5000, validate=_POSITIVE)
    log_interval = fields.Integer(load_default=100, validate=_POSITIVE)
    seed = fields.Integer(load_default=0)
    prefetch = fields.Integer(load_default=0, validate=validate.Range(min=0))

    @post_load
    def make_config(self, data, **kwargs):
        return TrainConfig(**data)


class DatasetConfigSchema(_ConfigSchema):
    root = fields.String(load_default=None, allow_none=True)
    train_split = fields.String(load_default='Train')
    val_split = fields.String(load_default='Val')
    num_classes = fields.Integer(load_default=7, validate=_POSITIVE)
    ignore_index = fields.Integer(load_default=255)
    half_scale = fields.Boolean(load_default=True)
    crop = fields.Integer(load_default=321, validate=_POSITIVE)
    validate_labels = fields.Boolean(load_default=True)

    @post_load
    def make_config(self, data, **kwargs):
        return DatasetConfig(**data)


class NetworkConfigSchema(_ConfigSchema):
    filter_multiplier = fields.Integer(load_default=10, validate=_POSITIVE)
    dim = fields.Integer(load_default=128, validate=_POSITIVE)
    aggregation = fields.String(load_default='concat', validate=validate.OneOf(['concat', 'add']))
    aspp_rates = fields.List(fields.Integer(validate=_POSITIVE), load_default=[6, 12, 18])

    @post_load
    def make_config(self, data, **kwargs):
        return NetworkConfig(**{**data, 'aspp_rates': tuple(data['aspp_rates'])})


class _FileSchema(Schema):
    """File documents raise GenotypeError (a data error)."""

    def handle_error(self, error, data, **kwargs):
        raise GenotypeError(f"Malformed {self.__class__.__name__.replace('Schema', '')} document",
                            details=error.messages)


class BlockField(fields.List):
    def __init__(self, **kwargs):
        super().__init__(fields.Raw(), validate=validate.Length(equal=4), **kwargs)

    def _deserialize(self, value, attr, data, **kwargs):
        items = super()._deserialize(value, attr, data, **kwargs)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in items[:2]):
            raise ValidationError("block inputs must be integers")
        if not all(isinstance(v, str) and v in _OPERATOR_NAMES for v in items[2:]):
            raise ValidationError(f"block operators must be one of {_OPERATOR_NAMES}")
        return items


class GenotypeConfigSchema(Schema):
    L = fields.Integer(required=True, validate=_POSITIVE)
    B = fields.Integer(required=True, validate=_POSITIVE)
    F = fields.Integer(required=True, validate=_POSITIVE)
    num_classes = fields.Integer(required=True, validate=_POSITIVE)


class GenotypeSchema(_FileSchema):
    """{"cell": [[in1, in2, "op1", "op2"], ...], "path": [s_1, ...], "config": {L, B, F, num_classes}}"""
    cell = fields.List(BlockField(), required=True, validate=validate.Length(min=1))
    path = fields.List(fields.Integer(validate=validate.OneOf(list(DEFAULT_RESOLUTIONS))),
                       required=True, validate=validate.Length(min=1))
    config = fields.Nested(GenotypeConfigSchema, required=True)
    allow_null = fields.Boolean(load_default=False)

    @validates_schema
    def check_sizes(self, data, **kwargs):
        config = data.get('config') or {}
        if 'cell' in data and config.get('B') not in (None, len(data['cell'])):
            raise ValidationError("config.B does not match the number of blocks", 'cell')
        if 'path' in data and config.get('L') not in (None, len(data['path'])):
            raise ValidationError("config.L does not match the path length", 'path')

    @post_load
    def make_genotype(self, data, **kwargs):
        cell = CellGenotype.from_list(data['cell']).validate(allow_null=data['allow_null'])
        return {'cell': cell, 'path': PathGenotype(tuple(data['path'])), 'config': data['config']}


class ArchLogitsConfigSchema(GenotypeConfigSchema):
    resolutions = fields.List(fields.Integer(), load_default=list(DEFAULT_RESOLUTIONS))


class ArchLogitsSchema(_FileSchema):
    """{"alpha": [[8 floats] x E], "beta": [[[3 floats] x R] x L], "config": {L, B, F, num_classes, resolutions}}"""
    alpha = fields.List(fields.List(fields.Float(allow_nan=False), validate=validate.Length(equal=len(OPERATORS))),
                        required=True)
    beta = fields.List(fields.List(fields.List(fields.Float(allow_nan=False), validate=validate.Length(equal=3))),
                       required=True)
    config = fields.Nested(ArchLogitsConfigSchema, required=True)
    epoch = fields.Integer(load_default=None, allow_none=True)

    @validates_schema(skip_on_field_errors=True)
    def check_shapes(self, data, **kwargs):
        config = data['config']
        blocks = config['B']
        if len(data['alpha']) != blocks * (blocks + 3) // 2:
            raise ValidationError(f"alpha needs {blocks * (blocks + 3) // 2} rows", 'alpha')
        if len(data['beta']) != config['L']:
            raise ValidationError(f"beta needs {config['L']} layers", 'beta')
        if any(len(layer) != len(config['resolutions']) for layer in data['beta']):
            raise ValidationError(f"beta layers need {len(config['resolutions'])} rates", 'beta')

    @post_load
    def make_config(self, data, **kwargs):
        config = data['config']
        try:
            data['config'] = SearchConfig(
                layers=config['L'], blocks=config['B'], filter_multiplier=config['F'],
                num_classes=config['num_classes'], resolutions=tuple(config['resolutions']),
            )
        except ConfigError as e:
            raise GenotypeError(f"Arch logits carry an invalid search config: {e.message}", details=e.details)
        return data


class NetworkSpecSchema(_FileSchema):
    cell = fields.List(BlockField(), required=True, validate=validate.Length(min=1))
    path = fields.List(fields.Integer(validate=validate.OneOf(list(DEFAULT_RESOLUTIONS))), required=True)
    filter_multiplier = fields.Integer(required=True, validate=_POSITIVE)
    dim = fields.Integer(required=True, validate=_POSITIVE)
    num_classes = fields.Integer(required=True, validate=_POSITIVE)
    aggregation = fields.String(load_default='concat', validate=validate.OneOf(['concat', 'add']))
    aspp_rates = fields.List(fields.Integer(validate=_POSITIVE), load_default=[6, 12, 18])
    pyramid_inputs = fields.Dict(keys=fields.String(), values=fields.Integer(), load_default=None)

    @post_load
    def make_spec(self, data, **kwargs):
        return DerivedNetworkSpec(
            cell=CellGenotype.from_list(data['cell']).validate(allow_null=True),
            path=PathGenotype(tuple(data['path'])),
            filter_multiplier=data['filter_multiplier'],
            dim=data['dim'],
            num_classes=data['num_classes'],
            aggregation=data['aggregation'],
            aspp_rates=tuple(data['aspp_rates']),
        )


SECTION_SCHEMAS = {
    'search': SearchConfigSchema,
    'search_run': SearchRunConfigSchema,
    'train': TrainConfigSchema,
    'dataset': DatasetConfigSchema,
    'network': NetworkConfigSchema,
}
