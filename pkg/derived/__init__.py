"""
AutoLC - 派生网络

Discrete encoder built from a genotype, the adaptive lightweight decoder,
training and mIoU evaluation.
"""

from .metrics import (
    MIoUResult, confusion_matrix, iou_from_confusion, mean_iou, evaluate_miou, predict_labels,
    result_from_confusion,
)
from .encoder import DiscreteCell, Encoder, build_encoder, inherit_supernet_weights
from .decoder import (
    FPN, FeatureFusion, FusionStage, ASPP, ASPPPooling, SemanticAggregation, aspp_rates, fusion_stage_count,
    semantic_aggregation,
)
from .network import DerivedNetwork, build_derived_network
from .trainer import (
    MetricRow, TrainResult, train_derived, train_step, poly_schedule, save_trained, load_trained, load_spec,
    read_metrics, write_metrics,
)

__all__ = [
    'MIoUResult', 'confusion_matrix', 'iou_from_confusion', 'mean_iou', 'evaluate_miou', 'predict_labels',
    'result_from_confusion',
    'DiscreteCell', 'Encoder', 'build_encoder', 'inherit_supernet_weights',
    'FPN', 'FeatureFusion', 'FusionStage', 'ASPP', 'ASPPPooling', 'SemanticAggregation', 'aspp_rates',
    'fusion_stage_count', 'semantic_aggregation',
    'DerivedNetwork', 'build_derived_network',
    'MetricRow', 'TrainResult', 'train_derived', 'train_step', 'poly_schedule', 'save_trained', 'load_trained',
    'load_spec', 'read_metrics', 'write_metrics',
]
