"""
AutoLC - 效率指标
"""

from .profiler import (
    OpRecord, ShapeTracer, trace_network, layer_costs, profile, count_params, count_flops, count_madd,
    activation_memory, mem_rw, report, DEFAULT_INPUT_HW,
)

__all__ = [
    'OpRecord', 'ShapeTracer', 'trace_network', 'layer_costs', 'profile', 'count_params', 'count_flops',
    'count_madd', 'activation_memory', 'mem_rw', 'report', 'DEFAULT_INPUT_HW',
]
