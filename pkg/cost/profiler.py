"""
效率分析

Runs a network once on a shape-only input and records every primitive
operation it executes. Each record is charged to the module scope it ran
in; per-layer rows aggregate the records of one scope.

Definitions:
  params      trainable scalars read by the layer, each Parameter counted once
  flops       per-op formulas of the primitives (a multiply-add is 2 FLOPs)
  madd        multiply-accumulate count
  memory      total forward activation footprint (sum of op outputs, not peak)
  mem_rw      per op: inputs + parameters read, output written
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from autodiff.tensor import Parameter, Tensor, current_scope, no_grad, trace_hook
from models.cost_report import CostReport, LayerCost
from models.network_spec import DerivedNetworkSpec
from nn.module import Module

logger = logging.getLogger(__name__)

DEFAULT_INPUT_HW = (1024, 1024)
ROOT_LAYER = 'network'


@dataclass
class OpRecord:
    layer: str
    op: str
    params: int
    flops: int
    madd: int
    output_elems: int
    read_elems: int


class ShapeTracer:
    """trace_hook callback collecting one OpRecord per non-view primitive."""

    def __init__(self):
        self.records: List[OpRecord] = []
        self._seen_params = set()

    def __call__(self, function_cls, inputs, out, kwargs):
        if function_cls.view:
            return
        params = 0
        for t in inputs:
            if isinstance(t, Parameter) and id(t) not in self._seen_params:
                self._seen_params.add(id(t))
                params += t.size
        flops, madd = function_cls.cost([t.shape for t in inputs], out.shape, **kwargs)
        self.records.append(OpRecord(
            layer=current_scope() or ROOT_LAYER,
            op=function_cls.__name__,
            params=params,
            flops=int(flops),
            madd=int(madd),
            output_elems=out.size,
            read_elems=sum(t.size for t in inputs),
        ))


def trace_network(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW,
                  in_channels: int = 3) -> List[OpRecord]:
    """Eval-mode forward of one meta image of ``input_hw``."""
    tracer = ShapeTracer()
    network.eval()
    with no_grad(), trace_hook(tracer):
        network(Tensor.meta((1, in_channels, int(input_hw[0]), int(input_hw[1]))))
    return tracer.records


def layer_costs(records: List[OpRecord], bytes_per_elem: int = 4) -> List[LayerCost]:
    grouped: Dict[str, Dict[str, int]] = OrderedDict()
    for rec in records:
        acc = grouped.setdefault(rec.layer, dict(params=0, flops=0, madd=0, memory_bytes=0, mem_rw_bytes=0))
        acc['params'] += rec.params
        acc['flops'] += rec.flops
        acc['madd'] += rec.madd
        acc['memory_bytes'] += rec.output_elems * bytes_per_elem
        acc['mem_rw_bytes'] += (rec.read_elems + rec.output_elems) * bytes_per_elem
    return [LayerCost(name=name, **values) for name, values in grouped.items()]


def profile(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW, bytes_per_elem: int = 4,
            in_channels: int = 3) -> CostReport:
    records = trace_network(network, input_hw, in_channels)
    return CostReport(per_layer=layer_costs(records, bytes_per_elem),
                      input_hw=tuple(int(d) for d in input_hw), bytes_per_elem=bytes_per_elem)


def count_params(network: Module) -> int:
    """Instantiated trainable scalars, BN affine pairs included."""
    return sum(p.size for p in network.parameters())


def count_flops(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW) -> int:
    return sum(rec.flops for rec in trace_network(network, input_hw))


def count_madd(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW) -> int:
    return sum(rec.madd for rec in trace_network(network, input_hw))


def activation_memory(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW,
                      bytes_per_elem: int = 4) -> int:
    return sum(rec.output_elems for rec in trace_network(network, input_hw)) * bytes_per_elem


def mem_rw(network: Module, input_hw: Tuple[int, int] = DEFAULT_INPUT_HW, bytes_per_elem: int = 4) -> int:
    records = trace_network(network, input_hw)
    return sum(rec.read_elems + rec.output_elems for rec in records) * bytes_per_elem


def report(spec: DerivedNetworkSpec, input_hw: Optional[Tuple[int, int]] = None,
           bytes_per_elem: int = 4) -> CostReport:
    """Table-style efficiency report of the derived network described by ``spec``."""
    from derived.network import DerivedNetwork

    input_hw = tuple(input_hw or DEFAULT_INPUT_HW)
    network = DerivedNetwork(spec)
    result = profile(network, input_hw, bytes_per_elem)
    logger.info(f"[COST_REPORT] path={list(spec.path.path)} dim={spec.dim} F={spec.filter_multiplier} "
                f"params={result.params} flops={result.flops}", extra=result.totals())
    return result
