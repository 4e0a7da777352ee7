"""
派生网络训练

SGD with momentum under a polynomial schedule with linear warmup; random
crops, optional half scaling, validation mIoU every ``eval_interval``
iterations and at the end.
"""

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from autodiff.optim import SGD
from autodiff.schedule import LrSchedule, lr_at
from autodiff.tensor import Tensor, backward
from core.checkpoint import load_checkpoint, read_json, save_checkpoint, write_json
from core.errors import DataError, NumericalError
from core.log import log_stage
from data.loader import Batch, BatchLoader
from data.transforms import half_scale
from models.base import BaseModel
from models.configs import TrainConfig
from models.network_spec import DerivedNetworkSpec
from models.schemas import NetworkSpecSchema
from nn import init
from nn.functional import softmax_cross_entropy
from .metrics import MIoUResult, evaluate_miou
from .network import DerivedNetwork

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.csv'
METRICS_COLUMNS = ('iter', 'loss', 'lr', 'mIoU')
SPEC_FILE = 'network_spec.json'
WEIGHTS_PATH = os.path.join('model', 'weights')


@dataclass(frozen=True)
class MetricRow(BaseModel):
    iteration: int
    loss: Optional[float]
    lr: float
    miou: Optional[float] = None

    def row(self) -> list:
        return [self.iteration,
                '' if self.loss is None else repr(self.loss),
                repr(self.lr),
                '' if self.miou is None else repr(self.miou)]


@dataclass
class TrainResult:
    network: DerivedNetwork = field(repr=False)
    metrics: List[MetricRow]
    final: Optional[MIoUResult]
    out_dir: Optional[str]


def poly_schedule(config: TrainConfig) -> LrSchedule:
    return LrSchedule.polynomial(config.lr_initial, config.total_iters, power=config.lr_power,
                                 warmup_steps=config.warmup_iters)


def iteration_lr(schedule: LrSchedule, iteration: int) -> float:
    """Rate for 0-based ``iteration``; warmup iterations take the end of their ramp step so no update uses 0."""
    if iteration < schedule.warmup_steps:
        return lr_at(schedule, iteration + 1)
    return lr_at(schedule, iteration)


def _cycle(loader: BatchLoader) -> Iterator[Batch]:
    epoch = 0
    while True:
        yield from loader.epoch(epoch)
        epoch += 1


def train_step(network: DerivedNetwork, batch: Batch, optimizer: SGD, lr: float,
               ignore_index: int = 255) -> Optional[float]:
    """One SGD step; returns None when every pixel of the batch is ignored."""
    network.train()
    optimizer.zero_grad()
    logits = network(Tensor(batch.images))
    loss, all_ignored = softmax_cross_entropy(logits, batch.labels, ignore_index=ignore_index)
    if all_ignored:
        logger.warning(f"[BATCH_SKIPPED] every pixel ignored ids={list(batch.ids)}")
        return None
    value = loss.item()
    if not np.isfinite(value):
        logger.error(f"[NON_FINITE_LOSS] ids={list(batch.ids)} lr={lr}")
        raise NumericalError("Non-finite training loss", details={'ids': list(batch.ids), 'loss': value, 'lr': lr})
    backward(loss, optimizer.parameters)
    optimizer.step(lr)
    return value


def write_metrics(path: str, rows: Sequence[MetricRow]) -> str:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for item in rows:
            writer.writerow(item.row())
    return path


def read_metrics(path: str) -> List[MetricRow]:
    if not os.path.exists(path):
        raise DataError(f"Metrics file not found: {path}")
    with open(path, newline='', encoding='utf-8') as f:
        return [MetricRow(iteration=int(r['iter']),
                          loss=float(r['loss']) if r['loss'] else None,
                          lr=float(r['lr']),
                          miou=float(r['mIoU']) if r['mIoU'] else None)
                for r in csv.DictReader(f)]


def train_derived(spec: DerivedNetworkSpec, train_set: Sequence, val_set: Optional[Sequence],
                  config: TrainConfig, out_dir: Optional[str] = None, ignore_index: int = 255,
                  on_eval: Optional[Callable[[int, MIoUResult], None]] = None) -> TrainResult:
    """
    训练派生网络

    Iterations 0 .. total_iters-1 each take the learning rate of the
    schedule at that iteration; batches cycle through loader epochs.
    """
    if not len(train_set):
        raise DataError("Cannot train on an empty dataset", error_code='EMPTY_DATASET')
    init.manual_seed(config.seed)
    network = DerivedNetwork(spec)
    optimizer = SGD(network.parameters(), lr=config.lr_initial, momentum=config.momentum,
                    weight_decay=config.weight_decay)
    schedule = poly_schedule(config)
    loader = BatchLoader(train_set, batch_size=config.batch_size, crop=config.crop,
                         half_scale=config.half_scale, seed=config.seed, split='train',
                         prefetch=config.prefetch)
    eval_transform = half_scale if config.half_scale else None
    rows: List[MetricRow] = []
    final = None

    def evaluate(iteration: int) -> Optional[MIoUResult]:
        if not val_set:
            return None
        result = evaluate_miou(network, val_set, spec.num_classes, ignore_index, transform=eval_transform)
        logger.info(f"[TRAIN_EVAL] iter={iteration} miou={result.miou:.4f}",
                    extra={'iter': iteration, 'miou': result.miou})
        if on_eval is not None:
            on_eval(iteration, result)
        return result

    logger.info(f"[TRAIN_START] samples={len(train_set)} iters={config.total_iters} "
                f"params={network.num_parameters()}")
    with log_stage('train', iters=config.total_iters):
        batches = _cycle(loader)
        for iteration in range(config.total_iters):
            lr = iteration_lr(schedule, iteration)
            loss = train_step(network, next(batches), optimizer, lr, ignore_index)
            done = iteration + 1
            result = None
            if done % config.eval_interval == 0 or done == config.total_iters:
                result = evaluate(done)
                final = result if result is not None else final
            if result is not None or done % config.log_interval == 0:
                rows.append(MetricRow(done, loss, lr, None if result is None else result.miou))
            if done % config.log_interval == 0:
                logger.info(f"[TRAIN_ITER] iter={done} loss={loss} lr={lr:.6f}")

    if out_dir:
        save_trained(network, out_dir, optimizer=optimizer, iteration=config.total_iters)
        write_metrics(os.path.join(out_dir, METRICS_FILE), rows)
    return TrainResult(network, rows, final, out_dir)


def save_trained(network: DerivedNetwork, out_dir: str, optimizer: Optional[SGD] = None,
                 iteration: Optional[int] = None) -> str:
    os.makedirs(os.path.join(out_dir, 'model'), exist_ok=True)
    write_json(os.path.join(out_dir, SPEC_FILE), network.spec.to_dict())
    meta = {'iteration': iteration}
    if optimizer is not None:
        meta['optimizer'] = optimizer.state_dict()[1]
    path = save_checkpoint(os.path.join(out_dir, WEIGHTS_PATH), network.state_dict(), meta)
    logger.info(f"[CHECKPOINT_SAVED] {path}", extra=meta)
    return path


def load_spec(path: str) -> DerivedNetworkSpec:
    return NetworkSpecSchema().load(read_json(path))


def load_trained(out_dir: str) -> DerivedNetwork:
    """Rebuilds the network from ``network_spec.json`` and restores its weights, in eval mode."""
    network = DerivedNetwork(load_spec(os.path.join(out_dir, SPEC_FILE)))
    tensors, _ = load_checkpoint(os.path.join(out_dir, WEIGHTS_PATH))
    network.load_state_dict(tensors)
    return network.eval()
