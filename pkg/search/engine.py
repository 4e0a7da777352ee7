"""
双层交替优化搜索

First-order alternating updates: weights w by SGD on trainA batches with
alpha/beta frozen, then (from ``arch_start_epoch`` on) alpha/beta by Adam on
trainB batches with w frozen. Every epoch is checkpointed under
``epoch_<n>/`` so a run can resume with an identical history prefix.
"""

import csv
import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.optim import SGD, Adam
from autodiff.schedule import LrSchedule, lr_at
from autodiff.tensor import Tensor, backward, frozen, no_grad
from core.checkpoint import load_checkpoint, read_json, save_checkpoint, write_json
from core.errors import DataError, NumericalError
from core.log import log_stage
from data.loader import Batch, BatchLoader
from models.base import BaseModel
from models.configs import SearchConfig, SearchRunConfig
from nn import init
from nn.functional import softmax_cross_entropy
from .decoder import read_arch_logits, write_arch_logits
from .space import AlphaParams, BetaParams, alpha_entropy, beta_entropy, check_relaxation
from .supernet import Supernet

logger = logging.getLogger(__name__)

SPLIT_A = 'trainA'
SPLIT_B = 'trainB'
HISTORY_FILE = 'history.csv'
HISTORY_COLUMNS = ('epoch', 'lossA', 'lossB', 'alpha_entropy', 'beta_entropy', 'seconds')
_EPOCH_DIR = re.compile(r'^epoch_(\d+)$')


def split_train(dataset: Sequence, seed: int = 0) -> Tuple[list, list]:
    """Random disjoint halves; trainA gets the extra item when the size is odd."""
    if not len(dataset):
        raise DataError("Cannot split an empty dataset", error_code='EMPTY_DATASET')
    order = np.random.default_rng(seed).permutation(len(dataset))
    half = (len(dataset) + 1) // 2
    return [dataset[i] for i in sorted(order[:half])], [dataset[i] for i in sorted(order[half:])]


@dataclass(frozen=True)
class EpochRecord(BaseModel):
    epoch: int
    loss_a: float
    loss_b: float
    alpha_entropy: float
    beta_entropy: float
    seconds: float

    def row(self) -> list:
        return [self.epoch, repr(self.loss_a), repr(self.loss_b),
                repr(self.alpha_entropy), repr(self.beta_entropy), f'{self.seconds:.3f}']


@dataclass
class SearchHistory:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord):
        self.records.append(record)

    def write_csv(self, path: str) -> str:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(HISTORY_COLUMNS)
            for record in self.records:
                writer.writerow(record.row())
        return path

    @classmethod
    def read_csv(cls, path: str) -> 'SearchHistory':
        if not os.path.exists(path):
            raise DataError(f"History file not found: {path}")
        history = cls()
        with open(path, newline='', encoding='utf-8') as f:
            for row in csv.DictReader(f):
                history.append(EpochRecord(
                    epoch=int(row['epoch']),
                    loss_a=float(row['lossA']),
                    loss_b=float(row['lossB']),
                    alpha_entropy=float(row['alpha_entropy']),
                    beta_entropy=float(row['beta_entropy']),
                    seconds=float(row['seconds']),
                ))
        return history


@dataclass(frozen=True)
class StepLosses:
    loss_a: float
    loss_b: float
    arch_updated: bool


def _batch_loss(supernet: Supernet, batch: Batch, ignore_index: int) -> Tensor:
    logits = supernet(Tensor(batch.images))
    loss, _ = softmax_cross_entropy(logits, batch.labels, ignore_index=ignore_index)
    value = loss.item()
    if not np.isfinite(value):
        logger.error(f"[NON_FINITE_LOSS] split={batch.split} ids={list(batch.ids)}")
        raise NumericalError(f"Non-finite {batch.split} loss", details={'ids': list(batch.ids), 'loss': value})
    return loss


def _require_split(batch: Batch, split: str):
    if batch.split != split:
        raise DataError(f"Expected a {split} batch, got one from {batch.split}", error_code='WRONG_SPLIT')


def weight_step(supernet: Supernet, batch_a: Batch, optimizer: SGD, lr: float, ignore_index: int = 255) -> float:
    """w <- w - lr * grad_w L_trainA, alpha/beta frozen."""
    _require_split(batch_a, SPLIT_A)
    supernet.train()
    optimizer.zero_grad()
    with frozen(supernet.arch_parameters()):
        loss = _batch_loss(supernet, batch_a, ignore_index)
        backward(loss, optimizer.parameters)
    optimizer.step(lr)
    return loss.item()


def arch_step(supernet: Supernet, batch_b: Batch, optimizer: Adam, ignore_index: int = 255) -> float:
    """(alpha, beta) <- Adam step on L_trainB, w frozen."""
    _require_split(batch_b, SPLIT_B)
    supernet.train()
    optimizer.zero_grad()
    with frozen(supernet.weight_parameters()):
        loss = _batch_loss(supernet, batch_b, ignore_index)
        backward(loss, optimizer.parameters)
    optimizer.step()
    return loss.item()


def relaxation_check(supernet: Supernet):
    with no_grad():
        check_relaxation(supernet.alpha.normalized().numpy(), supernet.beta.normalized().numpy(),
                         supernet.beta.mask)


def search_step(supernet: Supernet, batch_a: Batch, batch_b: Batch, epoch: int, run_config: SearchRunConfig,
                w_optimizer: SGD, arch_optimizer: Adam, lr: float, ignore_index: int = 255) -> StepLosses:
    loss_a = weight_step(supernet, batch_a, w_optimizer, lr, ignore_index)
    arch_updated = epoch >= run_config.arch_start_epoch
    if arch_updated:
        loss_b = arch_step(supernet, batch_b, arch_optimizer, ignore_index)
    else:
        _require_split(batch_b, SPLIT_B)
        with no_grad():
            loss_b = _batch_loss(supernet, batch_b, ignore_index).item()
    relaxation_check(supernet)
    return StepLosses(loss_a, loss_b, arch_updated)


@dataclass
class SearchResult:
    alpha: AlphaParams
    beta: BetaParams
    history: SearchHistory
    checkpoint_dir: Optional[str]
    supernet: Supernet = field(repr=False, default=None)


def _epoch_dir(out_dir: str, epoch: int) -> str:
    return os.path.join(out_dir, f'epoch_{epoch}')


def latest_checkpoint(out_dir: str) -> Optional[int]:
    """Highest completed epoch index under ``out_dir``, or None."""
    if not out_dir or not os.path.isdir(out_dir):
        return None
    epochs = []
    for name in os.listdir(out_dir):
        match = _EPOCH_DIR.match(name)
        if match and os.path.exists(os.path.join(out_dir, name, 'state.json')):
            epochs.append(int(match.group(1)))
    return max(epochs) if epochs else None


def save_search_checkpoint(out_dir: str, epoch: int, supernet: Supernet, w_optimizer: SGD,
                           arch_optimizer: Adam, global_step: int) -> str:
    directory = _epoch_dir(out_dir, epoch)
    os.makedirs(directory, exist_ok=True)
    save_checkpoint(os.path.join(directory, 'weights'), supernet.state_dict(), {'epoch': epoch})
    w_tensors, w_meta = w_optimizer.state_dict()
    a_tensors, a_meta = arch_optimizer.state_dict()
    save_checkpoint(os.path.join(directory, 'optimizer'),
                    {**{f'w.{k}': v for k, v in w_tensors.items()}, **{f'arch.{k}': v for k, v in a_tensors.items()}},
                    {'w': w_meta, 'arch': a_meta})
    write_arch_logits(os.path.join(directory, 'arch_logits.json'), supernet.alpha, supernet.beta, epoch=epoch)
    # state.json last: its presence marks the epoch as complete
    write_json(os.path.join(directory, 'state.json'), {'epoch': epoch, 'global_step': global_step})
    logger.info(f"[CHECKPOINT_SAVED] {directory}", extra={'epoch': epoch, 'global_step': global_step})
    return directory


def load_search_checkpoint(out_dir: str, epoch: int, supernet: Supernet, w_optimizer: SGD,
                           arch_optimizer: Adam) -> int:
    """Restores weights, relaxation and optimizer state in place; returns the global step."""
    directory = _epoch_dir(out_dir, epoch)
    tensors, _ = load_checkpoint(os.path.join(directory, 'weights'))
    supernet.load_state_dict(tensors)
    alpha, beta, _ = read_arch_logits(os.path.join(directory, 'arch_logits.json'),
                                      dtype=supernet.alpha.logits.dtype)
    np.copyto(supernet.alpha.logits.data, alpha.logits.data)
    np.copyto(supernet.beta.logits.data, beta.logits.data)
    opt_tensors, opt_meta = load_checkpoint(os.path.join(directory, 'optimizer'))
    w_optimizer.load_state_dict({k[2:]: v for k, v in opt_tensors.items() if k.startswith('w.')}, opt_meta['w'])
    arch_optimizer.load_state_dict({k[5:]: v for k, v in opt_tensors.items() if k.startswith('arch.')},
                                   opt_meta['arch'])
    state = read_json(os.path.join(directory, 'state.json'))
    logger.info(f"[CHECKPOINT_RESTORED] {directory}", extra=state)
    return int(state['global_step'])


def run_search(dataset: Sequence, search_config: SearchConfig, run_config: SearchRunConfig,
               out_dir: Optional[str] = None, resume: bool = False, ignore_index: int = 255,
               on_epoch: Optional[Callable[[EpochRecord], None]] = None) -> SearchResult:
    """
    执行架构搜索

    Epoch length is min(|trainA|, |trainB|) // batch_size (at least one
    step); the weight learning rate follows one cosine schedule over all
    epochs, warm phase included.
    """
    seed = run_config.seed
    init.manual_seed(seed)
    supernet = Supernet(search_config, seed=seed)
    train_a, train_b = split_train(dataset, seed)
    if not train_b:
        raise DataError("Bi-level search needs at least 2 samples so trainA and trainB are both nonempty",
                        error_code='TOO_FEW_SAMPLES', details={'samples': len(dataset)})
    loader_kwargs = dict(batch_size=run_config.batch_size, crop=run_config.crop,
                         half_scale=run_config.half_scale, seed=seed, prefetch=run_config.prefetch)
    loader_a = BatchLoader(train_a, split=SPLIT_A, stream=0, **loader_kwargs)
    loader_b = BatchLoader(train_b, split=SPLIT_B, stream=1, **loader_kwargs)
    steps_per_epoch = min(len(loader_a), len(loader_b))

    schedule = LrSchedule.cosine(run_config.w_lr_initial, run_config.w_lr_final,
                                 total_steps=run_config.epochs * steps_per_epoch)
    w_optimizer = SGD(supernet.weight_parameters(), lr=run_config.w_lr_initial,
                      momentum=run_config.w_momentum, weight_decay=run_config.w_weight_decay)
    arch_optimizer = Adam(supernet.arch_parameters(), lr=run_config.arch_lr,
                          betas=(run_config.arch_beta1, run_config.arch_beta2),
                          weight_decay=run_config.arch_weight_decay)

    history = SearchHistory()
    start_epoch, global_step = 0, 0
    if resume:
        last = latest_checkpoint(out_dir)
        if last is None:
            logger.warning(f"[RESUME_SKIPPED] no completed epoch under {out_dir}")
        else:
            global_step = load_search_checkpoint(out_dir, last, supernet, w_optimizer, arch_optimizer)
            previous = SearchHistory.read_csv(os.path.join(out_dir, HISTORY_FILE))
            history.records = [r for r in previous.records if r.epoch <= last]
            start_epoch = last + 1

    logger.info(f"[SEARCH_START] |A|={len(train_a)} |B|={len(train_b)} steps/epoch={steps_per_epoch} "
                f"epochs={run_config.epochs} start={start_epoch}")
    with log_stage('search', epochs=run_config.epochs):
        for epoch in range(start_epoch, run_config.epochs):
            started = time.time()
            losses_a, losses_b = [], []
            batches = zip(loader_a.epoch(epoch, steps_per_epoch), loader_b.epoch(epoch, steps_per_epoch))
            for batch_a, batch_b in batches:
                lr = lr_at(schedule, global_step)
                step = search_step(supernet, batch_a, batch_b, epoch, run_config,
                                   w_optimizer, arch_optimizer, lr, ignore_index)
                losses_a.append(step.loss_a)
                losses_b.append(step.loss_b)
                global_step += 1

            with no_grad():
                alpha_norm = supernet.alpha.normalized().numpy()
                beta_norm = supernet.beta.normalized().numpy()
            record = EpochRecord(
                epoch=epoch,
                loss_a=float(np.mean(losses_a)),
                loss_b=float(np.mean(losses_b)),
                alpha_entropy=alpha_entropy(alpha_norm),
                beta_entropy=beta_entropy(beta_norm, supernet.beta.targets),
                seconds=time.time() - started,
            )
            history.append(record)
            logger.info(f"[SEARCH_EPOCH_END] epoch={epoch} lossA={record.loss_a:.4f} lossB={record.loss_b:.4f}",
                        extra=record.to_dict())
            if out_dir:
                save_search_checkpoint(out_dir, epoch, supernet, w_optimizer, arch_optimizer, global_step)
                history.write_csv(os.path.join(out_dir, HISTORY_FILE))
            if on_epoch is not None:
                on_epoch(record)

    if out_dir:
        write_arch_logits(os.path.join(out_dir, 'arch_logits.json'), supernet.alpha, supernet.beta,
                          epoch=run_config.epochs - 1)
    return SearchResult(supernet.alpha, supernet.beta, history, out_dir, supernet)
