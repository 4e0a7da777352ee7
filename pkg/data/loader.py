"""
批数据加载

Batches are drawn per epoch from ``default_rng([seed, epoch, stream])`` so
any epoch can be replayed on its own, which is what resuming relies on.
With ``prefetch > 0`` a worker thread fills a bounded queue ahead of the
consumer; batch arrays are read-only either way.
"""

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np

from core.errors import DataError
from .transforms import half_scale as half_scale_pair, random_crop_pair

logger = logging.getLogger(__name__)

_DONE = object()


@dataclass(frozen=True)
class Batch:
    images: np.ndarray
    labels: np.ndarray
    ids: Tuple[str, ...]
    split: str

    def __post_init__(self):
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def size(self) -> int:
        return len(self.ids)


class BatchLoader:
    def __init__(self, dataset: Sequence, batch_size: int, crop: int, half_scale: bool = False,
                 seed: int = 0, split: str = 'train', stream: int = 0, prefetch: int = 0,
                 drop_last: bool = True):
        if not len(dataset):
            raise DataError(f"Split '{split}' is empty", error_code='EMPTY_DATASET')
        if batch_size <= 0:
            raise DataError("batch_size must be positive")
        self.dataset = dataset
        self.batch_size = batch_size
        self.crop = crop
        self.half_scale = half_scale
        self.seed = seed
        self.split = split
        self.stream = stream
        self.prefetch = prefetch
        self.drop_last = drop_last

    def __len__(self) -> int:
        full, rest = divmod(len(self.dataset), self.batch_size)
        if self.drop_last:
            return max(1, full)
        return full + (1 if rest else 0)

    def _load(self, index: int, rng: np.random.Generator):
        sample = self.dataset[index].load()
        if self.half_scale:
            sample = half_scale_pair(sample)
        return random_crop_pair(sample, self.crop, rng)

    def _generate(self, epoch: int, limit: int) -> Iterator[Batch]:
        rng = np.random.default_rng([self.seed, epoch, self.stream])
        order = rng.permutation(len(self.dataset))
        # small datasets wrap around so every batch is full
        if len(order) < self.batch_size:
            order = np.resize(order, self.batch_size)
        for b in range(min(limit, len(self))):
            indices = order[b * self.batch_size:(b + 1) * self.batch_size]
            samples = [self._load(int(i), rng) for i in indices]
            yield Batch(
                images=np.stack([s.image for s in samples]),
                labels=np.stack([s.mask for s in samples]),
                ids=tuple(s.id for s in samples),
                split=self.split,
            )

    def epoch(self, epoch: int, limit: int = None) -> Iterator[Batch]:
        limit = len(self) if limit is None else limit
        if self.prefetch <= 0:
            yield from self._generate(epoch, limit)
            return
        yield from self._prefetched(epoch, limit)

    def _prefetched(self, epoch: int, limit: int) -> Iterator[Batch]:
        buffer: queue.Queue = queue.Queue(maxsize=self.prefetch)
        stop = threading.Event()

        def work():
            try:
                for batch in self._generate(epoch, limit):
                    while not stop.is_set():
                        try:
                            buffer.put(batch, timeout=0.1)
                            break
                        except queue.Full:
                            continue
                    if stop.is_set():
                        return
                buffer.put(_DONE)
            except Exception as e:
                logger.error(f"[LOADER_FAILED] split={self.split} epoch={epoch}: {e}")
                buffer.put(e)

        worker = threading.Thread(target=work, name=f'loader-{self.split}-{epoch}', daemon=True)
        worker.start()
        try:
            while True:
                item = buffer.get()
                if item is _DONE:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            worker.join(timeout=1.0)
