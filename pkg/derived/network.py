"""
派生网络

Searched encoder plus the adaptive lightweight decoder.
"""

import logging

from autodiff.tensor import Tensor
from core.errors import ShapeError
from models.network_spec import DerivedNetworkSpec
from nn import functional as F
from nn.module import Module
from search.components import crop_to, pad_to_multiple
from search.space import channels_for
from .decoder import ASPP, FPN, FeatureFusion, SemanticAggregation, aspp_rates
from .encoder import Encoder

logger = logging.getLogger(__name__)


class DerivedNetwork(Module):
    def __init__(self, spec: DerivedNetworkSpec, in_channels: int = 3):
        super().__init__()
        self.spec = spec
        self.encoder = Encoder(spec, in_channels)
        tapped = self.encoder.tapped_channels()
        self.fpn = FPN(tapped, spec.dim)
        self.fusion = FeatureFusion(tuple(tapped), spec.dim)
        final_channels = channels_for(self.encoder.config, spec.final_rate)
        self.aspp = ASPP(final_channels, spec.dim, aspp_rates(spec.aspp_rates, spec.final_rate))
        self.head = SemanticAggregation(spec.dim, spec.num_classes, spec.aggregation)
        logger.debug(f"[DERIVED_NETWORK] path={list(spec.path.path)} taps={spec.pyramid_inputs} "
                     f"aspp_rates={self.aspp.rates}")

    def forward(self, image: Tensor) -> Tensor:
        """Class logits with the input's spatial extent; the encoder sees the input padded to its divisor."""
        if image.ndim != 4:
            raise ShapeError(f"Expected an NCHW image batch, got shape {image.shape}")
        size = image.shape[2:]
        image = pad_to_multiple(image, self.encoder.config.max_rate)
        states = self.encoder(image)
        levels = self.fpn(self.encoder.taps(states))
        fused = self.fusion(levels)
        context = self.aspp(states[-1])
        return crop_to(self.head(fused, context, image.shape[2:]), size)

    def predict_proba(self, image: Tensor) -> Tensor:
        return F.softmax(self(image), axis=1)


def build_derived_network(spec: DerivedNetworkSpec) -> DerivedNetwork:
    return DerivedNetwork(spec)
