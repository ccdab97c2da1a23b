"""Turn any heatmap into a boolean mask via greedy rank-and-query.

Pixels are ranked by saliency (row-major index breaks ties); each round
keeps the top r*step fraction of pixels, occludes the rest, and asks
the oracle.  The first keep-set that recovers the target label is the
explanation, so the returned mask passes by construction.  Round
budgets are pixel-count quantiles rather than saliency thresholds so
masks stay comparable across tools with different score scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NoExplanation
from .imaging import BinaryMask, Image, Occlusion, SaliencyMap, apply_occlusion
from .oracle import Oracle


@dataclass(frozen=True)
class ExtractionParams:
    step: float = 0.01     # fraction of total pixels added per round
    max_rounds: int = 100  # default reaches the full image at step 0.01

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise InvalidParams("step must be in (0, 1]")
        if self.max_rounds < 1:
            raise InvalidParams("max_rounds must be >= 1")


def extract_minimal_mask(saliency: SaliencyMap, image: Image, oracle: Oracle,
                         target_label: str,
                         params: ExtractionParams = ExtractionParams(),
                         occlusion: Occlusion = Occlusion.zero()) -> BinaryMask:
    """At most ceil(1/step) oracle queries; raises NoExplanation if even the
    final (largest) round fails."""
    if saliency.shape != image.shape:
        raise InvalidParams(f"saliency {saliency.shape} vs image {image.shape}")
    h, w = image.shape
    total = h * w
    order = np.argsort(-saliency.values.reshape(-1), kind="stable")

    rounds = min(params.max_rounds, math.ceil(1.0 / params.step))
    for r in range(1, rounds + 1):
        count = min(total, math.ceil(r * params.step * total))
        keep = np.zeros(total, dtype=bool)
        keep[order[:count]] = True
        mask = BinaryMask(keep.reshape(h, w))
        pred = oracle.classify(apply_occlusion(image, mask, occlusion))
        if pred.label == target_label:
            return mask
        if count == total:
            break
    raise NoExplanation(f"no pixel-rank prefix recovers the label {target_label!r}")
