"""Saliency from randomly sampled soft masks.

Each of N interpolated masks m_i keeps a random ~p fraction of the
image; the saliency of a pixel is the confidence-weighted frequency of
masks that showed it: Sal(x) = (1/(N*p)) * sum_i conf_i * m_i(x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging import Image, Occlusion, SaliencyMap, occlusion_fill
from ..mutants import RiseMaskParams, rise_masks
from ..oracle import Oracle, target_confidence
from .common import ExplainerConfig


@dataclass(frozen=True)
class RiseParams:
    grid: int = 8
    keep_prob: float = 0.1


def explain_rise(image: Image, oracle: Oracle, cfg: ExplainerConfig) -> SaliencyMap:
    """Issues exactly cfg.budget oracle queries, one per mask."""
    tool = cfg.params or RiseParams()
    occ = cfg.occlusion or Occlusion.zero()
    mask_params = RiseMaskParams(grid=tool.grid, keep_prob=tool.keep_prob,
                                 count=cfg.budget, seed=cfg.seed)
    masks = rise_masks(mask_params, image.shape)

    fill = None
    if occ.kind != "global-mean":  # mask-independent fills are computed once
        fill = occlusion_fill(image, occ)

    acc = np.zeros(image.shape)
    for mask in masks:
        w3 = mask.values[:, :, None]
        if fill is None:
            mfill = occlusion_fill(image, occ, visible=mask.values)
        else:
            mfill = fill
        mutant = Image(np.clip(w3 * image.data + (1.0 - w3) * mfill, 0.0, 1.0))
        conf = target_confidence(oracle.classify(mutant), cfg.target)
        acc += conf * mask.values

    if mask_params.keep_prob == 0.0:  # all masks empty; nothing was ever observed
        return SaliencyMap(np.zeros(image.shape))
    return SaliencyMap(acc / (mask_params.count * mask_params.keep_prob))


def duplicate_mask_count(params: RiseMaskParams, shape: tuple[int, int]) -> int:
    """Diagnostic: how many generated masks duplicate an earlier one."""
    seen = set()
    dupes = 0
    for mask in rise_masks(params, shape):
        key = mask.values.tobytes()
        if key in seen:
            dupes += 1
        seen.add(key)
    return dupes
