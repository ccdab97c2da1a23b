"""Linear surrogate attribution over superpixels.

Random segment coalitions are occluded (off segments filled with their
own mean by default), the oracle's confidence is regressed on the
coalition indicators with locality weights, and the fitted coefficients
become per-segment importances.  A boolean explanation is built by
greedily unioning segments in descending weight order until the oracle
returns the target label.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np

from ..errors import NoExplanation
from ..imaging import BinaryMask, Image, Occlusion, SaliencyMap, occlusion_fill
from ..mutants import Segmentation, coalition_samples
from ..oracle import Oracle, target_confidence
from .common import ExplainerConfig, SegmentAttribution


@dataclass(frozen=True)
class LimeParams:
    kernel_width: float = 0.25  # locality kernel on the fraction of segments kept


def weighted_least_squares(design: np.ndarray, response: np.ndarray,
                           weights: np.ndarray,
                           ridge: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Solve min ||sqrt(W)(y - X beta)||; rank-deficient designs fall back
    to a tiny ridge penalty and report it via the returned flag."""
    sq = np.sqrt(weights)[:, None]
    a = design * sq
    b = response * sq[:, 0]
    beta, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank == design.shape[1]:
        return beta, False
    warnings.warn("surrogate design is rank-deficient; refitting with ridge 1e-6",
                  RuntimeWarning, stacklevel=2)
    gram = a.T @ a + ridge * np.eye(design.shape[1])
    return np.linalg.solve(gram, a.T @ b), True


def mutant_for_coalition(image: Image, seg: Segmentation, on: np.ndarray,
                         fill: np.ndarray) -> Image:
    keep3 = seg.member_mask(on)[:, :, None]
    return Image(np.clip(np.where(keep3, image.data, fill), 0.0, 1.0))


def explain_lime(image: Image, oracle: Oracle, seg: Segmentation,
                 cfg: ExplainerConfig) -> tuple[SegmentAttribution, SaliencyMap, BinaryMask]:
    """Total oracle traffic (surrogate samples + greedy mask queries) stays
    within cfg.budget; k queries are reserved for the greedy stage."""
    tool = cfg.params or LimeParams()
    occ = cfg.occlusion or Occlusion.segment_mean(seg.labels)
    k = seg.k
    n_samples = max(2, cfg.budget - k)
    coalitions = coalition_samples(k, n_samples, seed=cfg.seed, scheme="uniform")
    fill = occlusion_fill(image, occ)

    confidences = np.empty(n_samples)
    for i in range(n_samples):
        pred = oracle.classify(mutant_for_coalition(image, seg, coalitions[i], fill))
        confidences[i] = target_confidence(pred, cfg.target)

    on_fraction = coalitions.mean(axis=1)
    sample_w = np.exp(-((1.0 - on_fraction) ** 2) / tool.kernel_width ** 2)
    design = np.concatenate([np.ones((n_samples, 1)), coalitions.astype(float)], axis=1)
    beta, ridged = weighted_least_squares(design, confidences, sample_w)
    attribution = SegmentAttribution(weights=beta[1:], intercept=float(beta[0]),
                                     ridge_fallback=ridged)
    saliency = SaliencyMap(attribution.weights[seg.labels])

    used = n_samples
    order = [j for j in np.argsort(-attribution.weights, kind="stable")
             if attribution.weights[j] > 0]
    chosen = np.zeros(k, dtype=bool)
    mask = None
    for j in order:
        if used >= cfg.budget:
            break
        chosen[j] = True
        pred = oracle.classify(mutant_for_coalition(image, seg, chosen, fill))
        used += 1
        if pred.label == cfg.target:
            mask = BinaryMask(seg.member_mask(chosen))
            break
    if mask is None:
        err = NoExplanation("no union of positive-weight segments recovers the target label")
        err.attribution = attribution  # the surrogate fit is still informative
        err.saliency = saliency
        raise err
    return attribution, saliency, mask
