"""Shapley-value attribution over superpixels.

When the coalition space fits in the query budget (2^k <= budget) the
values are computed exactly from a full enumeration; otherwise
coalitions are sampled from the Shapley kernel and solved as a weighted
least squares with the efficiency constraint
sum(phi) = f(all-on) - f(all-off).  Off segments default to a blurred
fill, since zeroing whole segments tends to knock homogeneous images
off-manifold entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from ..imaging import Image, Occlusion, SaliencyMap, occlusion_fill
from ..mutants import Segmentation, coalition_samples
from ..oracle import Oracle, target_confidence
from .common import ExplainerConfig, SegmentAttribution
from .lime import mutant_for_coalition, weighted_least_squares


@dataclass(frozen=True)
class ShapParams:
    blur_window: int = 63  # clamped to the image and forced odd
    mode: str = "auto"     # auto: exact iff 2^k <= budget; or force exact/sampled

    def __post_init__(self):
        if self.mode not in ("auto", "exact", "sampled"):
            raise InvalidParams("mode must be auto, exact or sampled")


def _default_occlusion(image: Image, tool: ShapParams) -> Occlusion:
    w = min(tool.blur_window, min(image.shape))
    return Occlusion.blur(w if w % 2 == 1 else w - 1)


def explain_shap(image: Image, oracle: Oracle, seg: Segmentation,
                 cfg: ExplainerConfig) -> tuple[SegmentAttribution, SaliencyMap]:
    tool = cfg.params or ShapParams()
    occ = cfg.occlusion or _default_occlusion(image, tool)
    k = seg.k
    fill = occlusion_fill(image, occ)

    def game(on: np.ndarray) -> float:
        pred = oracle.classify(mutant_for_coalition(image, seg, on, fill))
        return target_confidence(pred, cfg.target)

    exact = 2 ** k <= cfg.budget if tool.mode == "auto" else tool.mode == "exact"
    if exact:
        if 2 ** k > cfg.budget:
            raise InvalidParams(f"exact mode needs 2^{k} queries, budget is {cfg.budget}")
        phi, intercept, ridged = _exact(game, k)
    else:
        phi, intercept, ridged = _kernel_sampled(game, k, cfg)
    attribution = SegmentAttribution(weights=phi, intercept=intercept,
                                     ridge_fallback=ridged)
    return attribution, SaliencyMap(attribution.weights[seg.labels])


def _exact(game, k: int) -> tuple[np.ndarray, float, bool]:
    values = np.empty(2 ** k)
    for m in range(2 ** k):
        on = np.array([(m >> i) & 1 for i in range(k)], dtype=bool)
        values[m] = game(on)
    size_weight = [math.factorial(s) * math.factorial(k - s - 1) / math.factorial(k)
                   for s in range(k)]
    phi = np.zeros(k)
    for i in range(k):
        bit = 1 << i
        for m in range(2 ** k):
            if m & bit:
                continue
            phi[i] += size_weight[bin(m).count("1")] * (values[m | bit] - values[m])
    return phi, float(values[0]), False


def _kernel_sampled(game, k: int, cfg: ExplainerConfig) -> tuple[np.ndarray, float, bool]:
    if cfg.budget < 2:
        raise InvalidParams("sampled mode needs at least the all-off/all-on pair")
    coalitions = coalition_samples(k, cfg.budget, seed=cfg.seed, scheme="shapley-kernel")
    f_off = game(coalitions[0])
    f_on = game(coalitions[1])
    delta = f_on - f_off
    if k == 1:
        return np.array([delta]), float(f_off), False
    # deduplicate: a deterministic oracle answers a repeated mutant identically,
    # so each distinct coalition is queried once and enters the least squares
    # with its exact kernel weight
    unique = np.unique(coalitions[2:], axis=0)
    rows = unique.astype(float)
    y = np.array([game(unique[i]) for i in range(len(unique))])
    sizes = rows.sum(axis=1).astype(int)
    kernel = np.array([(k - 1) / (math.comb(k, z) * z * (k - z)) for z in sizes])
    # eliminate phi_{k-1} via the efficiency constraint, then solve WLS
    design = rows[:, :-1] - rows[:, -1:]
    response = y - f_off - rows[:, -1] * delta
    if len(rows) == 0:
        return np.full(k, delta / k), float(f_off), True
    beta, ridged = weighted_least_squares(design, response, kernel)
    phi = np.append(beta, delta - beta.sum())
    return phi, float(f_off), ridged
