"""Causal-responsibility explanations via recursive rectangle refinement.

Phase 1 builds a responsibility landscape: the working rectangle is
split into 4 tiles, the oracle is queried on every proper tile subset
used as a keep-mask, and each *minimal* sufficient subset S awards
1/|S| responsibility to its pixels.  Refinement recurses into the tile
with the highest accumulated responsibility.  Phase 2 extracts a mask:
a square box seeded on the landscape argmax greedily shrinks, moves or
grows (step 4 px) until it is the smallest passing box in its
neighborhood.  The returned mask always yields the target label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .. import rng
from ..errors import InvalidParams, NoExplanation
from ..imaging import BinaryMask, Image, Occlusion, SaliencyMap, apply_occlusion
from ..mutants import Rect, rex_partition
from ..oracle import Oracle
from .common import ExplainerConfig


@dataclass(frozen=True)
class RexParams:
    refinements: int = 20
    min_part_area: int = 16     # stop refining once the chosen tile is this small
    box_step: int = 4
    min_box_side: int = 4
    landscape: str = "mean"     # "mean": responsibility / visits; "sum": raw

    def __post_init__(self):
        if self.refinements < 1 or self.box_step < 1 or self.min_box_side < 1:
            raise InvalidParams("refinements, box_step and min_box_side must be >= 1")
        if self.landscape not in ("mean", "sum"):
            raise InvalidParams("landscape must be 'mean' or 'sum'")


@dataclass(frozen=True)
class ResponsibilityLandscape:
    """Accumulated responsibility plus per-pixel visit counts."""

    responsibility: np.ndarray
    visits: np.ndarray

    def to_saliency(self, mode: str = "mean") -> SaliencyMap:
        if mode == "sum":
            return SaliencyMap(self.responsibility.copy())
        return SaliencyMap(self.responsibility / np.maximum(self.visits, 1))


def _rect_area(rect: Rect) -> int:
    return (rect[2] - rect[0]) * (rect[3] - rect[1])


def explain_rex(image: Image, oracle: Oracle,
                cfg: ExplainerConfig) -> tuple[ResponsibilityLandscape, BinaryMask]:
    h, w = image.shape
    if h < 2 or w < 2:
        raise InvalidParams("image must be at least 2x2")
    tool = cfg.params or RexParams()
    occ = cfg.occlusion or Occlusion.zero()
    used = 0

    def query_passes(keep_bits: np.ndarray) -> bool:
        nonlocal used
        used += 1
        mutant = apply_occlusion(image, BinaryMask(keep_bits), occ)
        return oracle.classify(mutant).label == cfg.target

    if not query_passes(np.ones((h, w), dtype=bool)):
        raise NoExplanation(f"the full image does not classify as {cfg.target!r}")

    responsibility = np.zeros((h, w))
    visits = np.zeros((h, w), dtype=np.int64)
    rect: Rect = (0, 0, h, w)
    focus = rect

    for iteration in range(tool.refinements):
        if rect[2] - rect[0] < 2 or rect[3] - rect[1] < 2:
            break
        if used + 14 > cfg.budget:
            break
        parts = rex_partition(rect, rng.child_seed(cfg.seed, rng.PARTITION, iteration)).parts
        sufficient = []
        for size in (1, 2, 3):
            for subset in combinations(range(4), size):
                # mutants mask the dropped parts; the unpartitioned remainder
                # of the image stays visible
                keep = np.ones((h, w), dtype=bool)
                keep[rect[0]:rect[2], rect[1]:rect[3]] = False
                for pi in subset:
                    r0, c0, r1, c1 = parts[pi]
                    keep[r0:r1, c0:c1] = True
                if query_passes(keep):
                    sufficient.append(frozenset(subset))
        visits[rect[0]:rect[2], rect[1]:rect[3]] += 1
        minimal = [s for s in sufficient
                   if not any(other < s for other in sufficient)]
        for subset in minimal:
            share = 1.0 / len(subset)
            for pi in subset:
                r0, c0, r1, c1 = parts[pi]
                responsibility[r0:r1, c0:c1] += share

        scores = [responsibility[r0:r1, c0:c1].mean() for r0, c0, r1, c1 in parts]
        focus = parts[int(np.argmax(scores))]  # argmax ties -> smallest row-major origin
        rect = focus
        if _rect_area(focus) <= tool.min_part_area:
            break

    landscape = ResponsibilityLandscape(responsibility=responsibility, visits=visits)
    saliency = landscape.to_saliency(tool.landscape)

    # phase 2: square-box spatial search around the responsibility peak
    peak = int(np.argmax(saliency.values))
    center = (peak // w, peak % w)
    side = max(tool.min_box_side, math.ceil(math.sqrt(_rect_area(focus))))
    step = tool.box_step

    def box_bits(state: tuple[int, int, int]) -> np.ndarray:
        s, r, c = state
        bits = np.zeros((h, w), dtype=bool)
        r0 = min(max(r - s // 2, 0), max(h - s, 0))
        c0 = min(max(c - s // 2, 0), max(w - s, 0))
        bits[r0:r0 + s, c0:c0 + s] = True
        return bits

    verdicts: dict[tuple[int, int, int], bool] = {}

    def passes(state: tuple[int, int, int]) -> bool | None:
        """None once the budget is gone; cached verdicts stay free."""
        nonlocal used
        s, r, c = state
        r0 = min(max(r - s // 2, 0), max(h - s, 0))
        c0 = min(max(c - s // 2, 0), max(w - s, 0))
        key = (min(s, max(h, w)), r0, c0)
        if key not in verdicts:
            if used >= cfg.budget:
                return None
            verdicts[key] = query_passes(box_bits(state))
        return verdicts[key]

    state = (side, center[0], center[1])
    best: tuple[int, int, int] | None = None
    while True:
        verdict = passes(state)
        if verdict is None:
            break
        if verdict:
            if best is None or state[0] < best[0]:
                best = state
            if state[0] - step >= tool.min_box_side:
                cand = (state[0] - step, state[1], state[2])
                sub = passes(cand)
                if sub:
                    state = cand
                    continue
                if sub is None:
                    break
            break  # passing, and no smaller neighborhood box passes
        s, r, c = state
        neighbors = []
        if s - step >= tool.min_box_side:
            neighbors.append((s - step, r, c))
        neighbors += [(s, r - step, c), (s, r + step, c),
                      (s, r, c - step), (s, r, c + step)]
        if s < max(h, w):
            neighbors.append((s + step, r, c))
        adopted = None
        out_of_budget = False
        for cand in neighbors:
            res = passes(cand)
            if res is None:
                out_of_budget = True
                break
            if res:
                adopted = cand
                break  # neighbors are ordered smallest-first
        if out_of_budget:
            break
        state = adopted if adopted is not None else (s + step, r, c)

    if best is not None:
        mask = BinaryMask(box_bits(best))
    else:
        mask = BinaryMask(np.ones((h, w), dtype=bool))  # full image passed phase 0
    return landscape, mask
