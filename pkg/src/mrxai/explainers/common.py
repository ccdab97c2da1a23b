"""Shared configuration and result records for the explanation algorithms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import InvalidParams
from ..imaging import Occlusion, _freeze


@dataclass(frozen=True)
class ExplainerConfig:
    """Common knobs: the class to explain, the oracle-query allowance, seeding.

    target is the label of the unperturbed image (resolved by the caller,
    e.g. the harness, which has already classified it).  occlusion=None
    means "this tool's documented default".  params carries the
    tool-specific record (RiseParams, RexParams, ...).
    """

    target: str
    budget: int = 2000
    seed: int = 0
    occlusion: Occlusion | None = None
    params: Any = None

    def __post_init__(self):
        if self.budget < 1:
            raise InvalidParams("budget must be >= 1")
        if not self.target:
            raise InvalidParams("target label must be non-empty")


@dataclass(frozen=True)
class SegmentAttribution:
    """Per-segment weights from a surrogate fit, plus its intercept.

    ridge_fallback flags a rank-deficient design that was re-solved with
    a tiny ridge penalty.
    """

    weights: np.ndarray
    intercept: float
    ridge_fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", _freeze(np.asarray(self.weights, dtype=np.float64)))
