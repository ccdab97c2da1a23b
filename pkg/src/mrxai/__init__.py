"""Black-box saliency explanations for image classifiers.

Four perturbation-based explainers over a uniform classifier-oracle
interface, greedy minimal-mask extraction from heatmaps, penalized-dice
scoring against human-provided masks, and a reproducible benchmark
harness tying them together.
"""

from .explainers import (ExplainerConfig, ResponsibilityLandscape,
                         SegmentAttribution, explain_lime, explain_rex,
                         explain_rise, explain_shap)
from .extraction import ExtractionParams, extract_minimal_mask
from .imaging import (BinaryMask, Image, Occlusion, Region, SaliencyMap,
                      apply_occlusion, centroid, connected_components)
from .metrics import PdcBreakdown, PdcParams, dice, distance_component, pdc, size_ratio, summarize
from .mutants import (Partition, RiseMaskParams, Segmentation,
                      coalition_samples, rex_partition, rise_masks, segment_image)
from .oracle import (BlobOracle, BlobOracleParams, Oracle, Prediction,
                     make_oracle, target_confidence)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask", "BlobOracle", "BlobOracleParams", "ExplainerConfig",
    "ExtractionParams", "Image", "Occlusion", "Oracle", "Partition",
    "PdcBreakdown", "PdcParams", "Prediction", "Region",
    "ResponsibilityLandscape", "RiseMaskParams", "SaliencyMap",
    "SegmentAttribution", "Segmentation", "apply_occlusion", "centroid",
    "coalition_samples", "connected_components", "dice",
    "distance_component", "explain_lime", "explain_rex", "explain_rise",
    "explain_shap", "extract_minimal_mask", "make_oracle", "pdc",
    "rex_partition", "rise_masks", "segment_image", "size_ratio",
    "summarize", "target_confidence",
]
