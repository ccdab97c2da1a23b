"""The four black-box explanation algorithms."""

from .common import ExplainerConfig, SegmentAttribution
from .lime import LimeParams, explain_lime
from .rex import ResponsibilityLandscape, RexParams, explain_rex
from .rise import RiseParams, duplicate_mask_count, explain_rise
from .shap import ShapParams, explain_shap

__all__ = [
    "ExplainerConfig", "SegmentAttribution", "ResponsibilityLandscape",
    "LimeParams", "RexParams", "RiseParams", "ShapParams",
    "explain_lime", "explain_rex", "explain_rise", "explain_shap",
    "duplicate_mask_count",
]
