"""Thin external-oracle server speaking the classifier wire protocol."""

from .models import BrightestWindowModel, ConstantModel, ModelError, load_model
from .server import AdapterConfig, RequestHandler, serve

__all__ = ["AdapterConfig", "BrightestWindowModel", "ConstantModel",
           "ModelError", "RequestHandler", "load_model", "serve"]
